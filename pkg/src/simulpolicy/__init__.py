"""Commit policies for simultaneous speech translation.

Hold-n, LA-n and Regularized Batched Inputs (R-BI) on top of a chunked
incremental-decoding engine, with CTC n-best generation for cascades and
latency/quality metrics.
"""

from ._kernels import IMPLEMENTATION as KERNELS
from .core import AudioBuffer, CommitRecord, EngineConfig, Hypothesis, UtteranceResult, chunk_boundaries, run_incremental
from .policies import (
    HoldN,
    LocalAgreement,
    PolicySpec,
    RegularizedBatch,
    build_policy,
    hold_n_commit,
    la_n_commit,
    longest_common_prefix,
    r_bi_commit,
)
from .regularize import Regularizer, RegularizerSpec

__version__ = "0.1.0"
