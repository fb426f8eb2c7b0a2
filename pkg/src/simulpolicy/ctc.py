"""CTC decoding for the cascade: greedy search, prefix beam search n-best,
and attention rescoring through a pluggable scorer.

Label ``V`` (the last column) is the blank. Scores are natural-log
probabilities; ties are broken lexicographically on the token strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import _kernels
from .core import Hypothesis
from .errors import BackendFailure, InvalidLabel, InvalidParam, SimulPolicyError

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LogitMatrix:
    """Per-frame posteriors over ``vocab`` plus blank (last column).

    ``frame_ms`` is the frame shift; it lets the engine chunk a logit
    stream the same way it chunks audio.
    """

    probs: np.ndarray
    vocab: tuple[str, ...]
    frame_ms: float = 40.0
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64, copy=True)
        vocab = tuple(self.vocab)
        if probs.ndim != 2 or probs.shape[1] != len(vocab) + 1:
            raise InvalidParam(f"probs must have shape (T, {len(vocab) + 1}), got {probs.shape}")
        if len(set(vocab)) != len(vocab) or any(not v or any(ch.isspace() for ch in v) for v in vocab):
            raise InvalidParam("vocabulary tokens must be unique, non-empty and contain no whitespace")
        if not self.frame_ms > 0:
            raise InvalidParam("frame_ms must be positive")
        if self.validate and probs.size:
            if not np.all(np.isfinite(probs)) or probs.min() < 0 or probs.max() > 1:
                raise InvalidParam("probabilities must lie in [0, 1]")
            bad = np.abs(probs.sum(axis=1) - 1.0) > ROW_SUM_TOL
            if bad.any():
                raise InvalidParam(f"row {int(np.argmax(bad))} does not sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "vocab", vocab)

    def __len__(self):
        return self.probs.shape[0]

    @property
    def blank(self) -> int:
        return len(self.vocab)

    @property
    def rate_hz(self):
        return 1000.0 / self.frame_ms

    @property
    def duration_ms(self) -> float:
        return len(self) * self.frame_ms

    def prefix(self, end: int) -> "LogitMatrix":
        return LogitMatrix(self.probs[:end], self.vocab, self.frame_ms, validate=False)

    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def ranks(self) -> list[int]:
        order = sorted(range(len(self.vocab)), key=lambda i: self.vocab[i])
        ranks = [0] * len(self.vocab)
        for r, i in enumerate(order):
            ranks[i] = r
        return ranks


@dataclass(frozen=True)
class Candidate:
    transcript: tuple[str, ...]
    ctc_log_prob: float
    rescored_log_prob: float | None = None

    @property
    def score(self) -> float:
        return self.ctc_log_prob if self.rescored_log_prob is None else self.rescored_log_prob


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[Candidate, ...]

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @property
    def transcripts(self) -> list[tuple[str, ...]]:
        return [c.transcript for c in self.candidates]


class CandidateScorer(Protocol):
    """Attention-decoder stand-in: log-probability of a full transcript."""

    def score(self, transcript: Sequence[str]) -> float: ...


class UnigramScorer:
    """Scores a transcript as a bag of unigrams plus an end-of-sentence cost.

    Tokens missing from ``log_probs`` get ``oov_log_prob``.
    """

    def __init__(self, log_probs: dict[str, float], oov_log_prob: float = -20.0, eos_log_prob: float = 0.0):
        self.log_probs = dict(log_probs)
        self.oov_log_prob = oov_log_prob
        self.eos_log_prob = eos_log_prob

    @classmethod
    def uniform(cls, vocab: Sequence[str]) -> "UnigramScorer":
        lp = -math.log(len(vocab) + 1)
        return cls({v: lp for v in vocab}, oov_log_prob=lp, eos_log_prob=lp)

    def score(self, transcript):
        return sum(self.log_probs.get(t, self.oov_log_prob) for t in transcript) + self.eos_log_prob


def collapse(path: Sequence[int], vocab: Sequence[str]) -> tuple[str, ...]:
    """Merge adjacent repeats, then drop blanks (index ``len(vocab)``)."""
    blank = len(vocab)
    out = []
    prev = None
    for label in path:
        label = int(label)
        if not 0 <= label <= blank:
            raise InvalidLabel(f"label {label} outside [0, {blank}]")
        if label != prev and label != blank:
            out.append(vocab[label])
        prev = label
    return tuple(out)


def ctc_greedy(logits: LogitMatrix) -> Hypothesis:
    if len(logits) == 0:
        return Hypothesis((), 0.0)
    path = np.argmax(logits.probs, axis=1)
    best = logits.probs[np.arange(len(logits)), path]
    with np.errstate(divide="ignore"):
        score = float(np.sum(np.log(best)))
    return Hypothesis(collapse(path, logits.vocab), score if math.isfinite(score) else None)


def ctc_prefix_beam_search(logits: LogitMatrix, beam: int, n_best: int) -> CandidateSet:
    """Top ``n_best`` label sequences with probabilities summed over the alignments kept by the beam.

    With a beam at least as large as the number of distinct prefixes the
    result is the exact marginal probability of each sequence.
    """
    if beam < 1:
        raise InvalidParam("beam must be >= 1")
    if n_best < 1 or n_best > beam:
        raise InvalidParam("n_best must lie in [1, beam]")
    raw = _kernels.prefix_beam_search(logits.log_probs(), logits.ranks(), int(beam), int(n_best))
    vocab = logits.vocab
    return CandidateSet(tuple(Candidate(tuple(vocab[c] for c in labels), float(lp)) for labels, lp in raw))


def _sorted(cands) -> tuple[Candidate, ...]:
    return tuple(sorted(cands, key=lambda c: (-c.score, c.transcript)))


def attention_rescore(cands: CandidateSet, scorer: CandidateScorer, ctc_weight: float = 0.5) -> CandidateSet:
    """Interpolate CTC and scorer log-probabilities, then re-sort."""
    if not 0.0 <= ctc_weight <= 1.0:
        raise InvalidParam("ctc_weight must lie in [0, 1]")
    rescored = []
    for c in cands:
        try:
            s = float(scorer.score(c.transcript))
        except SimulPolicyError:
            raise
        except Exception as exc:
            raise BackendFailure(f"scorer failed on {list(c.transcript)}: {exc}", diagnostics=repr(exc)) from exc
        if not math.isfinite(s):
            raise BackendFailure(f"scorer returned non-finite score for {list(c.transcript)}")
        if ctc_weight == 1.0:
            combined = c.ctc_log_prob
        else:
            combined = ctc_weight * c.ctc_log_prob + (1.0 - ctc_weight) * s
        rescored.append(replace(c, rescored_log_prob=combined))
    if ctc_weight == 1.0:
        return CandidateSet(tuple(rescored))
    return CandidateSet(_sorted(rescored))


CASCADE_MODES = ("ctc_prefix_beam_search", "attention_rescoring")


def cascade_batch(logits: LogitMatrix, mode: str, beam: int, n_best: int, scorer=None, ctc_weight: float = 0.5):
    """ASR n-best transcripts that form the MT stage's input batch, best first."""
    if mode not in CASCADE_MODES:
        raise InvalidParam(f"unknown cascade mode {mode!r}")
    cands = ctc_prefix_beam_search(logits, beam, n_best)
    if mode == "attention_rescoring":
        if scorer is None:
            raise InvalidParam("attention_rescoring needs a scorer")
        cands = attention_rescore(cands, scorer, ctc_weight)
    return cands.transcripts


def vocab_path(path) -> Path:
    return Path(path).with_suffix(".vocab")


def write_logits(path, logits: LogitMatrix) -> None:
    """Write ``T V`` then T rows of V+1 probabilities; the vocabulary goes to a ``.vocab`` sidecar."""
    path = Path(path)
    T, width = logits.probs.shape
    lines = [f"{T} {width - 1}"]
    lines += [" ".join(repr(float(p)) for p in row) for row in logits.probs]
    path.write_text("\n".join(lines) + "\n")
    vocab_path(path).write_text(" ".join(logits.vocab) + "\n")


def read_logits(path, frame_ms: float = 40.0) -> LogitMatrix:
    """Read the format written by :func:`write_logits`.

    The vocabulary may also be given as one extra line after the rows,
    in which case no sidecar is needed.
    """
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
        T, V = (int(x) for x in lines[0].split())
        rows = [[float(x) for x in ln.split()] for ln in lines[1:T + 1]]
        if len(rows) != T or any(len(r) != V + 1 for r in rows):
            raise ValueError(f"expected {T} rows of {V + 1} values")
        if len(lines) > T + 1:
            vocab = lines[T + 1].split()
        else:
            vocab = vocab_path(path).read_text().split()
        if len(vocab) != V:
            raise ValueError(f"expected {V} vocabulary tokens, found {len(vocab)}")
    except (OSError, ValueError, IndexError) as exc:
        raise InvalidParam(f"cannot read logits file {path}: {exc}") from exc
    probs = np.array(rows, dtype=np.float64).reshape(T, V + 1)
    return LogitMatrix(probs, tuple(vocab), frame_ms)
