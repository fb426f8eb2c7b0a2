"""Corpus evaluation and chunk-size sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import EngineConfig, forced_decode, run_incremental
from ..ctc import CASCADE_MODES, UnigramScorer, cascade_batch, read_logits
from ..errors import EmptyCorpus, InvalidParam, SimulPolicyError
from ..metrics import (
    bleu,
    classify_latency,
    detokenize,
    report,
    tokenize_for_bleu,
    word_delays,
)
from ..policies import PolicySpec, TranscriptBatch, build_policy
from .audio_io import read_wav

log = logging.getLogger(__name__)

SWEEP_HEADER = ["policy", "chunk_ms", "bleu", "al_ms", "ap", "dal_ms"]


class EndToEndBackend:
    """Speech in, translation out: the translator sees audio prefixes directly."""

    mode = "e2e"
    cascade = False

    def __init__(self, translator):
        self.translator = translator

    @property
    def concurrency_safe(self):
        return getattr(self.translator, "concurrency_safe", False)

    def load_source(self, utt):
        if utt.audio_path is None:
            raise InvalidParam(f"utterance {utt.id} has no audio; the end-to-end backend needs WAV input")
        return read_wav(utt.audio_path)

    frontend = None


class CascadeBackend:
    """Stored CTC posteriors feed an n-best ASR step, whose transcripts go to the MT translator."""

    mode = "cascade"
    cascade = True

    def __init__(self, translator, beam=8, n_best=4, ctc_mode="ctc_prefix_beam_search", scorer=None, ctc_weight=0.5):
        if ctc_mode not in CASCADE_MODES:
            raise InvalidParam(f"unknown CTC mode {ctc_mode!r}")
        if n_best < 1 or n_best > beam:
            raise InvalidParam("n_best must lie in [1, beam]")
        self.translator = translator
        self.beam = beam
        self.n_best = n_best
        self.ctc_mode = ctc_mode
        self.scorer = scorer
        self.ctc_weight = ctc_weight

    @property
    def concurrency_safe(self):
        return getattr(self.translator, "concurrency_safe", False)

    def load_source(self, utt):
        if utt.logits_path is None:
            raise InvalidParam(f"utterance {utt.id} has no logits; the cascade backend needs a logits file")
        return read_logits(utt.logits_path, utt.frame_ms)

    def frontend(self, prefix):
        scorer = self.scorer
        if self.ctc_mode == "attention_rescoring" and scorer is None:
            scorer = UnigramScorer.uniform(prefix.vocab)
        return TranscriptBatch(cascade_batch(prefix, self.ctc_mode, self.beam, self.n_best, scorer, self.ctc_weight))


def utterance_rng(seed: int, utt_id: str) -> np.random.Generator:
    """Generator keyed on (seed, utterance id) so evaluation order never changes the draws."""
    key = int.from_bytes(hashlib.blake2b(utt_id.encode(), digest_size=8).digest(), "little")
    return np.random.default_rng([int(seed), key])


@dataclass
class CorpusReport:
    policy: str
    chunk_ms: int
    utterances: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    bleu: float = 0.0
    al_ms: float = 0.0
    ap: float = 0.0
    dal_ms: float = 0.0

    @property
    def low_latency(self) -> bool:
        return classify_latency(self.al_ms)

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "chunk_ms": self.chunk_ms,
            "num_utterances": len(self.utterances),
            "num_failed": len(self.failures),
            "bleu": self.bleu,
            "AL_ms": self.al_ms,
            "AP": self.ap,
            "DAL_ms": self.dal_ms,
            "low_latency": self.low_latency,
            "failures": self.failures,
        }


def _evaluate_one(utt, backend, policy_spec, config, detokenizer, smooth):
    source = backend.load_source(utt)
    policy = build_policy(policy_spec, cascade=backend.cascade)
    res = run_incremental(
        backend.translator, source, policy, config,
        rng=utterance_rng(config.seed, utt.id), frontend=backend.frontend,
    )
    res.id = utt.id
    hyp_words = tokenize_for_bleu(detokenize(res.tokens, detokenizer))
    sched = word_delays(res.committed, res.src_duration_ms, detokenizer)
    metrics = report(sched, bleu([hyp_words], [utt.reference], smooth=smooth))
    res.metrics = metrics
    return res, hyp_words


def evaluate_corpus(manifest, backend, config: EngineConfig, policy_spec: PolicySpec | None = None, *,
                    jobs: int = 1, skip_errors: bool = False, detokenizer: str = "word", smooth: bool = False) -> CorpusReport:
    """Run every utterance and aggregate.

    Corpus BLEU pools n-gram statistics; AL/AP/DAL are unweighted means
    over utterances. Failing utterances abort the run unless
    ``skip_errors`` is set, in which case they are listed and excluded.
    """
    policy_spec = policy_spec if policy_spec is not None else config.policy_spec
    if policy_spec is None:
        raise InvalidParam("no policy given")
    utts = list(manifest)
    if not utts:
        raise EmptyCorpus("manifest is empty")

    def work(utt):
        try:
            return utt, _evaluate_one(utt, backend, policy_spec, config, detokenizer, smooth), None
        except SimulPolicyError as exc:
            if not skip_errors:
                raise
            log.warning("utterance %s failed: %s", utt.id, exc)
            return utt, None, exc

    if jobs > 1 and backend.concurrency_safe:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, utts))
    else:
        outcomes = [work(u) for u in utts]

    rep = CorpusReport(policy=policy_spec.label, chunk_ms=config.chunk_size_ms)
    hyps, refs = [], []
    for utt, out, exc in outcomes:
        if exc is not None:
            rep.failures.append({"id": utt.id, "error": type(exc).__name__, "message": str(exc)})
            continue
        res, hyp_words = out
        hyps.append(hyp_words)
        refs.append(list(utt.reference))
        rep.utterances.append(utterance_record(res))
    if not rep.utterances:
        raise EmptyCorpus("every utterance failed")
    rep.bleu = bleu(hyps, refs, smooth=smooth)
    n = len(rep.utterances)
    rep.al_ms = sum(u["metrics"]["AL_ms"] for u in rep.utterances) / n
    rep.ap = sum(u["metrics"]["AP"] for u in rep.utterances) / n
    rep.dal_ms = sum(u["metrics"]["DAL_ms"] for u in rep.utterances) / n
    return rep


def utterance_record(res) -> dict:
    return {
        "id": res.id,
        "tokens": [r.token for r in res.committed],
        "consumed_ms": [r.consumed_ms for r in res.committed],
        "chunk_index": [r.chunk_index for r in res.committed],
        "src_duration_ms": res.src_duration_ms,
        "num_chunks": res.num_chunks,
        "decode_calls": res.decode_calls,
        "metrics": res.metrics.to_dict(),
    }


def offline_bleu(manifest, backend, detokenizer: str = "word", smooth: bool = False) -> float:
    """BLEU of the backend decoding each full source once, with no policy."""
    hyps, refs = [], []
    for utt in manifest:
        source = backend.load_source(utt)
        x = backend.frontend(source).transcripts[0] if backend.frontend is not None else source
        hyp = forced_decode(backend.translator, x, ())
        hyps.append(tokenize_for_bleu(detokenize(hyp.tokens, detokenizer)))
        refs.append(list(utt.reference))
    return bleu(hyps, refs, smooth=smooth)


@dataclass(frozen=True)
class SweepConfig:
    chunk_sizes_ms: tuple[int, ...] = (250, 500, 1000)
    policies: tuple[PolicySpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "chunk_sizes_ms", tuple(self.chunk_sizes_ms))
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.chunk_sizes_ms or not self.policies:
            raise InvalidParam("sweep needs at least one chunk size and one policy")


def sweep(manifest, backend, sweep_config: SweepConfig, base: EngineConfig | None = None, **kwargs) -> list[dict]:
    """One row per (policy, chunk size), policies outermost."""
    base = base if base is not None else EngineConfig(chunk_size_ms=sweep_config.chunk_sizes_ms[0])
    rows = []
    for spec in sweep_config.policies:
        for chunk_ms in sweep_config.chunk_sizes_ms:
            cfg = replace(base, chunk_size_ms=chunk_ms, policy_spec=spec)
            rep = evaluate_corpus(manifest, backend, cfg, spec, **kwargs)
            rows.append({"policy": spec.label, "chunk_ms": chunk_ms, "bleu": rep.bleu,
                         "al_ms": rep.al_ms, "ap": rep.ap, "dal_ms": rep.dal_ms})
    return rows


def write_utterances_jsonl(path, rep: CorpusReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in rep.utterances:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def write_summary(path, rep: CorpusReport) -> None:
    Path(path).write_text(json.dumps(rep.summary(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_sweep_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
