"""Latency (AL, AP, DAL) and quality (corpus BLEU) metrics."""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import EmptyCorpus, EmptyOutput, InvalidParam

LOW_LATENCY_AL_MS = 2000.0


@dataclass(frozen=True)
class DelaySchedule:
    """Per-word emission delays and the source duration, both in ms."""

    delays_ms: tuple[float, ...]
    src_duration_ms: float

    def __post_init__(self):
        d = tuple(float(x) for x in self.delays_ms)
        object.__setattr__(self, "delays_ms", d)
        if not self.src_duration_ms > 0:
            raise InvalidParam("src_duration_ms must be positive")
        if not d:
            raise EmptyOutput("delay schedule is empty")
        if any(x < 0 for x in d) or any(b < a for a, b in zip(d, d[1:])):
            raise InvalidParam("delays must be non-negative and non-decreasing")


@dataclass(frozen=True)
class MetricReport:
    bleu: float
    al_ms: float
    ap: float
    dal_ms: float
    low_latency: bool

    def to_dict(self) -> dict:
        return {"bleu": self.bleu, "AL_ms": self.al_ms, "AP": self.ap, "DAL_ms": self.dal_ms, "low_latency": self.low_latency}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(float(d["bleu"]), float(d["AL_ms"]), float(d["AP"]), float(d["DAL_ms"]), bool(d["low_latency"]))


# Detokenizers decide whether a token starts a new word.
def _every_token(tok: str) -> bool:
    return True


def _sentencepiece(tok: str) -> bool:
    return tok.startswith("▁")


DETOKENIZERS: dict[str, Callable[[str], bool]] = {"word": _every_token, "sentencepiece": _sentencepiece}


def group_words(tokens: Sequence[str], detokenizer: str = "word") -> list[tuple[str, list[int]]]:
    """Join tokens into words; returns ``(word, token_indices)`` pairs.

    ``word``: every token is a word. ``sentencepiece``: a leading ``▁``
    starts a word. ``bpe``: a trailing ``@@`` glues a token to the next.
    """
    words: list[tuple[str, list[int]]] = []
    if detokenizer == "bpe":
        cur, idx = "", []
        for i, tok in enumerate(tokens):
            cont = tok.endswith("@@")
            cur += tok[:-2] if cont else tok
            idx.append(i)
            if not cont:
                words.append((cur, idx))
                cur, idx = "", []
        if idx:
            words.append((cur, idx))
        return words
    try:
        starts = DETOKENIZERS[detokenizer]
    except KeyError:
        raise InvalidParam(f"unknown detokenizer {detokenizer!r}") from None
    for i, tok in enumerate(tokens):
        piece = tok.lstrip("▁") if detokenizer == "sentencepiece" else tok
        if not words or starts(tok):
            words.append((piece, [i]))
        else:
            w, idx = words[-1]
            words[-1] = (w + piece, idx + [i])
    return [(w, idx) for w, idx in words if w]


def detokenize(tokens: Sequence[str], detokenizer: str = "word") -> str:
    return " ".join(w for w, _ in group_words(tokens, detokenizer))


def word_delays(records, src_duration_ms: float, detokenizer: str = "word") -> DelaySchedule:
    """Delay of each word = consumed_ms of its last token."""
    records = list(records)
    if not records:
        raise EmptyOutput("no committed tokens")
    words = group_words([r.token for r in records], detokenizer)
    if not words:
        raise EmptyOutput("committed tokens form no words")
    return DelaySchedule(tuple(records[idx[-1]].consumed_ms for _, idx in words), src_duration_ms)


def average_lagging(sched: DelaySchedule, target_len: int | None = None) -> float:
    """AL with a uniform ideal schedule of ``T_src / |Y|`` per word.

    Summation stops at the first word emitted after the whole source was
    read. ``target_len`` replaces ``|Y|`` (e.g. reference length).
    """
    d = sched.delays_ms
    T = sched.src_duration_ms
    gamma = T / (target_len if target_len else len(d))
    tau = next((i + 1 for i, x in enumerate(d) if x >= T), len(d))
    return sum(d[i] - i * gamma for i in range(tau)) / tau


def average_proportion(sched: DelaySchedule) -> float:
    d = sched.delays_ms
    return sum(d) / (sched.src_duration_ms * len(d))


def dal(sched: DelaySchedule) -> float:
    d = sched.delays_ms
    gamma = sched.src_duration_ms / len(d)
    total = 0.0
    prev = None
    for i, x in enumerate(d):
        cur = x if prev is None else max(x, prev + gamma)
        total += cur - i * gamma
        prev = cur
    return total / len(d)


def classify_latency(al_ms: float) -> bool:
    return al_ms < LOW_LATENCY_AL_MS


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0x3040 <= cp <= 0x30FF
        or 0xF900 <= cp <= 0xFAFF
        or 0x20000 <= cp <= 0x2FA1F
    )


def tokenize_for_bleu(text: str) -> list[str]:
    """Whitespace split after isolating punctuation; CJK characters become single tokens."""
    out = []
    buf = []
    for ch in text:
        if ch.isspace():
            if buf:
                out.append("".join(buf))
                buf = []
        elif unicodedata.category(ch).startswith("P") or _is_cjk(ch):
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def _ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def bleu_stats(hyp: Sequence[str], ref: Sequence[str], max_n: int = 4) -> list[int]:
    """[hyp_len, ref_len, match_1, total_1, ..., match_N, total_N]."""
    stats = [len(hyp), len(ref)]
    for n in range(1, max_n + 1):
        h = _ngrams(hyp, n)
        r = _ngrams(ref, n)
        stats.append(sum(min(c, r[g]) for g, c in h.items()))
        stats.append(max(len(hyp) - n + 1, 0))
    return stats


def bleu_from_stats(stats: Sequence[int], smooth: bool = False, max_n: int = 4) -> float:
    hyp_len, ref_len = stats[0], stats[1]
    if hyp_len == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        match, total = stats[2 + 2 * n], stats[3 + 2 * n]
        if smooth:
            match, total = match + 1, total + 1
        if match == 0 or total == 0:
            return 0.0
        log_p += math.log(match / total)
    bp = min(0.0, 1.0 - ref_len / hyp_len)
    return 100.0 * math.exp(bp + log_p / max_n)


def bleu(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]], smooth: bool = False) -> float:
    """Corpus BLEU-4 on word sequences (case-sensitive, exact match).

    Without smoothing any zero n-gram precision gives 0. ``smooth=True``
    adds one to every numerator and denominator.
    """
    if len(hypotheses) != len(references):
        raise InvalidParam("hypothesis and reference counts differ")
    if not hypotheses:
        raise EmptyCorpus("BLEU needs at least one sentence pair")
    totals = [0] * 10
    for h, r in zip(hypotheses, references):
        for i, v in enumerate(bleu_stats(list(h), list(r))):
            totals[i] += v
    return bleu_from_stats(totals, smooth)


def report(sched: DelaySchedule, bleu_score: float) -> MetricReport:
    al = average_lagging(sched)
    return MetricReport(bleu_score, al, average_proportion(sched), dal(sched), classify_latency(al))
