"""Commit policies: Hold-n, LA-n (local agreement) and Regularized Batched Inputs.

The ``*_commit`` functions are the policy rules themselves. The classes
adapt them to the engine's ``step`` interface.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import _kernels
from .core import Hypothesis, forced_decode
from .errors import EmptyBatch, InvalidParam
from .regularize import Regularizer, RegularizerSpec

POLICY_KINDS = ("hold_n", "la_n", "r_bi")


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    n: int = 0
    regularizer_specs: tuple[RegularizerSpec, ...] = ()
    word_level: bool = False

    def __post_init__(self):
        specs = tuple(RegularizerSpec.parse(r) if isinstance(r, str) else r for r in self.regularizer_specs)
        object.__setattr__(self, "regularizer_specs", specs)
        if self.kind not in POLICY_KINDS:
            raise InvalidParam(f"unknown policy kind {self.kind!r}")
        if self.n < 0:
            raise InvalidParam("n must be >= 0")
        if self.kind == "la_n" and self.n < 1:
            raise InvalidParam("LA-n needs n >= 1")

    @property
    def label(self) -> str:
        if self.kind == "hold_n":
            return f"hold-{self.n}"
        if self.kind == "la_n":
            return f"la-{self.n}"
        regs = "+".join(s.to_text() for s in self.regularizer_specs)
        return f"rbi[{regs}]" if regs else "rbi"


@dataclass
class LaMemory:
    n: int
    history: deque = field(default=None)
    seen: int = 0

    def __post_init__(self):
        if self.history is None:
            self.history = deque(maxlen=self.n)


def sentencepiece_word_start(token: str) -> bool:
    return token.startswith("▁")


def longest_common_prefix(seqs: Sequence[Sequence[str]], word_start: Callable[[str], bool] | None = None) -> tuple:
    """Longest sequence that every member of ``seqs`` starts with.

    With ``word_start`` given, the prefix is cut back so it never ends in
    the middle of a word: it may only stop where the next token (in every
    sequence that has one) starts a new word.
    """
    seqs = [tuple(s) for s in seqs]
    if not seqs:
        raise EmptyBatch("longest_common_prefix needs at least one sequence")
    n = _kernels.lcp_length(seqs)
    if word_start is not None:
        while n > 0 and not all(len(s) == n or word_start(s[n]) for s in seqs):
            n -= 1
    return seqs[0][:n]


def hold_n_commit(hyp: Hypothesis, committed_len: int, n: int) -> tuple:
    end = max(committed_len, len(hyp.tokens) - n)
    return tuple(hyp.tokens[committed_len:end])


def la_n_commit(memory: LaMemory, new_hyp: Hypothesis, committed_len: int, n: int, word_start=None):
    """Returns ``(new_tokens, memory)``; ``memory`` is updated in place."""
    if memory.n != n:
        raise InvalidParam("LA memory was created for a different n")
    memory.history.append(tuple(new_hyp.tokens))
    memory.seen += 1
    if memory.seen < n:
        return (), memory
    agreed = longest_common_prefix(list(memory.history), word_start)
    return tuple(agreed[committed_len:]), memory


def build_batch(model_input, regularizers: Sequence[Regularizer], rng) -> list:
    """The original input followed by one perturbed copy per regularizer.

    A :class:`TranscriptBatch` (cascade input) already is a batch: its
    candidates are returned as-is and ``regularizers`` is ignored.
    """
    if isinstance(model_input, TranscriptBatch):
        return list(model_input.transcripts)
    return [model_input] + [reg(model_input, rng) for reg in regularizers]


def primary_input(model_input):
    if isinstance(model_input, TranscriptBatch):
        return model_input.transcripts[0]
    return model_input


@dataclass(frozen=True)
class TranscriptBatch:
    """ASR n-best for one source prefix, best first; input to the cascade's MT stage."""

    transcripts: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "transcripts", tuple(tuple(t) for t in self.transcripts))
        if not self.transcripts:
            raise EmptyBatch("transcript batch is empty")


def r_bi_commit(translator, regularizers, model_input, committed, rng, word_start=None):
    """Decode the original and every regularized input, commit their common prefix.

    Returns ``(new_tokens, hypotheses)`` with ``hypotheses[0]`` belonging to
    the unperturbed input. Any failing decode aborts the whole step.
    """
    committed = tuple(committed)
    batch = build_batch(model_input, regularizers, rng)
    hyps = [forced_decode(translator, x, committed) for x in batch]
    agreed = longest_common_prefix([h.tokens for h in hyps], word_start)
    return tuple(agreed[len(committed):]), hyps


class HoldN:
    def __init__(self, n: int):
        if n < 0:
            raise InvalidParam("n must be >= 0")
        self.n = n
        self.decodes_per_chunk = 1

    def new_memory(self):
        return None

    def step(self, translator, model_input, committed, rng, memory):
        hyp = forced_decode(translator, primary_input(model_input), committed)
        return hold_n_commit(hyp, len(committed), self.n), hyp


class LocalAgreement:
    def __init__(self, n: int, word_start=None):
        if n < 1:
            raise InvalidParam("LA-n needs n >= 1")
        self.n = n
        self.word_start = word_start
        self.decodes_per_chunk = 1

    def new_memory(self):
        return LaMemory(self.n)

    def step(self, translator, model_input, committed, rng, memory):
        hyp = forced_decode(translator, primary_input(model_input), committed)
        new, _ = la_n_commit(memory, hyp, len(committed), self.n, self.word_start)
        return new, hyp


class RegularizedBatch:
    def __init__(self, regularizers: Sequence[Regularizer | RegularizerSpec | str], word_start=None):
        self.regularizers = [r if isinstance(r, Regularizer) else Regularizer(r) for r in regularizers]
        self.word_start = word_start

    @property
    def decodes_per_chunk(self):
        return len(self.regularizers) + 1

    def new_memory(self):
        return None

    def step(self, translator, model_input, committed, rng, memory):
        new, hyps = r_bi_commit(translator, self.regularizers, model_input, committed, rng, self.word_start)
        return new, hyps[0]


def build_policy(spec: PolicySpec, cascade: bool = False):
    """Engine policy for ``spec``.

    End-to-end R-BI needs at least one regularizer. In the cascade the
    batch is the ASR n-best list, so regularizers are not used.
    """
    word_start = sentencepiece_word_start if spec.word_level else None
    if spec.kind == "hold_n":
        return HoldN(spec.n)
    if spec.kind == "la_n":
        return LocalAgreement(spec.n, word_start)
    if not cascade and not spec.regularizer_specs:
        raise InvalidParam("R-BI needs at least one regularizer")
    return RegularizedBatch([] if cascade else spec.regularizer_specs, word_start)
