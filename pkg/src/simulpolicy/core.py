"""Incremental decoding loop.

The source is cut into fixed-size chunks. After each chunk arrives the
translator re-decodes the whole prefix, forced to start with the tokens
already committed, and a policy decides which new tokens to commit.
Committed tokens are never retracted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .errors import BackendFailure, EmptyInput, InvalidParam, PrefixViolation, SimulPolicyError

MIN_CHUNK_MS = 50
MAX_CHUNK_MS = 10000


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono waveform. ``samples`` is stored as a read-only float64 array."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise InvalidParam(f"sample_rate_hz must be a positive integer, got {self.sample_rate_hz!r}")
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise InvalidParam("audio samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate_hz == other.sample_rate_hz and np.array_equal(self.samples, other.samples)

    @property
    def rate_hz(self) -> Fraction:
        return Fraction(self.sample_rate_hz)

    @property
    def duration_ms(self) -> float:
        return float(Fraction(1000 * len(self), self.sample_rate_hz))

    def prefix(self, end: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[:end], self.sample_rate_hz)

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[str, ...]
    score: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if any((not isinstance(t, str)) or t == "" for t in self.tokens):
            raise InvalidParam("hypothesis tokens must be non-empty strings")
        if self.score is not None and not math.isfinite(self.score):
            raise InvalidParam("hypothesis score must be finite")


@dataclass(frozen=True)
class CommitRecord:
    token: str
    consumed_ms: float
    chunk_index: int


@dataclass
class StreamState:
    committed: list[CommitRecord] = field(default_factory=list)
    chunk_index: int = 0
    policy_memory: Any = None
    finished: bool = False

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(r.token for r in self.committed)

    def commit(self, tokens: Sequence[str], consumed_ms: float, chunk_index: int) -> None:
        if self.finished:
            raise SimulPolicyError("stream already finished")
        for tok in tokens:
            self.committed.append(CommitRecord(tok, consumed_ms, chunk_index))

    def finish(self) -> None:
        if self.finished:
            raise SimulPolicyError("stream already finished")
        self.finished = True


@dataclass(frozen=True)
class EngineConfig:
    chunk_size_ms: int
    policy_spec: Any = None
    seed: int = 0
    finalize_on_last_chunk: bool = True

    def __post_init__(self):
        if int(self.chunk_size_ms) != self.chunk_size_ms or not MIN_CHUNK_MS <= self.chunk_size_ms <= MAX_CHUNK_MS:
            raise InvalidParam(f"chunk_size_ms must be an integer in [{MIN_CHUNK_MS}, {MAX_CHUNK_MS}]")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParam("seed must be a 64-bit unsigned integer")


@dataclass
class UtteranceResult:
    committed: list[CommitRecord]
    final_hypothesis: tuple[str, ...]
    src_duration_ms: float
    num_chunks: int
    decode_calls: int
    metrics: Any = None
    id: str = ""

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(r.token for r in self.committed)


class Translator(Protocol):
    """Forced-prefix decoding contract.

    ``translate(x, forced_prefix)`` must return a hypothesis whose tokens
    start with ``forced_prefix``. Backends that are safe to call from
    several threads set ``concurrency_safe = True``.
    """

    concurrency_safe: bool

    def translate(self, model_input: Any, forced_prefix: Sequence[str]) -> Hypothesis: ...


def forced_decode(translator, model_input, forced_prefix: Sequence[str]) -> Hypothesis:
    """Call ``translator`` and enforce the forced-prefix contract."""
    forced_prefix = tuple(forced_prefix)
    try:
        hyp = translator.translate(model_input, forced_prefix)
    except SimulPolicyError:
        raise
    except Exception as exc:
        raise BackendFailure(f"translator failed: {exc}", diagnostics=repr(exc)) from exc
    if not isinstance(hyp, Hypothesis):
        raise BackendFailure(f"translator returned {type(hyp).__name__}, expected Hypothesis")
    if hyp.tokens[: len(forced_prefix)] != forced_prefix:
        raise PrefixViolation(
            f"hypothesis {list(hyp.tokens[:len(forced_prefix) + 2])}... does not start with forced prefix {list(forced_prefix)}"
        )
    return hyp


def chunk_boundaries(audio, chunk_size_ms: int) -> list[int]:
    """End indices of the growing prefixes, one per chunk.

    Works on anything with ``len()`` and a ``rate_hz`` (samples or frames
    per second). The last chunk absorbs the remainder.
    """
    if chunk_size_ms <= 0:
        raise InvalidParam("chunk_size_ms must be positive")
    n = len(audio)
    if n == 0:
        raise EmptyInput("cannot chunk empty input")
    chunk = math.floor(Fraction(chunk_size_ms) * Fraction(audio.rate_hz) / 1000)
    if chunk < 1:
        raise InvalidParam(f"chunk of {chunk_size_ms} ms holds no samples at {audio.rate_hz} Hz")
    return [min(i * chunk, n) for i in range(1, -(-n // chunk) + 1)]


def consumed_ms(end: int, rate_hz) -> float:
    return float(Fraction(1000 * end) / Fraction(rate_hz))


def run_incremental(
    translator,
    audio,
    policy,
    config: EngineConfig,
    rng: np.random.Generator | None = None,
    frontend: Callable[[Any], Any] | None = None,
) -> UtteranceResult:
    """Run one utterance through the chunked decode/commit loop.

    ``policy.step(translator, model_input, committed, rng, memory)`` returns
    ``(new_tokens, primary_hypothesis)``. ``frontend`` turns a source prefix
    into model input (the cascade uses it to run ASR); identity by default.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    counting = _CountingTranslator(translator)
    bounds = chunk_boundaries(audio, config.chunk_size_ms)
    state = StreamState(policy_memory=policy.new_memory())
    primary = None
    for i, end in enumerate(bounds, start=1):
        prefix = audio.prefix(end)
        model_input = frontend(prefix) if frontend is not None else prefix
        committed = state.tokens
        new_tokens, primary = policy.step(counting, model_input, committed, rng, state.policy_memory)
        state.chunk_index = i
        state.commit(new_tokens, consumed_ms(end, audio.rate_hz), i)
    final_tokens = primary.tokens
    if config.finalize_on_last_chunk:
        committed = state.tokens
        # Every policy commits a prefix of its primary hypothesis.
        if final_tokens[: len(committed)] != committed:
            raise PrefixViolation("committed tokens are not a prefix of the final hypothesis")
        state.commit(final_tokens[len(committed):], consumed_ms(len(audio), audio.rate_hz), state.chunk_index)
    state.finish()
    return UtteranceResult(
        committed=list(state.committed),
        final_hypothesis=final_tokens,
        src_duration_ms=consumed_ms(len(audio), audio.rate_hz),
        num_chunks=len(bounds),
        decode_calls=counting.calls,
    )


class _CountingTranslator:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.concurrency_safe = getattr(inner, "concurrency_safe", False)

    def translate(self, model_input, forced_prefix):
        self.calls += 1
        return self.inner.translate(model_input, forced_prefix)
