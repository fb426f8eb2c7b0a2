"""Deterministic stand-in translators and corpus generators.

:class:`SyntheticTranslator` imitates an offline model run on incomplete
input. For a prefix covering ``m`` whole units (``unit_ms`` of audio, or
one source word for text input) it emits ``m * tokens_per_chunk``
tokens. All but the last ``k`` are "stable": they depend only on their
position (audio) or on the source word they translate (text). The last
``k`` are "unstable" guesses, always prefixed with ``x`` so tests can
spot them. What the guesses depend on is set by
``perturbation_sensitivity``:

``none``
    position only, so the same guess comes back on every prefix and every
    perturbed copy;
``length_only``
    position and input length;
``full_input``
    a digest of the whole raw input, so any perturbation changes them;
``anchored``
    a digest of the unit the token belongs to. Consecutive clean prefixes
    share that unit and therefore repeat the same wrong guess (which
    local agreement happily commits), while a perturbed copy disagrees.

With ``guess_accuracy > 0`` a guess turns out right (equal to the stable
token) with that probability, decided by the same digest.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..core import AudioBuffer, Hypothesis
from ..ctc import LogitMatrix, ctc_prefix_beam_search, write_logits
from ..errors import InvalidParam
from ..metrics import detokenize
from .audio_io import read_wav, write_wav
from .manifest import write_manifest

SENSITIVITIES = ("none", "length_only", "full_input", "anchored")
UNSTABLE_PREFIX = "x"


def _digest(*parts) -> bytes:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(p if isinstance(p, bytes) else str(p).encode())
        h.update(b"\x1f")
    return h.digest()


@lru_cache(maxsize=65536)
def _stable_audio_token(seed: int, j: int) -> str:
    return "w%04d" % (int.from_bytes(_digest("stable", seed, j), "little") % 10000)


@lru_cache(maxsize=65536)
def _stable_text_token(seed: int, word: str, sub: int) -> str:
    return "t" + _digest("dict", seed, word, sub).hex()[:6]


def is_unstable_token(token: str) -> bool:
    return token.startswith(UNSTABLE_PREFIX)


@dataclass(frozen=True)
class SyntheticTranslatorSpec:
    tokens_per_chunk: int = 1
    unstable_suffix_len: int = 2
    perturbation_sensitivity: str = "full_input"
    seed: int = 0
    unit_ms: int = 250
    guess_accuracy: float = 0.0

    def __post_init__(self):
        if self.tokens_per_chunk < 1:
            raise InvalidParam("tokens_per_chunk must be >= 1")
        if self.unstable_suffix_len < 0:
            raise InvalidParam("unstable_suffix_len must be >= 0")
        if self.perturbation_sensitivity not in SENSITIVITIES:
            raise InvalidParam(f"perturbation_sensitivity must be one of {SENSITIVITIES}")
        if self.unit_ms < 1:
            raise InvalidParam("unit_ms must be >= 1")
        if not 0.0 <= self.guess_accuracy <= 1.0:
            raise InvalidParam("guess_accuracy must lie in [0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticTranslatorSpec":
        return cls(**d)


class SyntheticTranslator:
    """Pure function of (input, forced prefix, spec); counts its calls."""

    concurrency_safe = True

    def __init__(self, spec: SyntheticTranslatorSpec | None = None, **kwargs):
        self.spec = spec if spec is not None else SyntheticTranslatorSpec(**kwargs)
        self._lock = threading.Lock()
        self.calls = 0

    def natural_tokens(self, model_input) -> list[str]:
        if isinstance(model_input, AudioBuffer):
            return self._audio_tokens(model_input)
        return self._text_tokens(tuple(model_input))

    def translate(self, model_input, forced_prefix=()):
        with self._lock:
            self.calls += 1
        forced = tuple(forced_prefix)
        natural = self.natural_tokens(model_input)
        return Hypothesis(forced + tuple(natural[len(forced):]))

    def _guess(self, key: bytes, correct: str) -> str:
        if self.spec.guess_accuracy > 0 and int.from_bytes(key, "little") < self.spec.guess_accuracy * 2.0**64:
            return correct
        return UNSTABLE_PREFIX + key.hex()[:7]

    def _audio_tokens(self, audio: AudioBuffer) -> list[str]:
        s = self.spec
        unit = s.unit_ms * audio.sample_rate_hz // 1000
        if unit < 1:
            raise InvalidParam("unit_ms is shorter than one sample")
        count = (len(audio) // unit) * s.tokens_per_chunk
        cut = max(count - s.unstable_suffix_len, 0)
        out = [_stable_audio_token(s.seed, j) for j in range(cut)]
        whole = None
        for j in range(cut, count):
            mode = s.perturbation_sensitivity
            if mode == "none":
                key = _digest("u", s.seed, j)
            elif mode == "length_only":
                key = _digest("u", s.seed, j, len(audio))
            elif mode == "full_input":
                if whole is None:
                    whole = _digest(audio.samples.tobytes())
                key = _digest("u", s.seed, j, whole)
            else:
                u = j // s.tokens_per_chunk
                key = _digest("u", s.seed, j, audio.samples[u * unit:(u + 1) * unit].tobytes())
            out.append(self._guess(key, _stable_audio_token(s.seed, j)))
        return out

    def _text_tokens(self, src: tuple[str, ...]) -> list[str]:
        s = self.spec
        tpc = s.tokens_per_chunk
        count = len(src) * tpc
        cut = max(count - s.unstable_suffix_len, 0)
        out = [_stable_text_token(s.seed, src[j // tpc], j % tpc) for j in range(cut)]
        whole = None
        for j in range(cut, count):
            mode = s.perturbation_sensitivity
            if mode == "none":
                key = _digest("u", s.seed, j)
            elif mode == "length_only":
                key = _digest("u", s.seed, j, len(src))
            elif mode == "full_input":
                if whole is None:
                    whole = _digest(*src)
                key = _digest("u", s.seed, j, whole)
            else:
                key = _digest("u", s.seed, j, src[j // tpc])
            out.append(self._guess(key, _stable_text_token(s.seed, src[j // tpc], j % tpc)))
        return out


def synthetic_audio(rng: np.random.Generator, duration_ms: int, sample_rate_hz: int = 8000) -> AudioBuffer:
    """Noise-like signal with no exact zeros, quantized to 16-bit levels."""
    n = duration_ms * sample_rate_hz // 1000
    x = 0.1 * rng.standard_normal(n) + 0.05 * np.sin(np.arange(n) * (2 * np.pi * 220 / sample_rate_hz))
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767)
    pcm[pcm == 0] = 1
    return AudioBuffer(pcm / 32768.0, sample_rate_hz)


def make_e2e_corpus(out_dir, n_utts: int, spec: SyntheticTranslatorSpec, seed: int = 0,
                    min_ms: int = 2000, max_ms: int = 6000, sample_rate_hz: int = 8000, step_ms: int = 250):
    """Write WAVs, ``manifest.jsonl`` and ``backend.json``; returns the manifest path.

    References are the translator's own offline output on the full
    audio, so the offline system scores BLEU 100 by construction.
    """
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    translator = SyntheticTranslator(spec)
    entries = []
    for i in range(n_utts):
        dur = int(rng.integers(min_ms // step_ms, max_ms // step_ms + 1)) * step_ms
        rel = f"wav/utt{i:04d}.wav"
        write_wav(out / rel, synthetic_audio(rng, dur, sample_rate_hz))
        audio = read_wav(out / rel)
        ref = detokenize(translator.translate(audio).tokens)
        entries.append({"id": f"utt{i:04d}", "audio": rel, "reference": ref})
    write_manifest(out / "manifest.jsonl", entries)
    (out / "backend.json").write_text(spec.to_json() + "\n")
    return out / "manifest.jsonl"


def synthetic_logits(rng: np.random.Generator, words, vocab, confusion: float = 0.35) -> LogitMatrix:
    """Peaky CTC posteriors for ``words`` with a confusable neighbour per word.

    Each word gets 1-2 blank frames then 2-3 label frames. A share of the
    label mass goes to the next vocabulary entry, so prefix beam search
    produces genuinely different n-best candidates.
    """
    V = len(vocab)
    index = {w: i for i, w in enumerate(vocab)}
    rows = []

    def row(main, p_main, alt=None, p_alt=0.0):
        r = np.full(V + 1, 1e-3)
        r[main] += p_main
        if alt is not None:
            r[alt] += p_alt
        return r / r.sum()

    for w in words:
        for _ in range(int(rng.integers(1, 3))):
            rows.append(row(V, 0.9))
        i = index[w]
        alt = (i + 1) % V
        p_alt = float(rng.uniform(0.0, confusion))
        for _ in range(int(rng.integers(2, 4))):
            rows.append(row(i, 1.0 - p_alt, alt, p_alt))
    rows.append(row(V, 0.9))
    return LogitMatrix(np.array(rows), tuple(vocab))


def make_cascade_corpus(out_dir, n_utts: int, spec: SyntheticTranslatorSpec, seed: int = 0,
                        vocab_size: int = 20, min_words: int = 5, max_words: int = 14,
                        frame_ms: float = 40.0, beam: int = 8):
    """Write logit files, ``manifest.jsonl`` and ``backend.json``; returns the manifest path.

    References are the synthetic MT output on the offline ASR best path.
    """
    out = Path(out_dir)
    (out / "ctc").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    vocab = tuple(f"s{i:02d}" for i in range(vocab_size))
    translator = SyntheticTranslator(spec)
    entries = []
    for i in range(n_utts):
        words = [vocab[int(k)] for k in rng.integers(0, vocab_size, size=int(rng.integers(min_words, max_words + 1)))]
        logits = synthetic_logits(rng, words, vocab)
        rel = f"ctc/utt{i:04d}.logits"
        write_logits(out / rel, logits)
        best = ctc_prefix_beam_search(logits, beam, 1).transcripts[0]
        ref = detokenize(translator.translate(best).tokens)
        entries.append({"id": f"utt{i:04d}", "logits": rel, "frame_ms": frame_ms,
                        "reference": ref, "transcript": " ".join(words)})
    write_manifest(out / "manifest.jsonl", entries)
    (out / "backend.json").write_text(spec.to_json() + "\n")
    return out / "manifest.jsonl"
