"""Input perturbations used to build the regularized batch.

Each transform is a pure function of the audio and explicit parameters.
:func:`sample_params` draws those parameters from a
:class:`RegularizerSpec` using a caller-supplied generator, and
:class:`Regularizer` bundles the two steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import AudioBuffer
from .errors import InvalidParam

KINDS = ("time_stretch", "time_shift", "volume", "noise", "mask", "identity")

# Short names used on the command line.
SHORT_NAMES = {
    "tst": "time_stretch",
    "tsh": "time_shift",
    "va": "volume",
    "na": "noise",
    "ma": "mask",
    "id": "identity",
}
_LONG_TO_SHORT = {v: k for k, v in SHORT_NAMES.items()}


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class RegularizerSpec:
    """Parameter ranges for one regularizer.

    Only the fields relevant to ``kind`` are used. Defaults are mild
    enough to leave a stable prefix intact.
    """

    kind: str
    speed_min: float = 0.9
    speed_max: float = 1.1
    shift_fraction_max: float = 0.05
    gain_exponent: float = math.log(2.0)
    noise_kind: str = "gaussian"
    amplitude: float = 0.005
    mask_fraction_max: float = 0.05

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParam(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "time_stretch" and not 0 < self.speed_min <= self.speed_max:
            raise InvalidParam("time_stretch needs 0 < speed_min <= speed_max")
        if self.kind == "time_shift" and not 0 < self.shift_fraction_max <= 0.5:
            raise InvalidParam("time_shift fraction must lie in (0, 0.5]")
        if self.kind == "volume" and not self.gain_exponent > 0:
            raise InvalidParam("volume gain exponent must be positive")
        if self.kind == "noise":
            if self.noise_kind not in ("uniform", "gaussian"):
                raise InvalidParam("noise kind must be 'uniform' or 'gaussian'")
            if not self.amplitude >= 0:
                raise InvalidParam("noise amplitude must be >= 0")
        if self.kind == "mask" and not 0 <= self.mask_fraction_max <= 0.5:
            raise InvalidParam("mask fraction must lie in [0, 0.5]")

    @classmethod
    def parse(cls, text: str) -> "RegularizerSpec":
        """Parse ``tst:0.9:1.1``, ``tsh:0.05``, ``va:0.69``, ``na:gaussian:0.005``, ``ma:0.05`` or ``id``."""
        parts = text.strip().split(":")
        name = parts[0].lower()
        kind = SHORT_NAMES.get(name, name)
        args = parts[1:]
        try:
            if kind == "time_stretch":
                if len(args) == 0:
                    return cls(kind)
                if len(args) != 2:
                    raise ValueError
                return cls(kind, speed_min=float(args[0]), speed_max=float(args[1]))
            if kind == "time_shift":
                return cls(kind, shift_fraction_max=float(args[0])) if args else cls(kind)
            if kind == "volume":
                return cls(kind, gain_exponent=float(args[0])) if args else cls(kind)
            if kind == "noise":
                if len(args) == 0:
                    return cls(kind)
                if len(args) == 1:
                    if args[0] in ("uniform", "gaussian"):
                        return cls(kind, noise_kind=args[0])
                    return cls(kind, amplitude=float(args[0]))
                if len(args) != 2:
                    raise ValueError
                return cls(kind, noise_kind=args[0], amplitude=float(args[1]))
            if kind == "mask":
                return cls(kind, mask_fraction_max=float(args[0])) if args else cls(kind)
            if kind == "identity" and not args:
                return cls(kind)
        except (ValueError, IndexError):
            pass
        raise InvalidParam(f"cannot parse regularizer spec {text!r}")

    def to_text(self) -> str:
        short = _LONG_TO_SHORT[self.kind]
        if self.kind == "time_stretch":
            return f"{short}:{self.speed_min:g}:{self.speed_max:g}"
        if self.kind == "time_shift":
            return f"{short}:{self.shift_fraction_max:g}"
        if self.kind == "volume":
            return f"{short}:{self.gain_exponent:g}"
        if self.kind == "noise":
            return f"{short}:{self.noise_kind}:{self.amplitude:g}"
        if self.kind == "mask":
            return f"{short}:{self.mask_fraction_max:g}"
        return short


def parse_regularizers(text: str) -> list[RegularizerSpec]:
    """Comma-separated list of regularizer specs; empty text gives an empty list."""
    return [RegularizerSpec.parse(p) for p in text.split(",") if p.strip()]


def time_stretch(audio: AudioBuffer, speed: float) -> AudioBuffer:
    """Resample by linear interpolation so playback runs ``speed`` times faster."""
    if not speed > 0:
        raise InvalidParam("speed must be positive")
    if speed == 1.0:
        return audio
    n = len(audio)
    if n == 0:
        return audio
    out_len = max(1, _round_half_up(n / speed))
    return audio.with_samples(_kernels.stretch_linear(audio.samples, float(speed), out_len))


def time_shift(audio: AudioBuffer, shift_samples: int) -> AudioBuffer:
    """Circular roll: sample ``k`` moves to ``(k + shift) mod len``."""
    if len(audio) == 0 or shift_samples % len(audio) == 0:
        return audio
    return audio.with_samples(np.roll(audio.samples, int(shift_samples)))


def volume_gain(audio: AudioBuffer, gain: float) -> AudioBuffer:
    if not gain > 0:
        raise InvalidParam("gain must be positive")
    if gain == 1.0:
        return audio
    return audio.with_samples(audio.samples * gain)


def add_noise(audio: AudioBuffer, kind: str, amplitude: float, rng: np.random.Generator) -> AudioBuffer:
    if amplitude < 0:
        raise InvalidParam("amplitude must be >= 0")
    if amplitude == 0:
        return audio
    n = len(audio)
    if kind == "uniform":
        z = rng.uniform(-1.0, 1.0, size=n)
    elif kind == "gaussian":
        z = rng.standard_normal(n)
    else:
        raise InvalidParam(f"unknown noise kind {kind!r}")
    return audio.with_samples(audio.samples + amplitude * z)


def time_mask(audio: AudioBuffer, start: int, width: int) -> AudioBuffer:
    """Zero the samples in ``[start, start + width)``."""
    if start < 0 or width < 0 or start + width > len(audio):
        raise InvalidParam(f"mask window [{start}, {start + width}) outside audio of length {len(audio)}")
    if width == 0:
        return audio
    out = audio.samples.copy()
    out[start:start + width] = 0.0
    return audio.with_samples(out)


def sample_params(spec: RegularizerSpec, rng: np.random.Generator, n_samples: int) -> dict:
    """Draw concrete parameters for one application of ``spec``.

    Integer parameters (shift, mask width) skip their identity value
    whenever the range allows something else, so every batch member
    actually differs from the original input.
    """
    kind = spec.kind
    if kind == "time_stretch":
        if spec.speed_min == spec.speed_max:
            return {"speed": float(spec.speed_min)}
        return {"speed": float(rng.uniform(spec.speed_min, spec.speed_max))}
    if kind == "time_shift":
        bound = _round_half_up(spec.shift_fraction_max * n_samples)
        if bound < 1:
            return {"shift_samples": 0}
        magnitude = int(rng.integers(1, bound + 1))
        sign = 1 if rng.random() < 0.5 else -1
        return {"shift_samples": sign * magnitude}
    if kind == "volume":
        u = rng.uniform(-spec.gain_exponent, spec.gain_exponent)
        return {"gain": float(math.exp(u))}
    if kind == "noise":
        return {"kind": spec.noise_kind, "amplitude": float(spec.amplitude)}
    if kind == "mask":
        bound = min(_round_half_up(spec.mask_fraction_max * n_samples), n_samples)
        if bound < 1:
            return {"start": 0, "width": 0}
        width = int(rng.integers(1, bound + 1))
        start = int(rng.integers(0, n_samples - width + 1))
        return {"start": start, "width": width}
    return {}


def apply(spec: RegularizerSpec, audio: AudioBuffer, params: dict, rng: np.random.Generator | None = None) -> AudioBuffer:
    kind = spec.kind
    if kind == "time_stretch":
        return time_stretch(audio, params["speed"])
    if kind == "time_shift":
        return time_shift(audio, params["shift_samples"])
    if kind == "volume":
        return volume_gain(audio, params["gain"])
    if kind == "noise":
        if rng is None:
            raise InvalidParam("noise needs a random generator")
        return add_noise(audio, params["kind"], params["amplitude"], rng)
    if kind == "mask":
        return time_mask(audio, params["start"], params["width"])
    return audio


class Regularizer:
    """A spec plus the sample-then-apply step; callable as ``reg(audio, rng)``."""

    def __init__(self, spec: RegularizerSpec | str):
        self.spec = RegularizerSpec.parse(spec) if isinstance(spec, str) else spec

    def __call__(self, audio: AudioBuffer, rng: np.random.Generator) -> AudioBuffer:
        params = sample_params(self.spec, rng, len(audio))
        return apply(self.spec, audio, params, rng)

    def __repr__(self):
        return f"Regularizer({self.spec.to_text()!r})"
