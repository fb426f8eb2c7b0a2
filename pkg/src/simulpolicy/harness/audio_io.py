"""16-bit PCM mono WAV reading and writing (stdlib ``wave``)."""

from __future__ import annotations

import wave

import numpy as np

from ..core import AudioBuffer
from ..errors import UnsupportedWav


def read_wav(path) -> AudioBuffer:
    """Read a mono 16-bit PCM WAV; samples are scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            nframes = wf.getnframes()
            raw = wf.readframes(nframes)
    except wave.Error as exc:
        raise UnsupportedWav(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise UnsupportedWav(f"{path}: truncated header") from exc
    except OSError as exc:
        raise UnsupportedWav(f"{path}: {exc}") from exc
    if channels != 1:
        raise UnsupportedWav(f"{path}: {channels} channels, only mono is supported")
    if width != 2:
        raise UnsupportedWav(f"{path}: {8 * width}-bit samples, only 16-bit PCM is supported")
    if rate <= 0:
        raise UnsupportedWav(f"{path}: invalid sample rate {rate}")
    if len(raw) != 2 * nframes:
        raise UnsupportedWav(f"{path}: header announces {nframes} frames but data holds {len(raw) // 2}")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write ``audio`` as 16-bit PCM; values are clipped to the int16 range."""
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate_hz)
        wf.writeframes(pcm.tobytes())
