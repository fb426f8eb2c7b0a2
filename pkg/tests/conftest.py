import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from simulpolicy.core import AudioBuffer, Hypothesis  # noqa: E402


class ScriptedTranslator:
    """Returns ``forced + script(n_samples)[len(forced):]``; records every call."""

    concurrency_safe = False

    def __init__(self, script):
        self.script = script
        self.calls = []

    def translate(self, x, forced_prefix=()):
        self.calls.append((len(x), tuple(forced_prefix)))
        natural = tuple(self.script(x))
        forced = tuple(forced_prefix)
        return Hypothesis(forced + natural[len(forced):])


@pytest.fixture
def scripted():
    return ScriptedTranslator


def make_audio(n, rate=16000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, n)
    x[x == 0] = 0.1
    return AudioBuffer(x, rate)


@pytest.fixture
def audio():
    return make_audio
