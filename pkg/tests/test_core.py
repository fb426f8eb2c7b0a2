import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ScriptedTranslator, make_audio
from simulpolicy.core import (
    AudioBuffer,
    EngineConfig,
    Hypothesis,
    StreamState,
    chunk_boundaries,
    consumed_ms,
    forced_decode,
    run_incremental,
)
from simulpolicy.errors import BackendFailure, EmptyInput, InvalidParam, PrefixViolation, SimulPolicyError
from simulpolicy.harness import SyntheticTranslator, SyntheticTranslatorSpec
from simulpolicy.policies import HoldN, LocalAgreement, PolicySpec, RegularizedBatch, build_policy


@pytest.mark.parametrize("n, ms, expected", [
    (16000, 250, [4000, 8000, 12000, 16000]),
    (10000, 250, [4000, 8000, 10000]),
    (100, 1000, [100]),
])
def test_chunk_boundaries_examples(n, ms, expected):
    assert chunk_boundaries(AudioBuffer(np.zeros(n), 16000), ms) == expected


def test_chunk_boundaries_empty():
    with pytest.raises(EmptyInput):
        chunk_boundaries(AudioBuffer(np.zeros(0), 16000), 250)


@given(st.integers(1, 50000), st.sampled_from([8000, 16000, 22050, 44100]), st.integers(50, 2000))
def test_chunk_boundaries_cover_input(n, rate, ms):
    b = chunk_boundaries(AudioBuffer(np.zeros(n), rate), ms)
    assert b[-1] == n
    assert all(x < y for x, y in zip(b, b[1:]))
    chunk = ms * rate // 1000
    assert all(y - x == chunk for x, y in zip([0] + b[:-2], b[:-1]))


def test_consumed_ms_exact():
    assert consumed_ms(4000, 16000) == 250.0
    assert consumed_ms(1, 3) == pytest.approx(1000 / 3)


def test_audio_buffer_rejects_bad_input():
    with pytest.raises(InvalidParam):
        AudioBuffer(np.array([0.0, np.nan]), 16000)
    with pytest.raises(InvalidParam):
        AudioBuffer(np.zeros(3), 0)
    buf = AudioBuffer([0.1, 0.2], 8000)
    with pytest.raises(ValueError):
        buf.samples[0] = 1.0


def test_hypothesis_validation():
    with pytest.raises(InvalidParam):
        Hypothesis(("a", ""))
    with pytest.raises(InvalidParam):
        Hypothesis(("a",), float("inf"))


def test_engine_config_bounds():
    with pytest.raises(InvalidParam):
        EngineConfig(10)
    with pytest.raises(InvalidParam):
        EngineConfig(500, seed=-1)
    EngineConfig(50)
    EngineConfig(10000)


def test_stream_state_finishes_once():
    s = StreamState()
    s.commit(["a"], 10.0, 1)
    s.finish()
    with pytest.raises(SimulPolicyError):
        s.finish()
    with pytest.raises(SimulPolicyError):
        s.commit(["b"], 20.0, 2)


def test_forced_decode_empty_prefix_and_forcing():
    t = ScriptedTranslator(lambda x: ("a", "c", "d"))
    assert forced_decode(t, make_audio(10), ()).tokens == ("a", "c", "d")
    assert forced_decode(t, make_audio(10), ("a", "b")).tokens[:2] == ("a", "b")


def test_forced_decode_violation_is_hard_error():
    class Bad:
        def translate(self, x, forced_prefix):
            return Hypothesis(("z",))

    with pytest.raises(PrefixViolation):
        forced_decode(Bad(), make_audio(10), ("a",))


def test_forced_decode_wraps_backend_errors():
    class Boom:
        def translate(self, x, forced_prefix):
            raise RuntimeError("gpu on fire")

    with pytest.raises(BackendFailure) as err:
        forced_decode(Boom(), make_audio(10), ())
    assert "gpu on fire" in err.value.diagnostics


def test_fixed_output_hold0_commits_everything_at_first_chunk():
    t = ScriptedTranslator(lambda x: ("a", "b", "c"))
    res = run_incremental(t, make_audio(8000), HoldN(0), EngineConfig(250))
    assert res.tokens == ("a", "b", "c")
    assert {r.consumed_ms for r in res.committed} == {250.0}
    assert {r.chunk_index for r in res.committed} == {1}


def test_la2_first_commit_at_chunk_two():
    # i tokens after i chunks, stable prefixes
    t = ScriptedTranslator(lambda x: tuple(f"t{j}" for j in range(len(x) // 4000)))
    res = run_incremental(t, make_audio(12000), LocalAgreement(2), EngineConfig(250))
    first = res.committed[0]
    assert first.chunk_index == 2 and first.token == "t0"
    assert first.consumed_ms == 500.0


@pytest.mark.parametrize("policy", [HoldN(0), HoldN(3), LocalAgreement(2), LocalAgreement(4)])
def test_finalization_commits_whole_hypothesis(policy):
    t = SyntheticTranslator(unstable_suffix_len=2)
    audio = make_audio(16000 * 3)
    res = run_incremental(t, audio, policy, EngineConfig(500))
    assert res.tokens == res.final_hypothesis
    assert res.committed[-1].consumed_ms == 3000.0


def test_no_finalization_leaves_tail():
    t = SyntheticTranslator(unstable_suffix_len=2)
    res = run_incremental(t, make_audio(16000 * 3), HoldN(2), EngineConfig(500, finalize_on_last_chunk=False))
    assert len(res.tokens) == len(res.final_hypothesis) - 2


def _policies():
    return [
        HoldN(0), HoldN(2), LocalAgreement(2), LocalAgreement(3),
        RegularizedBatch(["na:gaussian:0.005"]), RegularizedBatch(["va:0.69", "tsh:0.05"]),
    ]


@pytest.mark.parametrize("idx", range(6))
def test_decode_count_matches_chunks(idx):
    policy = _policies()[idx]
    t = SyntheticTranslator(unstable_suffix_len=2)
    res = run_incremental(t, make_audio(16000 * 2 + 123), policy, EngineConfig(250))
    assert res.num_chunks == 9
    assert res.decode_calls == t.calls == 9 * policy.decodes_per_chunk


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8000), st.sampled_from(range(6)), st.integers(50, 600), st.integers(0, 3))
def test_prefix_stability_and_delay_monotonicity(n, idx, ms, k):
    policy = _policies()[idx]
    t = SyntheticTranslator(unstable_suffix_len=k, unit_ms=100)
    res = run_incremental(t, make_audio(n, rate=8000), policy, EngineConfig(ms, finalize_on_last_chunk=False))
    # committed records carry chunk indices; rebuilding after each chunk must nest
    prev = ()
    for i in range(1, res.num_chunks + 1):
        cur = tuple(r.token for r in res.committed if r.chunk_index <= i)
        assert cur[:len(prev)] == prev
        prev = cur
    d = [r.consumed_ms for r in res.committed]
    assert d == sorted(d)


def test_run_is_deterministic():
    spec = PolicySpec("r_bi", regularizer_specs=("tst:0.9:1.1", "na:gaussian:0.005"))
    audio = make_audio(16000 * 2)

    def once():
        t = SyntheticTranslator(unstable_suffix_len=2)
        return run_incremental(t, audio, build_policy(spec), EngineConfig(250, seed=9), rng=np.random.default_rng(9))

    a, b = once(), once()
    assert a.committed == b.committed and a.final_hypothesis == b.final_hypothesis


def test_synthetic_same_input_twice_identical():
    t = SyntheticTranslator(SyntheticTranslatorSpec(unstable_suffix_len=2, seed=3))
    x = make_audio(8000)
    assert t.translate(x, ()) == t.translate(x, ())
