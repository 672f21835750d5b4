import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ovlinf.audio import AudioBuffer, frame_signal, synth_utterance
from ovlinf.vad import (PauseIndex, VadConfig, VadMask, apply_hangover, find_pauses,
                        read_mask, run_vad, write_mask, write_pauses)


def M(flags):
    return VadMask.from_string(flags.replace("T", "1").replace("F", "0"), 0.01)


def test_find_pauses_examples():
    got = [(p.start_s, p.end_s) for p in find_pauses(M("FFFTTFFF"), 0.03)]
    assert got == [pytest.approx((0.0, 0.03)), pytest.approx((0.05, 0.08))]
    assert find_pauses(M("FFFTTFFF"), 0.05) == []
    assert find_pauses(M("TTTTTT"), 0.01) == []
    with pytest.raises(ValueError):
        find_pauses(M("FF"), 0)


def test_inversion_involution():
    m = M("FTTFFTFT")
    assert m.inverted().inverted() == m
    assert m.inverted() != m


runs = st.lists(st.tuples(st.booleans(), st.integers(1, 30)), min_size=1, max_size=30)


@given(runs, st.integers(1, 20), st.integers(1, 20))
@settings(max_examples=150)
def test_pause_properties(rs, k1, k2):
    flags = np.concatenate([np.full(n, v) for v, n in rs])
    mask = VadMask(flags, 0.01)
    d1, d2 = sorted((k1 * 0.01, k2 * 0.01))
    p1, p2 = find_pauses(mask, d1), find_pauses(mask, d2)
    assert set((p.start_s, p.end_s) for p in p2) <= set((p.start_s, p.end_s) for p in p1)
    for p in p1:
        a, b = int(round(p.start_s / 0.01)), int(round(p.end_s / 0.01))
        assert not flags[a:b].any()
        assert a == 0 or flags[a - 1]
        assert b == len(flags) or flags[b]
    assert all(x.end_s <= y.start_s for x, y in zip(p1, p1[1:]))


def test_hangover_fills_short_interior_gaps():
    s = np.array([1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0], bool)
    out = apply_hangover(s, 5)
    assert out.tolist() == [1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0]
    assert apply_hangover(s, 0).tolist() == s.tolist()


def _frame_truth(fs, words):
    c = np.arange(fs.n_frames) * fs.hop_s + fs.win_s / 2
    truth = np.zeros(fs.n_frames, bool)
    for w in words:
        truth |= (c >= w.start_s) & (c < w.end_s)
    edges = np.array([t for w in words for t in (w.start_s, w.end_s)])
    near = np.min(np.abs(c[:, None] - edges[None, :]), axis=1) <= 2 * fs.hop_s + fs.win_s / 2
    return truth, near


@pytest.mark.parametrize("mode", ["energy", "statistical"])
def test_fixture_boundaries(mode):
    audio, words = synth_utterance(3, 0.4, 0.2, 16000, 7)
    fs = frame_signal(audio, spectra=mode == "statistical")
    mask = run_vad(fs, VadConfig(mode))
    truth, near = _frame_truth(fs, words)
    assert np.array_equal(mask.speech[~near], truth[~near])


@pytest.mark.parametrize("seed", range(5))
def test_fixture_pause_recovery(seed):
    n = 12
    audio, words = synth_utterance(n, 0.3, 0.15, 16000, seed, pad_s=0.2)
    pauses = find_pauses(run_vad(frame_signal(audio)), 0.1)
    interior = [p for p in pauses if words[0].end_s <= p.start_s and p.end_s <= words[-1].start_s]
    assert len(interior) == n - 1
    for p, (a, b) in zip(interior, zip(words, words[1:])):
        assert a.end_s - 0.03 <= p.start_s and p.end_s <= b.start_s + 0.03
    assert abs(len(pauses) - (n - 1)) <= 2


def test_silence_and_empty():
    fs = frame_signal(AudioBuffer(np.zeros(8000), 16000))
    assert not run_vad(fs).speech.any()
    fs = frame_signal(AudioBuffer(np.zeros(10), 16000))
    assert len(run_vad(fs)) == 0


def test_speech_at_start_is_detected():
    audio, words = synth_utterance(5, 0.3, 0.2, 16000, 1)
    mask = run_vad(frame_signal(audio))
    assert mask.speech[:20].all()


def test_statistical_needs_spectra():
    audio, _ = synth_utterance(2, 0.3, 0.2, 16000, 1)
    with pytest.raises(ValueError):
        run_vad(frame_signal(audio), VadConfig("statistical"))


def test_statistical_on_noisy_audio():
    audio, words = synth_utterance(6, 0.3, 0.25, 16000, 2, pad_s=0.3)
    rng = np.random.default_rng(0)
    noisy = AudioBuffer(np.clip(audio.samples + 0.003 * rng.standard_normal(len(audio)), -1, 1),
                        16000)
    fs = frame_signal(noisy, spectra=True)
    mask = run_vad(fs, VadConfig("statistical"))
    truth, near = _frame_truth(fs, words)
    agree = np.mean(mask.speech[~near] == truth[~near])
    assert agree > 0.95


def test_io(tmp_path):
    m = M("FFTTF")
    write_mask(tmp_path / "m.txt", m)
    assert (tmp_path / "m.txt").read_text() == "0\n0\n1\n1\n0\n"
    assert read_mask(tmp_path / "m.txt", 0.01) == m
    write_pauses(tmp_path / "p.csv", find_pauses(m, 0.01))
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "start_s,end_s"
    idx = PauseIndex(m)
    assert idx(0.02) == find_pauses(m, 0.02)


def test_config_validation():
    with pytest.raises(ValueError):
        VadConfig("neural")
    with pytest.raises(ValueError):
        VadConfig(noise_init_frames=0)
    assert VadConfig().decision_threshold == 3.0
