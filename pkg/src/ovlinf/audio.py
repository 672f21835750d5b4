"""Audio ingestion, framing and synthetic fixtures."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile
from scipy.signal import butter, sosfilt

ENERGY_EPS = 1e-10
DEFAULT_WIN_S = 0.025
DEFAULT_HOP_S = 0.010


@dataclass(frozen=True)
class Word:
    token: str
    start_s: float
    end_s: float

    @property
    def mid_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono samples only")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"invalid sample rate {self.sample_rate!r}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise ValueError("samples must lie in [-1, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return (self.sample_rate == other.sample_rate
                and np.array_equal(self.samples, other.samples))

    def slice(self, start_s: float, end_s: float) -> "AudioBuffer":
        a = max(0, int(round(start_s * self.sample_rate)))
        b = min(len(self.samples), int(round(end_s * self.sample_rate)))
        return AudioBuffer(self.samples[a:max(a, b)], self.sample_rate)


@dataclass(frozen=True, eq=False)
class FrameSeries:
    frame_energy: np.ndarray
    hop_s: float
    win_s: float
    # (n_frames, n_bins) power spectra; only filled when requested
    power_spectra: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_frames(self) -> int:
        return len(self.frame_energy)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return np.clip(data.astype(np.float64), -1.0, 1.0)
    raise ValueError(f"unsupported PCM sample type {data.dtype}")


def load_audio(path) -> AudioBuffer:
    """Read a RIFF/WAVE file into a mono buffer normalized to [-1, 1].

    Multi-channel input is down-mixed by averaging channels.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        sr, data = wavfile.read(path)
    except ValueError as exc:
        raise ValueError(f"{path}: unsupported encoding ({exc})") from exc
    samples = _to_float(np.asarray(data))
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise ValueError(f"{path}: zero-length audio stream")
    return AudioBuffer(samples, sr)


def save_audio(path, audio: AudioBuffer, sample_format: str = "int16") -> None:
    if sample_format == "int16":
        data = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype(np.int16)
    elif sample_format == "float32":
        data = audio.samples.astype(np.float32)
    else:
        raise ValueError(f"unknown sample format {sample_format!r}")
    target = path if hasattr(path, "write") else os.fspath(path)
    wavfile.write(target, audio.sample_rate, data)


def wav_bytes(audio: AudioBuffer, sample_format: str = "int16") -> bytes:
    import io
    buf = io.BytesIO()
    save_audio(buf, audio, sample_format)
    return buf.getvalue()


def frame_signal(audio: AudioBuffer, win_s: float = DEFAULT_WIN_S,
                 hop_s: float = DEFAULT_HOP_S, spectra: bool = False) -> FrameSeries:
    """Split audio into overlapping frames and compute per-frame log-energy.

    Frame i covers samples [i*hop, i*hop + win). Audio shorter than one
    window yields an empty series. With ``spectra`` the per-frame power
    spectra of the Hann-windowed frames are kept as well.
    """
    if not (win_s >= hop_s > 0):
        raise ValueError("need win_s >= hop_s > 0")
    win_n = int(round(win_s * audio.sample_rate))
    hop_n = int(round(hop_s * audio.sample_rate))
    if hop_n < 1:
        raise ValueError("hop shorter than one sample")
    x = audio.samples
    if len(x) < win_n:
        empty = np.zeros((0, win_n // 2 + 1)) if spectra else None
        return FrameSeries(np.zeros(0), hop_s, win_s, empty)
    frames = sliding_window_view(x, win_n)[::hop_n]
    energy = np.log(ENERGY_EPS + np.mean(frames ** 2, axis=1))
    power = None
    if spectra:
        power = np.abs(np.fft.rfft(frames * np.hanning(win_n), axis=1)) ** 2
    return FrameSeries(energy, hop_s, win_s, power)


def _band_noise(rng, n, sample_rate, amplitude):
    hi = min(3400.0, 0.45 * sample_rate)
    lo = min(300.0, 0.5 * hi)
    sos = butter(4, [lo, hi], btype="band", fs=sample_rate, output="sos")
    burst = sosfilt(sos, rng.standard_normal(n))
    peak = np.max(np.abs(burst))
    return burst * (amplitude / peak) if peak > 0 else burst


def synth_utterance(word_count: int, word_dur_s: float, gap_s: float,
                    sample_rate: int = 16000, seed: int = 0,
                    pad_s: float = 0.0,
                    amplitude: float = 0.3) -> Tuple[AudioBuffer, List[Word]]:
    """Noise bursts standing in for words, separated by digital silence.

    Word k (1-based) is the token ``w<k>``. ``pad_s`` adds silence before
    the first and after the last burst.
    """
    if word_count < 1:
        raise ValueError("word_count must be >= 1")
    if word_dur_s <= 0 or gap_s <= 0 or pad_s < 0:
        raise ValueError("durations must be positive")
    rng = np.random.default_rng(seed)
    total_s = 2 * pad_s + word_count * word_dur_s + (word_count - 1) * gap_s
    samples = np.zeros(int(round(total_s * sample_rate)))
    words = []
    for k in range(word_count):
        start = pad_s + k * (word_dur_s + gap_s)
        end = start + word_dur_s
        a = int(round(start * sample_rate))
        b = int(round(end * sample_rate))
        samples[a:b] = _band_noise(rng, b - a, sample_rate, amplitude)
        words.append(Word(f"w{k + 1}", start, end))
    return AudioBuffer(samples, sample_rate), words
