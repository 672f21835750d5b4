"""Frame-level voice activity detection and long-pause extraction.

Both detectors are causal trackers of a noise estimate. Because masks are
computed over whole utterances, each detector is run forward and over the
time-reversed frames and a frame counts as speech if either pass says so;
this keeps utterances that open with speech from poisoning the initial
noise estimate. The statistical detector goes further and seeds its noise
spectrum from the quietest frames of the whole utterance.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from typing import List

import numpy as np

from .audio import FrameSeries

ENERGY_FLOOR_FACTOR = 0.999
SNR_SMOOTHING = 0.98
NOISE_SMOOTHING = 0.98
PSD_EPS = 1e-10


@dataclass(frozen=True)
class VadConfig:
    mode: str = "energy"
    noise_init_frames: int = 10
    # nats above the noise floor (energy) or mean log-LR (statistical);
    # None picks the per-mode default
    threshold: float | None = None
    hangover_frames: int = 5

    def __post_init__(self):
        if self.mode not in ("energy", "statistical"):
            raise ValueError(f"unknown VAD mode {self.mode!r}")
        if self.noise_init_frames < 1:
            raise ValueError("noise_init_frames must be >= 1")
        if self.hangover_frames < 0:
            raise ValueError("hangover_frames must be >= 0")

    @property
    def decision_threshold(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return 3.0 if self.mode == "energy" else 0.15


@dataclass(frozen=True, eq=False)
class VadMask:
    speech: np.ndarray
    hop_s: float

    def __post_init__(self):
        if self.hop_s <= 0:
            raise ValueError("hop_s must be positive")
        speech = np.asarray(self.speech, dtype=bool)
        speech.setflags(write=False)
        object.__setattr__(self, "speech", speech)

    def __len__(self):
        return len(self.speech)

    def __eq__(self, other):
        if not isinstance(other, VadMask):
            return NotImplemented
        return self.hop_s == other.hop_s and np.array_equal(self.speech, other.speech)

    def __hash__(self):
        return hash((self.hop_s, self.speech.tobytes()))

    def inverted(self) -> "VadMask":
        return VadMask(~self.speech, self.hop_s)

    @classmethod
    def from_string(cls, flags: str, hop_s: float) -> "VadMask":
        """Build from a string such as ``"FFTT"`` or ``"0011"``."""
        return cls(np.array([c in "T1" for c in flags]), hop_s)


@dataclass(frozen=True)
class Pause:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError("pause must have positive length")

    @property
    def mid_s(self) -> float:
        return 0.5 * (self.start_s + self.end_s)

    @property
    def dur_s(self) -> float:
        return self.end_s - self.start_s


def _energy_pass(energy, n_init, thr):
    floor = float(np.mean(energy[:n_init]))
    out = np.zeros(len(energy), dtype=bool)
    for t, e in enumerate(energy):
        out[t] = e > floor + thr
        if e < floor:
            floor = e
        else:
            floor = ENERGY_FLOOR_FACTOR * floor + (1.0 - ENERGY_FLOOR_FACTOR) * e
    return out


def _initial_noise(power, n_init):
    """Mean spectrum of the ``n_init`` quietest frames of the utterance."""
    quiet = np.argsort(power.sum(axis=1), kind="stable")[:n_init]
    return np.mean(power[np.sort(quiet)], axis=0) + PSD_EPS


def _statistical_pass(power, noise, thr):
    # Gaussian LRT with decision-directed a-priori SNR
    noise = noise.copy()
    out = np.zeros(len(power), dtype=bool)
    prev_gain_sq = None
    prev_post = None
    for t, px in enumerate(power):
        post = px / noise
        if prev_post is None:
            prio = SNR_SMOOTHING + (1 - SNR_SMOOTHING) * np.maximum(post - 1, 0)
        else:
            prio = (SNR_SMOOTHING * prev_gain_sq * prev_post
                    + (1 - SNR_SMOOTHING) * np.maximum(post - 1, 0))
        llr = post * prio / (1 + prio) - np.log1p(prio)
        out[t] = float(np.mean(llr)) > thr
        if not out[t]:
            noise = NOISE_SMOOTHING * noise + (1 - NOISE_SMOOTHING) * (px + PSD_EPS)
        prev_gain_sq = (prio / (1 + prio)) ** 2
        prev_post = post
    return out


def apply_hangover(speech: np.ndarray, hangover_frames: int) -> np.ndarray:
    """Fill non-speech runs shorter than ``hangover_frames`` flanked by speech."""
    speech = np.array(speech, dtype=bool)
    n = len(speech)
    t = 0
    while t < n:
        if speech[t]:
            t += 1
            continue
        run_end = t
        while run_end < n and not speech[run_end]:
            run_end += 1
        if t > 0 and run_end < n and run_end - t < hangover_frames:
            speech[t:run_end] = True
        t = run_end
    return speech


def run_vad(frames: FrameSeries, cfg: VadConfig = VadConfig()) -> VadMask:
    if frames.n_frames == 0:
        return VadMask(np.zeros(0, dtype=bool), frames.hop_s)
    thr = cfg.decision_threshold
    if cfg.mode == "energy":
        e = np.asarray(frames.frame_energy, dtype=np.float64)
        fwd = _energy_pass(e, cfg.noise_init_frames, thr)
        bwd = _energy_pass(e[::-1], cfg.noise_init_frames, thr)[::-1]
    else:
        if frames.power_spectra is None:
            raise ValueError("statistical VAD needs frames computed with spectra=True")
        p = np.asarray(frames.power_spectra, dtype=np.float64)
        noise = _initial_noise(p, cfg.noise_init_frames)
        fwd = _statistical_pass(p, noise, thr)
        bwd = _statistical_pass(p[::-1], noise, thr)[::-1]
    speech = apply_hangover(fwd | bwd, cfg.hangover_frames)
    return VadMask(speech, frames.hop_s)


def find_pauses(mask: VadMask, min_dur_s: float) -> List[Pause]:
    """Maximal non-speech runs lasting at least ``min_dur_s``, in time order."""
    if min_dur_s <= 0:
        raise ValueError("min_dur_s must be positive")
    pauses = []
    speech = mask.speech
    n = len(speech)
    t = 0
    while t < n:
        if speech[t]:
            t += 1
            continue
        end = t
        while end < n and not speech[end]:
            end += 1
        # small slack so that e.g. 3 frames of 0.01 s satisfy 0.03 s
        if (end - t) * mask.hop_s >= min_dur_s - 1e-9:
            pauses.append(Pause(t * mask.hop_s, end * mask.hop_s))
        t = end
    return pauses


class PauseIndex:
    """Cached ``find_pauses`` lookups over a single utterance mask."""

    def __init__(self, mask: VadMask):
        self.mask = mask
        self._lookup = lru_cache(maxsize=None)(lambda d: tuple(find_pauses(mask, d)))

    def __call__(self, min_dur_s: float) -> List[Pause]:
        return list(self._lookup(float(min_dur_s)))


def write_mask(path, mask: VadMask) -> None:
    with open(path, "w") as f:
        for flag in mask.speech:
            f.write("1\n" if flag else "0\n")


def read_mask(path, hop_s: float) -> VadMask:
    with open(path) as f:
        return VadMask(np.array([line.strip() == "1" for line in f if line.strip()]), hop_s)


def write_pauses(path, pauses: List[Pause]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["start_s", "end_s"])
        for p in pauses:
            w.writerow([repr(p.start_s), repr(p.end_s)])
