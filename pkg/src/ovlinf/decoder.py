"""Per-segment decoding backends.

``MockBackend`` replays reference words and simulates what happens to
words cut by a segment boundary. ``ExternalBackend`` ships the segment's
audio as a WAVE body to a subprocess (stdin/stdout) or an HTTP endpoint
and expects one JSON object back::

    {"words": [...], "start_s": [...], "end_s": [...]}

with times relative to the segment start.
"""
from __future__ import annotations

import json
import subprocess
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .aligner import Hypothesis
from .audio import AudioBuffer, Word, wav_bytes
from .segmenter import SegmentPlan, SegmentSpec

CORRUPTION_MODES = ("substitute_similar", "truncate", "drop")
_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"


class DecodeError(RuntimeError):
    def __init__(self, segment_index: int, message: str):
        super().__init__(f"segment {segment_index}: {message}")
        self.segment_index = segment_index
        self.message = message


@dataclass(frozen=True)
class MockCorruption:
    boundary_margin_s: float = 0.1
    p_corrupt: float = 0.0
    mode: str = "truncate"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p_corrupt <= 1:
            raise ValueError("p_corrupt must lie in [0, 1]")
        if self.boundary_margin_s < 0:
            raise ValueError("boundary_margin_s must be non-negative")
        if self.mode not in CORRUPTION_MODES:
            raise ValueError(f"unknown corruption mode {self.mode!r}")


def _segment_rng(segment: SegmentSpec, seed: int):
    key = [seed, segment.index, int(round(segment.start_s * 1e6)),
           int(round(segment.end_s * 1e6))]
    return np.random.default_rng(key)


def _substitute(token: str, rng) -> str:
    if not token:
        return token
    pos = int(rng.integers(len(token)))
    choices = [c for c in _ALPHABET if c != token[pos]]
    return token[:pos] + choices[int(rng.integers(len(choices)))] + token[pos + 1:]


def _truncate(w: Word, s: float, e: float) -> str:
    span = w.end_s - w.start_s
    inside = max(0.0, min(w.end_s, e) - max(w.start_s, s))
    keep = int(round(len(w.token) * inside / span)) if span > 0 else len(w.token)
    if keep >= len(w.token):
        return w.token
    if w.start_s < s and w.end_s > e:
        lo = (len(w.token) - keep) // 2
        return w.token[lo:lo + keep]
    return w.token[-keep:] if (keep and w.start_s < s) else w.token[:keep]


def mock_decode(segment: SegmentSpec, reference: Sequence[Word],
                corruption: MockCorruption = MockCorruption(),
                duration_s: Optional[float] = None) -> Hypothesis:
    """Emit reference words whose midpoint falls inside the segment.

    A segment edge counts as a cut unless it is the utterance start (0) or
    ``duration_s``. Words intersecting ``cut +/- boundary_margin_s`` are
    corrupted with probability ``p_corrupt``. In truncate mode a corrupted
    word crossing the edge is emitted as its in-segment character share,
    even when its midpoint lies outside.
    """
    s, e = segment.start_s, segment.end_s
    m = corruption.boundary_margin_s
    cuts = []
    if s > 0:
        cuts.append(s)
    if duration_s is None or e < duration_s:
        cuts.append(e)
    rng = _segment_rng(segment, corruption.seed)
    words, times = [], []
    for w in reference:
        if w.end_s <= s or w.start_s >= e:
            continue
        inside = s <= w.mid_s < e
        eligible = any(w.start_s <= c + m and w.end_s >= c - m for c in cuts)
        token = w.token if inside else None
        if eligible and corruption.p_corrupt > 0 and rng.random() < corruption.p_corrupt:
            if corruption.mode == "truncate":
                token = _truncate(w, s, e) or None
            elif corruption.mode == "drop":
                token = None
            elif inside:
                token = _substitute(w.token, rng)
        if token is None:
            continue
        words.append(token)
        times.append((max(w.start_s, s), min(w.end_s, e)))
    return Hypothesis(tuple(words), tuple(times), segment.index, (s, e))


@dataclass
class MockBackend:
    corruption: MockCorruption = field(default_factory=MockCorruption)
    emits_timestamps = True
    deterministic = True

    def decode(self, segment: SegmentSpec, source) -> Hypothesis:
        """``source`` is ``(reference_words, duration_s)``."""
        reference, duration_s = source
        return mock_decode(segment, reference, self.corruption, duration_s)


@dataclass
class ExternalBackend:
    command: Optional[List[str]] = None
    url: Optional[str] = None
    timeout_s: float = 30.0
    sample_format: str = "int16"
    emits_timestamps = True
    deterministic = True

    def __post_init__(self):
        if (self.command is None) == (self.url is None):
            raise ValueError("configure exactly one of command or url")

    def _request(self, segment: SegmentSpec, body: bytes) -> bytes:
        if self.command is not None:
            try:
                proc = subprocess.run(self.command, input=body, capture_output=True,
                                      timeout=self.timeout_s)
            except subprocess.TimeoutExpired:
                raise DecodeError(segment.index, f"timed out after {self.timeout_s} s")
            except OSError as exc:
                raise DecodeError(segment.index, f"cannot start backend: {exc}")
            if proc.returncode != 0:
                err = proc.stderr.decode(errors="replace").strip()
                raise DecodeError(segment.index, f"backend exited {proc.returncode}: {err}")
            return proc.stdout
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "audio/wav"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                return resp.read()
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise DecodeError(segment.index, f"HTTP request failed: {exc}")

    def decode(self, segment: SegmentSpec, source: AudioBuffer) -> Hypothesis:
        return external_decode(segment, source, self)


def parse_response(segment: SegmentSpec, raw: bytes) -> Hypothesis:
    try:
        doc = json.loads(raw)
        words = doc["words"]
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            raise ValueError("'words' must be a list of strings")
    except (ValueError, KeyError, TypeError) as exc:
        raise DecodeError(segment.index, f"malformed response: {exc}")
    times = None
    starts, ends = doc.get("start_s"), doc.get("end_s")
    if starts is not None and ends is not None:
        if not (len(starts) == len(ends) == len(words)):
            raise DecodeError(segment.index, "malformed response: time arrays misaligned")
        off = segment.start_s
        times = tuple((off + float(a), off + float(b)) for a, b in zip(starts, ends))
    return Hypothesis(tuple(words), times, segment.index, (segment.start_s, segment.end_s))


def external_decode(segment: SegmentSpec, audio: AudioBuffer,
                    backend: ExternalBackend) -> Hypothesis:
    body = wav_bytes(audio.slice(segment.start_s, segment.end_s), backend.sample_format)
    return parse_response(segment, backend._request(segment, body))


@dataclass
class DecodeResult:
    hypotheses: List[Hypothesis]
    errors: Dict[int, str]
    segment_wall_s: Dict[int, float]
    n_segments: int

    @property
    def ok(self) -> bool:
        return not self.errors


def decode_plan(plan: SegmentPlan, source, backend, max_parallel: int = 1) -> DecodeResult:
    """Decode every segment; results come back in index order."""
    if max_parallel < 1:
        raise ValueError("max_parallel must be >= 1")

    def one(spec):
        t0 = time.perf_counter()
        try:
            return spec.index, backend.decode(spec, source), None, time.perf_counter() - t0
        except DecodeError as exc:
            return spec.index, None, exc.message, time.perf_counter() - t0

    if max_parallel == 1:
        results = [one(s) for s in plan.specs]
    else:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            results = list(pool.map(one, plan.specs))
    results.sort(key=lambda r: r[0])
    hyps = [h for _, h, _, _ in results if h is not None]
    errors = {i: err for i, _, err, _ in results if err is not None}
    walls = {i: t for i, _, _, t in results}
    return DecodeResult(hyps, errors, walls, len(plan.specs))
