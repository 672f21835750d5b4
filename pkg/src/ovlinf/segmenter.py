"""Segment planning: fixed overlapped chopping and VAD-guided boundary shifting."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

from .vad import Pause, PauseIndex, VadMask

EPS = 1e-9

PauseLookup = Callable[[float], Sequence[Pause]]


@dataclass(frozen=True)
class OverlapConfig:
    segment_len_s: float = 12.0
    overlap_pct: float = 0.0

    def __post_init__(self):
        if self.segment_len_s <= 0:
            raise ValueError("segment_len_s must be positive")
        if not 0 <= self.overlap_pct < 1:
            raise ValueError("overlap_pct must lie in [0, 1)")

    @property
    def hop_s(self) -> float:
        return self.segment_len_s * (1.0 - self.overlap_pct)

    @property
    def overlap_len_s(self) -> float:
        return self.segment_len_s * self.overlap_pct


@dataclass(frozen=True)
class VadoiConfig:
    initial_pause_s: float = 0.1
    min_pause_s: float = 0.01
    triple_word_threshold: float = 0.4

    def __post_init__(self):
        if not self.initial_pause_s >= self.min_pause_s > 0:
            raise ValueError("need initial_pause_s >= min_pause_s > 0")
        if not 0 < self.triple_word_threshold < 1:
            raise ValueError("triple_word_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class SegmentSpec:
    index: int
    start_s: float
    end_s: float
    start_shifted: bool = False
    end_shifted: bool = False
    # set when shifting produced an empty interval and was undone
    reverted: bool = False

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"bad segment interval [{self.start_s}, {self.end_s})")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def flags(self) -> str:
        s = ("S" if self.start_shifted else "-") + ("E" if self.end_shifted else "-")
        return s + ("R" if self.reverted else "")


@dataclass
class SegmentPlan:
    utterance_id: str
    duration_s: float
    specs: List[SegmentSpec]
    config: Dict = field(default_factory=dict)

    def __len__(self):
        return len(self.specs)

    def to_json(self) -> Dict:
        return {
            "utterance_id": self.utterance_id,
            "duration_s": self.duration_s,
            "config": self.config,
            "specs": [asdict(s) for s in self.specs],
        }

    @classmethod
    def from_json(cls, doc: Dict) -> "SegmentPlan":
        return cls(doc["utterance_id"], doc["duration_s"],
                   [SegmentSpec(**s) for s in doc["specs"]], doc.get("config", {}))

    def to_text(self) -> str:
        lines = ["# utterance_id=%s duration_s=%r config=%s"
                 % (self.utterance_id, self.duration_s, json.dumps(self.config, sort_keys=True))]
        for s in self.specs:
            lines.append(f"{s.index}\t{s.start_s!r}\t{s.end_s!r}\t{s.flags()}")
        return "\n".join(lines) + "\n"


def n_segments_closed_form(duration_s: float, cfg: OverlapConfig) -> int:
    return math.ceil(max(0.0, duration_s - cfg.segment_len_s) / cfg.hop_s - EPS) + 1


def plan_fixed(duration_s: float, cfg: OverlapConfig, utterance_id: str = "") -> SegmentPlan:
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    specs = []
    k = 0
    while True:
        start = k * cfg.hop_s
        end = start + cfg.segment_len_s
        last = end >= duration_s - EPS
        specs.append(SegmentSpec(k, start, duration_s if last else end))
        if last:
            break
        k += 1
    return SegmentPlan(utterance_id, duration_s, specs,
                       {"overlap": asdict(cfg), "vadoi": None})


def _search(boundary, direction, max_shift, pauses: PauseLookup, vcfg: VadoiConfig,
            limit=None):
    """Middle of the closest qualifying pause on one side, halving the
    required pause length until something is found or the floor is hit."""
    d = vcfg.initial_pause_s
    while d >= vcfg.min_pause_s - EPS:
        best = None
        for p in pauses(d):
            dist = boundary - p.mid_s if direction < 0 else p.mid_s - boundary
            if dist < 0 or dist >= max_shift:
                continue
            if limit is not None and p.mid_s >= limit:
                continue
            if best is None or dist < best[0]:
                best = (dist, p.mid_s)
        if best is not None:
            return best[1]
        d /= 2.0
    return None


def vadoi_shift(spec: SegmentSpec, prev_spec: Optional[SegmentSpec], pauses: PauseLookup,
                cfg: OverlapConfig, vcfg: VadoiConfig = VadoiConfig(),
                is_last: bool = False,
                next_spec: Optional[SegmentSpec] = None) -> SegmentSpec:
    """Move one segment's boundaries to the middles of nearby long-pauses.

    The end only ever moves left. The start moves right when the nominal
    overlap exceeds ``triple_word_threshold`` and left otherwise. Shifts are
    strictly shorter than half the overlap length. The first segment's start
    (``prev_spec is None``) and the last segment's end stay pinned. A
    right-moving start never passes ``next_spec``'s start.
    """
    max_shift = cfg.overlap_len_s / 2.0
    if max_shift <= 0:
        return spec
    start, end = spec.start_s, spec.end_s
    moved_start = moved_end = False
    if not is_last:
        mid = _search(spec.end_s, -1, max_shift, pauses, vcfg)
        if mid is not None:
            end, moved_end = mid, True
    if prev_spec is not None:
        direction = 1 if cfg.overlap_pct > vcfg.triple_word_threshold else -1
        limit = next_spec.start_s if (direction > 0 and next_spec is not None) else None
        mid = _search(spec.start_s, direction, max_shift, pauses, vcfg, limit)
        if mid is not None:
            start, moved_start = mid, True
    if not 0 <= start < end:
        return replace(spec, reverted=True)
    return replace(spec, start_s=start, end_s=end,
                   start_shifted=moved_start, end_shifted=moved_end)


def plan_vadoi(duration_s: float, mask: VadMask, cfg: OverlapConfig,
               vcfg: VadoiConfig = VadoiConfig(), utterance_id: str = "",
               pauses: Optional[PauseLookup] = None) -> SegmentPlan:
    base = plan_fixed(duration_s, cfg, utterance_id)
    lookup = pauses if pauses is not None else PauseIndex(mask)
    n = len(base.specs)
    shifted = []
    for k, spec in enumerate(base.specs):
        # neighbours keep their provisional boundaries; no re-chaining
        prev = base.specs[k - 1] if k > 0 else None
        nxt = base.specs[k + 1] if k + 1 < n else None
        shifted.append(vadoi_shift(spec, prev, lookup, cfg, vcfg,
                                   is_last=(k == n - 1), next_spec=nxt))
    return SegmentPlan(utterance_id, duration_s, shifted,
                       {"overlap": asdict(cfg), "vadoi": asdict(vcfg)})


def check_plan(plan: SegmentPlan, require_overlap: bool) -> None:
    """Raise AssertionError if the plan breaks coverage or ordering."""
    specs = plan.specs
    assert specs, "empty plan"
    assert abs(specs[0].start_s) <= EPS, "plan must start at 0"
    assert abs(specs[-1].end_s - plan.duration_s) <= EPS, "plan must end at duration"
    for a, b in zip(specs, specs[1:]):
        assert b.start_s > a.start_s, "starts must increase"
        if require_overlap:
            assert a.end_s - b.start_s > 0, f"no overlap between {a.index} and {b.index}"
        else:
            assert b.start_s <= a.end_s + EPS, f"gap between {a.index} and {b.index}"
