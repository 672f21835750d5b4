"""Pairwise alignment of consecutive segment hypotheses and stitching.

Alignment treats the earlier segment as reference and the later one as
prediction. Two margin policies are supported:

* ``OI``: every deletion and insertion is paid.
* ``POI``: deletions before the first consumed token of ``next`` are free
  (that audio precedes the shared region) as are insertions after the last
  token of ``prev`` (that audio follows it).

With ``unit="char"`` both hypotheses are exploded into characters with a
space as word separator; stitched output is re-split into words, so
hybrid words can appear.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

SEPARATOR = " "
FALLBACK_WINDOW_WORDS = 50

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


@dataclass(frozen=True)
class Hypothesis:
    words: Tuple[str, ...]
    times: Optional[Tuple[Tuple[float, float], ...]] = None
    segment_index: int = 0
    # [start_s, end_s) of the decoded segment in utterance time
    span: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if self.times is not None:
            times = tuple((float(s), float(e)) for s, e in self.times)
            if len(times) != len(self.words):
                raise ValueError("times must align with words")
            object.__setattr__(self, "times", times)
        if self.span is not None:
            object.__setattr__(self, "span", (float(self.span[0]), float(self.span[1])))

    def __len__(self):
        return len(self.words)

    def to_json(self) -> Dict:
        return {"segment_index": self.segment_index, "words": list(self.words),
                "times": None if self.times is None else [list(t) for t in self.times],
                "span": None if self.span is None else list(self.span)}

    @classmethod
    def from_json(cls, doc: Dict) -> "Hypothesis":
        times = doc.get("times")
        span = doc.get("span")
        return cls(tuple(doc["words"]),
                   None if times is None else tuple(tuple(t) for t in times),
                   doc.get("segment_index", 0),
                   None if span is None else tuple(span))


@dataclass(frozen=True)
class AlignCosts:
    w_del: float = 1.0
    w_ins: float = 1.0
    w_sub: float = 1.0
    w_match: float = 0.0
    margin_policy: str = "OI"
    unit: str = "word"
    soft_match: bool = False

    def __post_init__(self):
        if not self.w_sub > self.w_match:
            raise ValueError("w_sub must exceed w_match")
        if self.w_del < 0 or self.w_ins < 0:
            raise ValueError("deletion and insertion costs must be non-negative")
        if self.margin_policy not in ("OI", "POI"):
            raise ValueError(f"unknown margin policy {self.margin_policy!r}")
        if self.unit not in ("word", "char"):
            raise ValueError(f"unknown alignment unit {self.unit!r}")

    @classmethod
    def preset(cls, name: str, **overrides) -> "AlignCosts":
        name = name.lower()
        if name == "oi":
            base = dict(w_del=1.0, w_ins=1.0, w_sub=1.0, w_match=0.0, margin_policy="OI")
        elif name == "poi":
            base = dict(w_del=2.0, w_ins=2.0, w_sub=1.0, w_match=-2.0, margin_policy="POI")
        else:
            raise ValueError(f"unknown preset {name!r}")
        base.update(overrides)
        return cls(**base)


class Op(NamedTuple):
    kind: str
    i: Optional[int]
    j: Optional[int]
    cost: float
    margin: bool = False


@dataclass
class AlignmentPath:
    ops: List[Op]
    total_cost: float
    costs: AlignCosts

    @property
    def margin_free_ops(self) -> List[int]:
        return [k for k, op in enumerate(self.ops) if op.margin]

    def count(self, kind: str) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    def to_json(self) -> Dict:
        return {"total_cost": self.total_cost,
                "ops": [[op.kind, op.i, op.j, op.cost, op.margin] for op in self.ops]}


@dataclass
class StitchResult:
    words: List[str]
    times: Optional[List[Tuple[float, float]]]
    switch_op_index: Optional[int]
    diagnostics: Dict[str, int] = field(default_factory=dict)

    def to_json(self) -> Dict:
        return {"words": self.words, "switch_op_index": self.switch_op_index,
                "diagnostics": self.diagnostics}


@lru_cache(maxsize=65536)
def _levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer_word(a: str, b: str) -> float:
    """Character edit distance normalized by the longer token, in [0, 1].

    An empty token counts as length 1 when normalizing, so
    ``cer_word("", "abc") == 1.0``.
    """
    if a == b:
        return 0.0
    return _levenshtein(a, b) / max(len(a), len(b), 1)


def sub_cost(a: str, b: str, costs: AlignCosts) -> float:
    if not costs.soft_match:
        return costs.w_match if a == b else costs.w_sub
    return cer_word(a, b) * (costs.w_sub - costs.w_match) + costs.w_match


def _explode(hyp: Hypothesis, unit: str):
    """Alignment units and, per unit, the index of the word it came from."""
    if unit == "word":
        return list(hyp.words), list(range(len(hyp.words)))
    units, owners = [], []
    for k, w in enumerate(hyp.words):
        if k:
            units.append(SEPARATOR)
            owners.append(None)
        units.extend(w)
        owners.extend([k] * len(w))
    return units, owners


def align_units(a: Sequence[str], b: Sequence[str], costs: AlignCosts) -> AlignmentPath:
    """DP alignment over already-exploded unit sequences."""
    m, n = len(a), len(b)
    poi = costs.margin_policy == "POI"
    w_del, w_ins = costs.w_del, costs.w_ins
    S = [[sub_cost(x, y, costs) for y in b] for x in a]
    D = [[0.0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        D[i][0] = 0.0 if poi else D[i - 1][0] + w_del
    row0 = D[0]
    for j in range(1, n + 1):
        row0[j] = row0[j - 1] + w_ins
    for i in range(1, m + 1):
        up, cur, si = D[i - 1], D[i], S[i - 1]
        for j in range(1, n + 1):
            best = up[j - 1] + si[j - 1]
            c = up[j] + w_del
            if c < best:
                best = c
            c = cur[j - 1] + w_ins
            if c < best:
                best = c
            cur[j] = best

    end_j = n
    if poi:
        last = D[m]
        end_j = min(range(n + 1), key=lambda j: (last[j], j))
    ops: List[Op] = [Op(INS, None, j, 0.0, True) for j in range(n - 1, end_j - 1, -1)]
    i, j = m, end_j
    while i > 0 or j > 0:
        if i > 0 and j > 0 and D[i][j] == D[i - 1][j - 1] + S[i - 1][j - 1]:
            kind = MATCH if a[i - 1] == b[j - 1] else SUB
            ops.append(Op(kind, i - 1, j - 1, S[i - 1][j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j == 0:
            ops.append(Op(DEL, i - 1, None, 0.0 if poi else w_del, poi))
            i -= 1
        elif i > 0 and D[i][j] == D[i - 1][j] + w_del:
            ops.append(Op(DEL, i - 1, None, w_del))
            i -= 1
        else:
            ops.append(Op(INS, None, j - 1, w_ins))
            j -= 1
    ops.reverse()
    total = 0.0
    for op in ops:
        total += op.cost
    return AlignmentPath(ops, total, costs)


def align_pair(prev: Hypothesis, next: Hypothesis, costs: AlignCosts) -> AlignmentPath:
    a, _ = _explode(prev, costs.unit)
    b, _ = _explode(next, costs.unit)
    return align_units(a, b, costs)


def _choose_switch(ops: List[Op]):
    region = [k for k, op in enumerate(ops) if not op.margin]
    if not region:
        return None, None
    mid = 0.5 * (region[0] + region[-1])
    for kind in (MATCH, SUB):
        cands = [k for k in region if ops[k].kind == kind]
        if cands:
            # equidistant candidates: keep the later one (more of prev)
            return min(cands, key=lambda k: (abs(k - mid), -k)), mid
    return None, mid


def stitch_pair(prev: Hypothesis, next: Hypothesis, path: AlignmentPath) -> StitchResult:
    """Merge two aligned hypotheses at a single switch point.

    The switch is the match closest to the middle of the non-margin part of
    the path (falling back to the closest substitution). Tokens up to the
    switch come from ``prev`` and tokens after it from ``next``. A
    substitution switch keeps ``prev``'s token when it sits in the first
    half of the region. Without any match or substitution the two
    hypotheses are simply concatenated.
    """
    unit = path.costs.unit
    a, a_own = _explode(prev, unit)
    b, b_own = _explode(next, unit)
    a_src = [("p", k) for k in a_own]
    b_src = [("n", k) for k in b_own]
    ops = path.ops
    switch, mid = _choose_switch(ops)
    if switch is None:
        units, src = a + b, a_src + b_src
    else:
        op = ops[switch]
        if op.kind == MATCH or switch <= mid:
            cut_a, cut_b = op.i + 1, op.j + 1
        else:
            cut_a, cut_b = op.i, op.j
        units, src = a[:cut_a] + b[cut_b:], a_src[:cut_a] + b_src[cut_b:]

    diag = {"matches": path.count(MATCH), "subs": path.count(SUB),
            "dels": path.count(DEL), "ins": path.count(INS),
            "margin_ops": len(path.margin_free_ops)}
    with_times = prev.times is not None and next.times is not None
    words, times = _assemble(units, src, prev, next, unit, with_times)
    return StitchResult(words, times, switch, diag)


def _word_time(hyp_p, hyp_n, ref):
    side, k = ref
    return (hyp_p if side == "p" else hyp_n).times[k]


def _assemble(units, src, prev, next, unit, with_times):
    if unit == "word":
        words = list(units)
        times = [_word_time(prev, next, s) for s in src] if with_times else None
        return words, times
    words, times = [], []
    buf, first, last = [], None, None
    for u, s in zip(units + [SEPARATOR], src + [("p", None)]):
        if u == SEPARATOR:
            if buf:
                words.append("".join(buf))
                if with_times:
                    times.append((_word_time(prev, next, first)[0],
                                  _word_time(prev, next, last)[1]))
            buf, first = [], None
            continue
        buf.append(u)
        if first is None:
            first = s
        last = s
    return words, (times if with_times else None)


def _window_size(stitched: Hypothesis, prev_hyp: Hypothesis, next_hyp: Hypothesis) -> int:
    if stitched.times is None:
        return FALLBACK_WINDOW_WORDS
    if prev_hyp.span is not None and next_hyp.span is not None:
        lo, hi = next_hyp.span[0], prev_hyp.span[1]
    elif next_hyp.times and prev_hyp.times:
        lo, hi = next_hyp.times[0][0], prev_hyp.times[-1][1]
    else:
        return FALLBACK_WINDOW_WORDS
    k = sum(1 for s, e in stitched.times if lo <= 0.5 * (s + e) < hi)
    return 2 * k


def stitch_chain(hyps: Sequence[Hypothesis], costs: AlignCosts):
    """Left fold of pairwise stitching; returns the merged hypothesis and
    one debug record per stitched pair."""
    if not hyps:
        return Hypothesis(()), []
    stitched = Hypothesis(hyps[0].words, hyps[0].times, -1)
    records = []
    for prev_hyp, hyp in zip(hyps, hyps[1:]):
        w = min(_window_size(stitched, prev_hyp, hyp), len(stitched))
        keep = len(stitched) - w
        tail = Hypothesis(stitched.words[keep:],
                          None if stitched.times is None else stitched.times[keep:])
        path = align_pair(tail, hyp, costs)
        res = stitch_pair(tail, hyp, path)
        times = None
        if stitched.times is not None and res.times is not None:
            times = stitched.times[:keep] + tuple(res.times)
        stitched = Hypothesis(stitched.words[:keep] + tuple(res.words), times, -1)
        records.append({"segment_index": hyp.segment_index, "window": w,
                        "path": path.to_json(), "stitch": res.to_json()})
    return stitched, records


def stitch_all(hyps: Sequence[Hypothesis], costs: AlignCosts) -> List[str]:
    return list(stitch_chain(hyps, costs)[0].words)


def concat_all(hyps: Sequence[Hypothesis]) -> Hypothesis:
    """Plain concatenation, used for non-overlapping plans."""
    words: Tuple[str, ...] = ()
    times: Optional[Tuple] = ()
    for h in hyps:
        words += h.words
        times = None if (times is None or h.times is None) else times + h.times
    return Hypothesis(words, times, -1)


def word_match_count(path: AlignmentPath, prev: Hypothesis, next: Hypothesis) -> int:
    """Words of ``prev`` matched in full, character by character, to an
    equal-length word of ``next``. For word paths this is the match count."""
    if path.costs.unit == "word":
        return path.count(MATCH)
    _, a_own = _explode(prev, "char")
    _, b_own = _explode(next, "char")
    hits: Dict[Tuple[int, int], int] = {}
    for op in path.ops:
        if op.kind == MATCH and a_own[op.i] is not None:
            key = (a_own[op.i], b_own[op.j])
            hits[key] = hits.get(key, 0) + 1
    return sum(1 for (pa, nb), c in hits.items()
               if c == len(prev.words[pa]) == len(next.words[nb]))
