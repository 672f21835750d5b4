"""Slow, independent reference implementations used only by the tests.

Nothing here imports from ovlinf so the oracles cannot share a bug with
the code they check.
"""
import math
import sys
from functools import lru_cache

sys.setrecursionlimit(10000)


def char_distance(a, b):
    """Plain recursive edit distance over characters (exponential, tiny inputs)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(char_distance(a[1:], b) + 1,
               char_distance(a, b[1:]) + 1,
               char_distance(a[1:], b[1:]) + (a[0] != b[0]))


def oracle_cer(a, b):
    if a == b:
        return 0.0
    return char_distance(a, b) / max(len(a), len(b), 1)


def oracle_sub(x, y, w_sub, w_match, soft):
    if not soft:
        return w_match if x == y else w_sub
    return oracle_cer(x, y) * (w_sub - w_match) + w_match


def explode_chars(words):
    return list(" ".join(words))


def min_edit_path_cost(a, b, w_del, w_ins, w_sub, w_match, poi, soft):
    """Minimum over every monotone edit path, enumerated one by one.

    POI: deletions taken before any token of ``b`` is consumed are free, and
    insertions taken after ``a`` is exhausted are free.
    """
    m, n = len(a), len(b)
    sub = {(i, j): oracle_sub(a[i], b[j], w_sub, w_match, soft)
           for i in range(m) for j in range(n)}
    best = [math.inf]

    def walk(i, j, acc):
        if i == m and j == n:
            if acc < best[0]:
                best[0] = acc
            return
        if i < m and j < n:
            walk(i + 1, j + 1, acc + sub[i, j])
        if i < m:
            walk(i + 1, j, acc + (0.0 if (poi and j == 0) else w_del))
        if j < n:
            walk(i, j + 1, acc + (0.0 if (poi and i == m) else w_ins))

    walk(0, 0, 0.0)
    return best[0]


def brute_levenshtein(ref, hyp):
    """Unit-cost edit distance by exhaustive enumeration of edit paths."""
    return int(min_edit_path_cost(ref, hyp, 1, 1, 1, 0, poi=False, soft=False))


@lru_cache(maxsize=None)
def memo_levenshtein(ref, hyp):
    """Unit-cost edit distance by first-token recursion over tuples.

    Memoized so an exhaustive sweep over all short pairs shares every
    suffix subproblem.
    """
    if not ref or not hyp:
        return len(ref) + len(hyp)
    return min(memo_levenshtein(ref[1:], hyp[1:]) + (ref[0] != hyp[0]),
               memo_levenshtein(ref[1:], hyp) + 1,
               memo_levenshtein(ref, hyp[1:]) + 1)


def count_segments(duration, seg_len, hop):
    """Enumerate segment starts until one reaches the end."""
    k = 0
    while True:
        if k * hop + seg_len >= duration - 1e-9:
            return k + 1
        k += 1


def vadoi_violations(fixed, shifted, segment_len, overlap_pct, threshold=0.4):
    """List every broken VADOI postcondition, comparing a shifted plan
    against the fixed plan it came from."""
    bad = []
    max_shift = segment_len * overlap_pct / 2.0
    if len(fixed) != len(shifted):
        bad.append("segment count changed")
        return bad
    for f, s in zip(fixed, shifted):
        for old, new, name in ((f[0], s[0], "start"), (f[1], s[1], "end")):
            if new != old and not abs(new - old) < max_shift:
                bad.append(f"{name} of {s} moved {abs(new - old)} >= {max_shift}")
        if s[1] > f[1]:
            bad.append(f"end of {s} moved right")
        if overlap_pct > threshold and s[0] < f[0]:
            bad.append(f"start of {s} moved left above threshold")
        if overlap_pct <= threshold and s[0] > f[0]:
            bad.append(f"start of {s} moved right at or below threshold")
        if not s[0] < s[1]:
            bad.append(f"empty interval {s}")
    if shifted[0][0] != 0.0:
        bad.append("first start not 0")
    if shifted[-1][1] != fixed[-1][1]:
        bad.append("last end moved")
    for a, b in zip(shifted, shifted[1:]):
        if not b[0] > a[0]:
            bad.append(f"starts not increasing at {b}")
        if overlap_pct > 0 and not a[1] - b[0] > 0:
            bad.append(f"no positive overlap between {a} and {b}")
        if overlap_pct == 0 and b[0] > a[1] + 1e-9:
            bad.append(f"gap between {a} and {b}")
    return bad
