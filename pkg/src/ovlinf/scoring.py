"""WER scoring and compute-cost accounting."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import asdict, dataclass
from typing import Iterable, List, Optional, Sequence

_PUNCT = re.compile(r"[^\w\s']")


@dataclass(frozen=True)
class WerReport:
    n_ref: int
    subs: int
    dels: int
    ins: int

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.ins

    @property
    def wer(self) -> float:
        if self.n_ref == 0:
            return 0.0 if self.errors == 0 else math.inf
        return self.errors / self.n_ref

    @property
    def undefined(self) -> bool:
        """True for the empty-reference, non-empty-hypothesis case."""
        return self.n_ref == 0 and self.errors > 0


@dataclass(frozen=True)
class TimingReport:
    n_segments: int
    n_segments_naive: int
    align_time_s: float = 0.0

    @property
    def ratio_T(self) -> float:
        return self.n_segments / self.n_segments_naive


@dataclass(frozen=True)
class CorpusSummary:
    n_utterances: int
    n_ref: int
    subs: int
    dels: int
    ins: int
    wer: float
    mean_ratio_T: float
    mean_align_time_s: float


def normalize_words(words: Iterable[str]) -> List[str]:
    """Lowercase, drop punctuation other than apostrophes, re-split."""
    out = []
    for w in words:
        out.extend(_PUNCT.sub(" ", w.lower()).split())
    return out


def score_wer(ref: Sequence[str], hyp: Sequence[str], normalize: bool = True) -> WerReport:
    """Unit-cost Levenshtein alignment of hyp against ref.

    Error counts come from one minimal path, preferring substitutions over
    deletions over insertions when tracing back.
    """
    if normalize:
        ref, hyp = normalize_words(ref), normalize_words(hyp)
    m, n = len(ref), len(hyp)
    D = [list(range(n + 1))]
    for i in range(1, m + 1):
        r, prev = ref[i - 1], D[-1]
        row = [i]
        left = i
        for j in range(1, n + 1):
            left = min(prev[j - 1] + (r != hyp[j - 1]), prev[j] + 1, left + 1)
            row.append(left)
        D.append(row)
    subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and D[i][j] == D[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and D[i][j] == D[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerReport(m, subs, dels, ins)


def corpus_report(wers: Sequence[WerReport],
                  timings: Optional[Sequence[TimingReport]] = None) -> CorpusSummary:
    """Pooled corpus WER plus mean cost ratio and alignment time."""
    if not wers:
        raise ValueError("need at least one utterance")
    n_ref = sum(r.n_ref for r in wers)
    subs = sum(r.subs for r in wers)
    dels = sum(r.dels for r in wers)
    ins = sum(r.ins for r in wers)
    errors = subs + dels + ins
    wer = errors / n_ref if n_ref else (0.0 if errors == 0 else math.inf)
    timings = list(timings or [])
    ratio = sum(t.ratio_T for t in timings) / len(timings) if timings else math.nan
    align = sum(t.align_time_s for t in timings) / len(timings) if timings else math.nan
    return CorpusSummary(len(wers), n_ref, subs, dels, ins, wer, ratio, align)


REPORT_FIELDS = ["utterance_id", "n_ref", "subs", "dels", "ins", "wer",
                 "n_segments", "ratio_T", "align_time_s"]


def write_report_csv(path, rows, summary: CorpusSummary, header_comment: str = "") -> None:
    """``rows`` are ``(utterance_id, WerReport, TimingReport)`` triples."""
    with open(path, "w", newline="") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        w = csv.writer(f)
        w.writerow(REPORT_FIELDS)
        for uid, r, t in rows:
            w.writerow([uid, r.n_ref, r.subs, r.dels, r.ins, f"{r.wer:.6f}",
                        t.n_segments, f"{t.ratio_T:.6f}", f"{t.align_time_s:.6f}"])
        w.writerow(["__corpus__", summary.n_ref, summary.subs, summary.dels, summary.ins,
                    f"{summary.wer:.6f}", "", f"{summary.mean_ratio_T:.6f}",
                    f"{summary.mean_align_time_s:.6f}"])


def summary_dict(summary: CorpusSummary) -> dict:
    return asdict(summary)
