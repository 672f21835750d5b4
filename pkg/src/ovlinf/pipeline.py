"""End-to-end orchestration: plan -> decode -> stitch -> score.

Each stage is a plain function over in-memory records with a matching
file format, so a monolithic run and a staged run share the same code.
"""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

from .aligner import AlignCosts, Hypothesis, concat_all, stitch_chain
from .audio import AudioBuffer, frame_signal, load_audio
from .decoder import DecodeResult, ExternalBackend, MockBackend, MockCorruption, decode_plan
from .scoring import (CorpusSummary, TimingReport, WerReport, corpus_report, score_wer,
                      write_report_csv)
from .segmenter import OverlapConfig, SegmentPlan, VadoiConfig, plan_fixed, plan_vadoi
from .simulate import ManifestEntry, read_jsonl, read_manifest
from .vad import VadConfig, run_vad

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    manifest: str = ""
    out_dir: str = "out"
    segment_len_s: float = 12.0
    overlap_pct: float = 0.3
    vad: bool = False
    vad_cfg: VadConfig = field(default_factory=VadConfig)
    vadoi: VadoiConfig = field(default_factory=VadoiConfig)
    preset: str = "poi"
    soft_match: bool = False
    unit: str = "word"
    # explicit w_del/w_ins/w_sub/w_match overriding the preset values
    costs: Optional[Dict[str, float]] = None
    backend: Dict = field(default_factory=lambda: {"kind": "mock"})
    max_parallel: int = 1
    utt_parallel: int = 1
    seed: int = 0

    def validate(self, check_paths: bool = True) -> None:
        try:
            self.overlap()
            self.align_costs()
            self.make_backend()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.preset not in ("oi", "poi"):
            raise ConfigError(f"preset must be 'oi' or 'poi', got {self.preset!r}")
        if self.max_parallel < 1 or self.utt_parallel < 1:
            raise ConfigError("parallelism must be >= 1")
        if check_paths and not os.path.exists(self.manifest):
            raise ConfigError(f"manifest not found: {self.manifest!r}")

    def overlap(self) -> OverlapConfig:
        return OverlapConfig(self.segment_len_s, self.overlap_pct)

    def align_costs(self) -> AlignCosts:
        extra = dict(self.costs or {})
        return AlignCosts.preset(self.preset, unit=self.unit,
                                 soft_match=self.soft_match, **extra)

    def make_backend(self):
        b = dict(self.backend)
        kind = b.pop("kind", "mock")
        if kind == "mock":
            b.setdefault("seed", self.seed)
            return MockBackend(MockCorruption(**b))
        if kind in ("subprocess", "http"):
            return ExternalBackend(**b)
        raise ValueError(f"unknown backend kind {kind!r}")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Dict) -> "PipelineConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if isinstance(doc.get("vad_cfg"), dict):
                doc["vad_cfg"] = VadConfig(**doc["vad_cfg"])
            if isinstance(doc.get("vadoi"), dict):
                doc["vadoi"] = VadoiConfig(**doc["vadoi"])
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return PipelineConfig.from_dict(doc)


def config_header(cfg: PipelineConfig) -> str:
    return "config " + json.dumps(cfg.to_dict(), sort_keys=True)


# -- stages -----------------------------------------------------------------

class _Inputs:
    """Lazy per-utterance audio cache."""

    def __init__(self, entries: Sequence[ManifestEntry], audio: Optional[Dict] = None):
        self.entries = {e.utterance_id: e for e in entries}
        self.order = [e.utterance_id for e in entries]
        self._audio = dict(audio or {})

    def audio(self, uid) -> AudioBuffer:
        if uid not in self._audio:
            self._audio[uid] = load_audio(self.entries[uid].audio_path)
        return self._audio[uid]


def plan_utterance(entry: ManifestEntry, cfg: PipelineConfig,
                   audio: Optional[AudioBuffer] = None) -> SegmentPlan:
    ocfg = cfg.overlap()
    if not cfg.vad:
        return plan_fixed(entry.duration_s, ocfg, entry.utterance_id)
    if audio is None:
        audio = load_audio(entry.audio_path)
    spectra = cfg.vad_cfg.mode == "statistical"
    mask = run_vad(frame_signal(audio, spectra=spectra), cfg.vad_cfg)
    return plan_vadoi(entry.duration_s, mask, ocfg, cfg.vadoi, entry.utterance_id)


def decode_utterance(entry: ManifestEntry, plan: SegmentPlan, cfg: PipelineConfig,
                     audio: Optional[AudioBuffer] = None, backend=None) -> DecodeResult:
    backend = backend or cfg.make_backend()
    if isinstance(backend, MockBackend):
        source = (entry.words(), entry.duration_s)
    else:
        source = audio if audio is not None else load_audio(entry.audio_path)
    return decode_plan(plan, source, backend, cfg.max_parallel)


def stitch_utterance(hyps: Sequence[Hypothesis], cfg: PipelineConfig):
    """Returns (words, align_time_s, pair_records)."""
    t0 = time.perf_counter()
    if cfg.overlap_pct == 0:
        merged, records = concat_all(hyps), []
    else:
        merged, records = stitch_chain(hyps, cfg.align_costs())
    return list(merged.words), time.perf_counter() - t0, records


@dataclass
class UtteranceResult:
    utterance_id: str
    plan: Optional[SegmentPlan] = None
    hypotheses: List[Hypothesis] = field(default_factory=list)
    transcript: List[str] = field(default_factory=list)
    wer: Optional[WerReport] = None
    timing: Optional[TimingReport] = None
    pairs: List[Dict] = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class PipelineResult:
    utterances: List[UtteranceResult]
    summary: Optional[CorpusSummary]

    @property
    def failed(self) -> List[str]:
        return [u.utterance_id for u in self.utterances if u.error]


def naive_count(duration_s: float, cfg: PipelineConfig) -> int:
    return len(plan_fixed(duration_s, OverlapConfig(cfg.segment_len_s, 0.0)).specs)


def process_utterance(entry: ManifestEntry, cfg: PipelineConfig, inputs: _Inputs,
                      backend=None) -> UtteranceResult:
    uid = entry.utterance_id
    res = UtteranceResult(uid)
    try:
        need_audio = cfg.vad or not isinstance(backend or cfg.make_backend(), MockBackend)
        audio = inputs.audio(uid) if need_audio else None
        res.plan = plan_utterance(entry, cfg, audio)
        dec = decode_utterance(entry, res.plan, cfg, audio, backend)
        res.hypotheses = dec.hypotheses
        if dec.errors:
            res.error = "; ".join(f"segment {i}: {m}" for i, m in sorted(dec.errors.items()))
            return res
        res.transcript, align_s, res.pairs = stitch_utterance(dec.hypotheses, cfg)
        res.wer = score_wer(entry.transcript, res.transcript)
        res.timing = TimingReport(len(res.plan.specs), naive_count(entry.duration_s, cfg),
                                  align_s)
    except (OSError, ValueError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
    if res.error:
        log.warning("%s failed: %s", uid, res.error)
    return res


def run_pipeline(cfg: PipelineConfig, entries: Optional[Sequence[ManifestEntry]] = None,
                 audio: Optional[Dict[str, AudioBuffer]] = None,
                 write: bool = True) -> PipelineResult:
    if entries is None:
        cfg.validate()
        entries = read_manifest(cfg.manifest)
    else:
        cfg.validate(check_paths=False)
    inputs = _Inputs(entries, audio)
    backend = cfg.make_backend()
    if cfg.utt_parallel > 1:
        with ThreadPoolExecutor(max_workers=cfg.utt_parallel) as pool:
            results = list(pool.map(lambda e: process_utterance(e, cfg, inputs, backend),
                                    entries))
    else:
        results = [process_utterance(e, cfg, inputs, backend) for e in entries]
    done = [r for r in results if r.wer is not None]
    summary = corpus_report([r.wer for r in done], [r.timing for r in done]) if done else None
    out = PipelineResult(results, summary)
    if write:
        write_outputs(cfg, out)
    return out


# -- file formats -----------------------------------------------------------

def _open(cfg, name):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return open(os.path.join(cfg.out_dir, name), "w", newline="")


def write_plans(cfg, plans: Sequence[SegmentPlan]) -> None:
    with _open(cfg, "plans.jsonl") as f:
        f.write(f"# {config_header(cfg)}\n")
        for p in plans:
            f.write(json.dumps(p.to_json()) + "\n")


def write_hypotheses(cfg, hyps_by_utt: Dict[str, Sequence[Hypothesis]]) -> None:
    with _open(cfg, "hyps.jsonl") as f:
        f.write(f"# {config_header(cfg)}\n")
        for uid, hyps in hyps_by_utt.items():
            for h in hyps:
                f.write(json.dumps({"utterance_id": uid, **h.to_json()}) + "\n")


def write_transcripts(cfg, transcripts: Dict[str, Sequence[str]]) -> None:
    with _open(cfg, "transcripts.tsv") as f:
        f.write(f"# {config_header(cfg)}\n")
        for uid, words in transcripts.items():
            f.write(f"{uid}\t{' '.join(words)}\n")


def write_outputs(cfg: PipelineConfig, result: PipelineResult) -> None:
    ok = [u for u in result.utterances if u.plan is not None]
    write_plans(cfg, [u.plan for u in ok])
    write_hypotheses(cfg, {u.utterance_id: u.hypotheses for u in ok})
    done = [u for u in result.utterances if u.wer is not None]
    write_transcripts(cfg, {u.utterance_id: u.transcript for u in done})
    with _open(cfg, "timing.jsonl") as f:
        for u in done:
            f.write(json.dumps({"utterance_id": u.utterance_id,
                                "align_time_s": u.timing.align_time_s}) + "\n")
    with _open(cfg, "pairs.jsonl") as f:
        for u in done:
            for rec in u.pairs:
                f.write(json.dumps({"utterance_id": u.utterance_id, **rec}) + "\n")
    if result.summary is not None:
        write_report_csv(os.path.join(cfg.out_dir, "report.csv"),
                         [(u.utterance_id, u.wer, u.timing) for u in done],
                         result.summary, config_header(cfg))
    if result.failed:
        with _open(cfg, "failures.tsv") as f:
            for u in result.utterances:
                if u.error:
                    f.write(f"{u.utterance_id}\t{u.error}\n")


def read_plans(path) -> List[SegmentPlan]:
    return [SegmentPlan.from_json(d) for d in read_jsonl(path)]


def read_hypotheses(path) -> Dict[str, List[Hypothesis]]:
    out: Dict[str, List[Hypothesis]] = {}
    for d in read_jsonl(path):
        uid = d.pop("utterance_id")
        out.setdefault(uid, []).append(Hypothesis.from_json(d))
    for hyps in out.values():
        hyps.sort(key=lambda h: h.segment_index)
    return out


def read_transcripts(path) -> Dict[str, List[str]]:
    out = {}
    with open(path) as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            uid, _, text = line.rstrip("\n").partition("\t")
            out[uid] = text.split()
    return out


def stage_plan(cfg: PipelineConfig) -> List[SegmentPlan]:
    cfg.validate()
    inputs = _Inputs(read_manifest(cfg.manifest))
    plans = [plan_utterance(inputs.entries[uid], cfg, inputs.audio(uid) if cfg.vad else None)
             for uid in inputs.order]
    write_plans(cfg, plans)
    return plans


def stage_decode(cfg: PipelineConfig) -> Tuple[Dict[str, List[Hypothesis]], Dict[str, str]]:
    cfg.validate()
    inputs = _Inputs(read_manifest(cfg.manifest))
    backend = cfg.make_backend()
    hyps, errors = {}, {}
    for plan in read_plans(os.path.join(cfg.out_dir, "plans.jsonl")):
        uid = plan.utterance_id
        audio = None if isinstance(backend, MockBackend) else inputs.audio(uid)
        dec = decode_utterance(inputs.entries[uid], plan, cfg, audio, backend)
        hyps[uid] = dec.hypotheses
        if dec.errors:
            errors[uid] = "; ".join(f"segment {i}: {m}" for i, m in sorted(dec.errors.items()))
    write_hypotheses(cfg, hyps)
    return hyps, errors


def stage_stitch(cfg: PipelineConfig, hyps_path: Optional[str] = None) -> Dict[str, List[str]]:
    hyps = read_hypotheses(hyps_path or os.path.join(cfg.out_dir, "hyps.jsonl"))
    transcripts, timing = {}, {}
    for uid, hs in hyps.items():
        transcripts[uid], timing[uid], _ = stitch_utterance(hs, cfg)
    write_transcripts(cfg, transcripts)
    with _open(cfg, "timing.jsonl") as f:
        for uid, t in timing.items():
            f.write(json.dumps({"utterance_id": uid, "align_time_s": t}) + "\n")
    return transcripts


def stage_score(cfg: PipelineConfig) -> CorpusSummary:
    cfg.validate()
    entries = {e.utterance_id: e for e in read_manifest(cfg.manifest)}
    transcripts = read_transcripts(os.path.join(cfg.out_dir, "transcripts.tsv"))
    plans = {p.utterance_id: p for p in read_plans(os.path.join(cfg.out_dir, "plans.jsonl"))}
    timing_path = os.path.join(cfg.out_dir, "timing.jsonl")
    align = {}
    if os.path.exists(timing_path):
        align = {d["utterance_id"]: d["align_time_s"] for d in read_jsonl(timing_path)}
    rows = []
    for uid, words in transcripts.items():
        e = entries[uid]
        n_seg = len(plans[uid].specs) if uid in plans else naive_count(e.duration_s, cfg)
        rows.append((uid, score_wer(e.transcript, words),
                     TimingReport(n_seg, naive_count(e.duration_s, cfg), align.get(uid, 0.0))))
    summary = corpus_report([r[1] for r in rows], [r[2] for r in rows])
    write_report_csv(os.path.join(cfg.out_dir, "report.csv"), rows, summary, config_header(cfg))
    return summary


# -- experiments ------------------------------------------------------------

SWEEP_OVERLAPS = (0.0, 0.15, 0.30, 0.50)


def sweep(cfg: PipelineConfig, overlaps=SWEEP_OVERLAPS, vad_modes=(False, True),
          entries=None, audio=None) -> List[Dict]:
    """One row per (overlap, VAD) cell: pooled WER and mean segment ratio."""
    rows = []
    if entries is None:
        cfg.validate()
        entries = read_manifest(cfg.manifest)
    inputs = _Inputs(entries, audio)
    for ovl in overlaps:
        for vad in vad_modes:
            sub = PipelineConfig(**{**cfg.__dict__, "overlap_pct": ovl, "vad": vad,
                                    "out_dir": os.path.join(cfg.out_dir,
                                                            f"ovl{int(round(ovl * 100)):02d}"
                                                            f"_vad{'on' if vad else 'off'}")})
            res = run_pipeline(sub, entries, inputs._audio, write=True)
            s = res.summary
            rows.append({"overlap_pct": ovl, "vad": vad,
                         "wer": s.wer if s else float("nan"),
                         "ratio_T": s.mean_ratio_T if s else float("nan"),
                         "align_time_s": s.mean_align_time_s if s else float("nan"),
                         "failed": len(res.failed)})
    return rows


def format_sweep(rows: Sequence[Dict]) -> str:
    lines = [f"{'Exp':>5} {'VAD':>4} {'WER(%)':>8} {'Decoding Time':>14}"]
    for r in rows:
        lines.append(f"{int(round(r['overlap_pct'] * 100)):>4}% {'Yes' if r['vad'] else 'No':>4} "
                     f"{100 * r['wer']:>8.2f} {r['ratio_T']:>13.2f}T")
    return "\n".join(lines)


def bench(cfg: PipelineConfig, units=("word", "char"), repeats: int = 100,
          entries=None, audio=None) -> Dict[str, float]:
    """Mean wall time per utterance spent aligning and stitching, per unit."""
    if entries is None:
        cfg.validate()
        entries = read_manifest(cfg.manifest)
    inputs = _Inputs(entries, audio)
    backend = cfg.make_backend()
    hyps = []
    for e in entries:
        a = inputs.audio(e.utterance_id) if (cfg.vad or not isinstance(backend, MockBackend)) \
            else None
        plan = plan_utterance(e, cfg, a)
        hyps.append(decode_utterance(e, plan, cfg, a, backend).hypotheses)
    out = {}
    for unit in units:
        costs = AlignCosts.preset(cfg.preset, unit=unit, soft_match=cfg.soft_match,
                                  **(cfg.costs or {}))
        t0 = time.perf_counter()
        for _ in range(repeats):
            for hs in hyps:
                stitch_chain(hs, costs)
        out[unit] = (time.perf_counter() - t0) / (repeats * max(1, len(hyps)))
    return out
