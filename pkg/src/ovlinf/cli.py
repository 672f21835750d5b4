"""Command line entry point.

Exit codes: 0 success, 1 some utterances failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import pipeline as pl
from .simulate import (build_synthetic_longform, read_manifest, realize_long_form,
                       simulate_alternating, simulate_samespeaker, write_jsonl)

STAGES = ("plan", "decode", "stitch", "score")


def _on_off(v):
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return v == "on"


def _common(p):
    p.add_argument("--config", help="JSON pipeline config")
    p.add_argument("--manifest", help="long-form manifest (JSON lines)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--overlap", type=float, help="overlap fraction, e.g. 0.3")
    p.add_argument("--segment-len", type=float, help="segment length in seconds")
    p.add_argument("--vad", type=_on_off, help="on|off")
    p.add_argument("--preset", choices=["oi", "poi"])
    p.add_argument("--soft-match", type=_on_off, help="on|off")
    p.add_argument("--unit", choices=["word", "char"])
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", type=int, help="segments decoded concurrently")


def build_config(args) -> pl.PipelineConfig:
    cfg = pl.load_config(args.config) if args.config else pl.PipelineConfig()
    overrides = {"manifest": args.manifest, "out_dir": args.out, "overlap_pct": args.overlap,
                 "segment_len_s": args.segment_len, "vad": args.vad, "preset": args.preset,
                 "soft_match": args.soft_match, "unit": args.unit, "seed": args.seed,
                 "max_parallel": args.parallel}
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg


def cmd_simulate(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.synthetic:
        manifest, _, longs = build_synthetic_longform(args.out, args.synthetic, args.target,
                                                      args.seed, args.method)
    else:
        if not args.sources:
            raise pl.ConfigError("simulate needs --sources or --synthetic")
        src = read_manifest(args.sources)
        fn = simulate_alternating if args.method == "alternating" else simulate_samespeaker
        longs = fn(src, args.target)
        if not args.keep_partial:
            longs = [lf for lf in longs if not lf.partial]
        manifest = realize_long_form(longs, src, os.path.join(args.out, "long"))
    write_jsonl(os.path.join(args.out, "long_entries.jsonl"), longs)
    path = os.path.join(args.out, "longform.jsonl")
    write_jsonl(path, manifest)
    print(f"wrote {len(manifest)} long-form utterances to {path}")
    return 0


def cmd_stage(cfg, stage) -> int:
    if stage == "plan":
        plans = pl.stage_plan(cfg)
        print(f"planned {len(plans)} utterances, {sum(len(p) for p in plans)} segments")
    elif stage == "decode":
        _, errors = pl.stage_decode(cfg)
        for uid, err in errors.items():
            print(f"{uid}: {err}", file=sys.stderr)
        return 1 if errors else 0
    elif stage == "stitch":
        t = pl.stage_stitch(cfg)
        print(f"stitched {len(t)} utterances")
    elif stage == "score":
        s = pl.stage_score(cfg)
        print(f"WER {100 * s.wer:.2f}%  ratio_T {s.mean_ratio_T:.3f}")
    return 0


def cmd_run(cfg, args) -> int:
    if args.stage:
        return cmd_stage(cfg, args.stage)
    res = pl.run_pipeline(cfg)
    if res.summary is not None:
        s = res.summary
        print(f"WER {100 * s.wer:.2f}%  ratio_T {s.mean_ratio_T:.3f}  "
              f"align {s.mean_align_time_s:.4f} s/utt")
    for uid in res.failed:
        print(f"failed: {uid}", file=sys.stderr)
    return 1 if res.failed else 0


def cmd_sweep(cfg, args) -> int:
    rows = pl.sweep(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "sweep.csv"), "w", newline="") as f:
        f.write(f"# {pl.config_header(cfg)}\n")
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(pl.format_sweep(rows))
    return 1 if any(r["failed"] for r in rows) else 0


def cmd_bench(cfg, args) -> int:
    times = pl.bench(cfg, repeats=args.repeats)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "bench.json"), "w") as f:
        json.dump({"config": cfg.to_dict(), "repeats": args.repeats,
                   "align_time_s": times}, f, indent=2)
    for unit, t in times.items():
        print(f"{unit:>5}: {t:.6f} s/utt")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ovlinf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="build a long-form manifest")
    p.add_argument("--sources", help="short-utterance manifest (JSON lines)")
    p.add_argument("--synthetic", type=int, metavar="N",
                   help="generate N synthetic long-form utterances instead")
    p.add_argument("--method", choices=["alternating", "samespeaker"], default="alternating")
    p.add_argument("--target", type=float, default=120.0)
    p.add_argument("--keep-partial", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for stage in STAGES:
        _common(sub.add_parser(stage, help=f"run the {stage} stage only"))
    p = sub.add_parser("run", help="full pipeline, or one stage with --stage")
    _common(p)
    p.add_argument("--stage", choices=STAGES)
    _common(sub.add_parser("sweep", help="overlap x VAD grid"))
    p = sub.add_parser("bench", help="time word- vs char-level alignment")
    _common(p)
    p.add_argument("--repeats", type=int, default=100)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        cfg = build_config(args)
        cfg.validate()
        if args.command in STAGES:
            return cmd_stage(cfg, args.command)
        if args.command == "run":
            return cmd_run(cfg, args)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        return cmd_bench(cfg, args)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
