"""Boundary-distortion experiment: fixed vs VAD-shifted plans, OI vs POI,
with a mock decoder that truncates every word cut by a segment edge.

    python3 scripts/closed_loop.py --manifest data/synth/longform.jsonl
"""
import argparse

from ovlinf.pipeline import PipelineConfig, run_pipeline

ROWS = [("fixed", False, "oi"), ("fixed", False, "poi"), ("vadoi", True, "poi")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--out", default="out/closed_loop")
    ap.add_argument("--overlaps", type=float, nargs="+", default=[0.15, 0.3, 0.5])
    ap.add_argument("--margin", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    backend = {"kind": "mock", "mode": "truncate", "p_corrupt": 1.0,
               "boundary_margin_s": args.margin}
    print(f"{'plan':>6} {'preset':>6} {'ovl':>5} {'WER(%)':>8} {'ratio_T':>8}")
    for ovl in args.overlaps:
        for plan, vad, preset in ROWS:
            cfg = PipelineConfig(manifest=args.manifest, out_dir=f"{args.out}/{plan}_{preset}_"
                                 f"{int(round(ovl * 100)):02d}", overlap_pct=ovl, vad=vad,
                                 preset=preset, backend=dict(backend), seed=args.seed)
            s = run_pipeline(cfg).summary
            print(f"{plan:>6} {preset:>6} {ovl:>5.2f} {100 * s.wer:>8.2f} {s.mean_ratio_T:>8.3f}")


if __name__ == "__main__":
    main()
