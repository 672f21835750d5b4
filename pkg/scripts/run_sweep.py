"""Overlap x VAD grid plus the word/char alignment benchmark on one manifest.

    python3 scripts/run_sweep.py --manifest data/synth/longform.jsonl --p-corrupt 0.5
"""
import argparse

from ovlinf.pipeline import PipelineConfig, bench, format_sweep, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--manifest", required=True)
    ap.add_argument("--out", default="out/sweep")
    ap.add_argument("--preset", choices=["oi", "poi"], default="poi")
    ap.add_argument("--mode", default="truncate",
                    choices=["truncate", "substitute_similar", "drop"])
    ap.add_argument("--p-corrupt", type=float, default=1.0)
    ap.add_argument("--repeats", type=int, default=10)
    args = ap.parse_args()
    cfg = PipelineConfig(manifest=args.manifest, out_dir=args.out, preset=args.preset,
                         backend={"kind": "mock", "mode": args.mode,
                                  "p_corrupt": args.p_corrupt})
    print(format_sweep(sweep(cfg)))
    t = bench(cfg, repeats=args.repeats)
    print(f"align time: word {t['word']:.5f} s/utt, char {t['char']:.5f} s/utt")


if __name__ == "__main__":
    main()
