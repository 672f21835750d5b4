"""Build the synthetic long-form corpus used by the closed-loop experiment.

    python3 scripts/make_corpus.py --out data/synth --n-long 20 --seed 0
"""
import argparse
import os

from ovlinf.simulate import build_synthetic_longform, write_jsonl


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/synth")
    ap.add_argument("--n-long", type=int, default=20)
    ap.add_argument("--target", type=float, default=120.0)
    ap.add_argument("--method", choices=["alternating", "samespeaker"], default="alternating")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    manifest, _, longs = build_synthetic_longform(args.out, args.n_long, args.target,
                                                  args.seed, args.method)
    write_jsonl(os.path.join(args.out, "longform.jsonl"), manifest)
    write_jsonl(os.path.join(args.out, "long_entries.jsonl"), longs)
    durs = [m.duration_s for m in manifest]
    print(f"{len(manifest)} utterances, mean {sum(durs) / len(durs):.1f} s "
          f"-> {os.path.join(args.out, 'longform.jsonl')}")


if __name__ == "__main__":
    main()
