"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line (printed in the terminal summary)
before asserting, so a red criterion still reports its measured values.
"""
import itertools
import os
import random
import time

import numpy as np
import pytest

from ovlinf.aligner import AlignCosts, Hypothesis, align_pair, sub_cost
from ovlinf.pipeline import PipelineConfig, bench, run_pipeline
from ovlinf.scoring import score_wer
from ovlinf.segmenter import OverlapConfig, plan_fixed, plan_vadoi
from ovlinf.simulate import build_synthetic_longform
from ovlinf.vad import VadMask

from oracles import (brute_levenshtein, explode_chars, memo_levenshtein, min_edit_path_cost,
                     vadoi_violations)

CLOSED_LOOP_BACKEND = {"kind": "mock", "mode": "truncate", "p_corrupt": 1.0,
                       "boundary_margin_s": 0.1}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    t0 = time.perf_counter()
    root = tmp_path_factory.mktemp("acceptance")
    manifest, audio, _ = build_synthetic_longform(str(root), n_long=20, target_s=120.0, seed=0)
    return manifest, audio, str(root), time.perf_counter() - t0


def test_c1_segment_count_ratios(record):
    t0 = time.perf_counter()
    naive = len(plan_fixed(120.0, OverlapConfig(12.0, 0.0)).specs)
    ratios = {p: len(plan_fixed(120.0, OverlapConfig(12.0, p)).specs) / naive
              for p in (0.0, 0.5, 0.3, 0.15)}
    measured = {0.5: 1.87, 0.3: 1.37, 0.15: 1.16}
    exact = {0.0: 1.0, 0.5: 1.9, 0.3: 1.4, 0.15: 1.2}
    elapsed = time.perf_counter() - t0
    ok = (all(ratios[p] == pytest.approx(exact[p], abs=1e-12) for p in exact)
          and all(abs(ratios[p] - measured[p]) <= 0.15 for p in measured)
          and elapsed < 1.0)
    record("1 segment-count ratios", ok,
           ", ".join(f"{int(p * 100)}%={r:.2f}" for p, r in ratios.items())
           + f" ({elapsed:.3f} s)")
    assert ok


def _random_words(rng, vocab, max_len):
    return [rng.choice(vocab) for _ in range(rng.randint(0, max_len))]


def _char_instance(rng):
    # exploded length (letters plus separators) kept <= 7
    vocab = ["a", "b", "c", "ab", "ca"]
    while True:
        words = _random_words(rng, vocab, 4)
        if len(explode_chars(words)) <= 7:
            return words


def test_c2_alignment_oracle_equivalence(record):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    word_vocab = ["the", "cat", "bat", "sat", "a"]
    mismatches, checked = [], 0
    for _ in range(500):
        wa, wb = _random_words(rng, word_vocab, 7), _random_words(rng, word_vocab, 7)
        ca, cb = _char_instance(rng), _char_instance(rng)
        for preset, soft, unit in itertools.product(("oi", "poi"), (False, True),
                                                    ("word", "char")):
            a, b = (wa, wb) if unit == "word" else (ca, cb)
            c = AlignCosts.preset(preset, soft_match=soft, unit=unit)
            ua = explode_chars(a) if unit == "char" else a
            ub = explode_chars(b) if unit == "char" else b
            want = min_edit_path_cost(ua, ub, c.w_del, c.w_ins, c.w_sub, c.w_match,
                                      preset == "poi", soft)
            got = align_pair(Hypothesis(tuple(a)), Hypothesis(tuple(b)), c).total_cost
            checked += 1
            if got != want:
                mismatches.append((preset, soft, unit, a, b, got, want))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 30.0
    record("2 alignment oracle equivalence", ok,
           f"{checked - len(mismatches)}/{checked} exact "
           f"(500 instances x 8 settings, {elapsed:.1f} s)")
    assert ok, mismatches[:3]


def test_c3_cost_endpoints(record):
    t0 = time.perf_counter()
    ok = True
    for preset in ("oi", "poi"):
        hard = AlignCosts.preset(preset)
        soft = AlignCosts.preset(preset, soft_match=True)
        ok &= sub_cost("word", "word", hard) == hard.w_match
        ok &= sub_cost("word", "ward", hard) == hard.w_sub
        ok &= sub_cost("word", "word", soft) == soft.w_match
        ok &= sub_cost("ab", "xyz", soft) == soft.w_sub
        # monotone in CER: "abcd" against increasingly different strings
        seq = ["abcd", "abcx", "abxx", "axxx", "xxxx"]
        costs = [sub_cost("abcd", s, soft) for s in seq]
        ok &= all(x < y for x, y in zip(costs, costs[1:]))
    cat_bat = sub_cost("cat", "bat", AlignCosts.preset("poi", soft_match=True))
    ok &= cat_bat == -1.0
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    record("3 cost endpoints", ok, f"soft(cat,bat) POI = {cat_bat!r} ({elapsed:.3f} s)")
    assert ok


def test_c4_vadoi_fuzz(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    failures = []
    for trial in range(1000):
        n_runs = int(rng.integers(1, 80))
        lengths = rng.integers(1, 150, n_runs)
        first = bool(rng.integers(2))
        flags = np.concatenate([np.full(n, (k % 2 == 0) == first) for k, n in enumerate(lengths)])
        mask = VadMask(flags, 0.01)
        duration = len(flags) * 0.01 + float(rng.uniform(0.0, 0.03))
        ovl = float(rng.choice([0.0, 0.15, 0.3, 0.4, 0.5, rng.uniform(0, 0.9)]))
        seg_len = float(rng.uniform(0.5, 12.0))
        cfg = OverlapConfig(seg_len, ovl)
        fixed = [(s.start_s, s.end_s) for s in plan_fixed(duration, cfg).specs]
        shifted = [(s.start_s, s.end_s) for s in plan_vadoi(duration, mask, cfg).specs]
        bad = vadoi_violations(fixed, shifted, seg_len, ovl)
        if bad:
            failures.append((trial, bad[:2]))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10.0
    record("4 VADOI invariant fuzz", ok,
           f"{1000 - len(failures)}/1000 plans clean ({elapsed:.1f} s)")
    assert ok, failures[:3]


def _corpus_wer(corpus, **kw):
    manifest, audio, root, _ = corpus
    cfg = PipelineConfig(out_dir=os.path.join(root, "out"), backend=dict(CLOSED_LOOP_BACKEND),
                         seed=0, **kw)
    return run_pipeline(cfg, manifest, audio, write=False).summary.wer


def test_c5_closed_loop(corpus, record):
    manifest, _, _, build_s = corpus
    t0 = time.perf_counter()
    fixed_poi = _corpus_wer(corpus, overlap_pct=0.3, vad=False, preset="poi")
    vadoi_poi = _corpus_wer(corpus, overlap_pct=0.3, vad=True, preset="poi")
    fixed_oi = _corpus_wer(corpus, overlap_pct=0.3, vad=False, preset="oi")
    elapsed = build_s + time.perf_counter() - t0
    mean_len = float(np.mean([m.duration_s for m in manifest]))
    a, b, c = fixed_poi > 0, vadoi_poi == 0, fixed_oi >= fixed_poi
    timing = f"{len(manifest)} utts, mean {mean_len:.1f} s, {elapsed:.1f} s"
    record("5a fixed 30% POI WER > 0", a and elapsed < 60, f"WER {fixed_poi:.4f} ({timing})")
    record("5b VADOI 30% POI WER = 0", b and elapsed < 60, f"WER {vadoi_poi:.4f}")
    record("5c fixed 30% OI >= POI", c and elapsed < 60,
           f"OI {fixed_oi:.4f} vs POI {fixed_poi:.4f}")
    assert len(manifest) == 20 and abs(mean_len - 120.0) <= 12.0
    assert elapsed < 60
    assert b, f"VADOI WER {vadoi_poi}"
    assert c, f"OI {fixed_oi} < POI {fixed_poi}"
    assert a, f"fixed-plan 30% POI WER is {fixed_poi}"


def test_c6_wer_scorer(record):
    t0 = time.perf_counter()
    bad, checked = [], 0
    seqs = [s for n in range(7) for s in itertools.product("abc", repeat=n)]
    # every (ref, hyp) pair with each side of length at most 6
    for ref in seqs:
        for hyp in seqs:
            checked += 1
            if score_wer(ref, hyp, normalize=False).errors != memo_levenshtein(ref, hyp):
                bad.append((ref, hyp))
    # the path-enumerating oracle cross-checks the memoized one on a sample
    rng = random.Random(6)
    for _ in range(300):
        ref, hyp = rng.choice(seqs), rng.choice(seqs)
        if len(ref) + len(hyp) <= 9 and memo_levenshtein(ref, hyp) != brute_levenshtein(ref, hyp):
            bad.append(("oracle", ref, hyp))
    hand = score_wer(list("abcd"), list("axc"))
    hand_ok = (hand.subs, hand.dels, hand.ins, hand.wer) == (1, 1, 0, 0.5)
    elapsed = time.perf_counter() - t0
    ok = not bad and hand_ok and elapsed < 30.0
    record("6 WER scorer", ok, f"{checked - len(bad)}/{checked} pairs exact, "
           f"hand example wer={hand.wer} ({elapsed:.1f} s)")
    assert ok, bad[:3]


def _outputs(corpus, sub, max_parallel):
    manifest, audio, root, _ = corpus
    out = os.path.join(root, sub)
    cfg = PipelineConfig(out_dir=out, overlap_pct=0.3, vad=True, max_parallel=max_parallel,
                         backend={"kind": "mock", "mode": "substitute_similar",
                                  "p_corrupt": 0.5, "boundary_margin_s": 0.2}, seed=7)
    run_pipeline(cfg, manifest, audio)
    files = {}
    for name in ("plans.jsonl", "hyps.jsonl", "transcripts.tsv", "pairs.jsonl", "report.csv"):
        with open(os.path.join(out, name)) as f:
            lines = f.read().splitlines()
        # drop the config echo (names the out dir) and wall-clock columns
        lines = [l for l in lines if not l.startswith("# config")]
        if name == "report.csv":
            lines = [",".join(l.split(",")[:-1]) for l in lines]
        files[name] = lines
    return files


def test_c7_determinism(corpus, record):
    t0 = time.perf_counter()
    first = _outputs(corpus, "det_a", 1)
    again = _outputs(corpus, "det_b", 1)
    wide = _outputs(corpus, "det_c", 8)
    elapsed = time.perf_counter() - t0
    ok = first == again == wide and elapsed < 60
    record("7 determinism and parallel invariance", ok,
           f"3 runs identical={first == again == wide} ({elapsed:.1f} s)")
    assert ok


def test_c8_char_vs_word_cost(corpus, record):
    manifest, audio, root, _ = corpus
    cfg = PipelineConfig(out_dir=os.path.join(root, "bench"), overlap_pct=0.3)
    t = bench(cfg, repeats=3, entries=manifest, audio=audio)
    ratio = t["char"] / t["word"]
    ok = ratio >= 5.0
    record("8 char vs word align time", ok,
           f"word {t['word'] * 1e3:.2f} ms/utt, char {t['char'] * 1e3:.2f} ms/utt, "
           f"ratio {ratio:.1f}x")
    assert ok
