"""Long-form evaluation sets assembled from short utterances."""
from __future__ import annotations

import json
import math
import os
import string
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .audio import AudioBuffer, Word, load_audio, save_audio, synth_utterance


@dataclass
class ManifestEntry:
    utterance_id: str
    audio_path: str
    transcript: List[str]
    speaker_id: str = ""
    duration_s: float = 0.0
    # per-word (start_s, end_s) relative to the utterance, when known
    word_times: Optional[List[Tuple[float, float]]] = None
    empty_ok: bool = False

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError(f"{self.utterance_id}: duration_s must be positive")
        if not self.transcript and not self.empty_ok:
            raise ValueError(f"{self.utterance_id}: empty transcript must be flagged")

    def words(self) -> List[Word]:
        """Reference words with times; spread uniformly when none are stored."""
        if self.word_times is not None:
            return [Word(t, s, e) for t, (s, e) in zip(self.transcript, self.word_times)]
        n = len(self.transcript)
        step = self.duration_s / n if n else 0.0
        return [Word(t, k * step, (k + 1) * step) for k, t in enumerate(self.transcript)]


@dataclass
class LongFormEntry:
    long_id: str
    source_ids: List[str]
    duration_s: float
    transcript: List[str]
    speaker_id: str = ""
    # fewer than target seconds: a leftover, kept so nothing is silently dropped
    partial: bool = False


def _finish(long_id, picked, partial, speaker=""):
    return LongFormEntry(long_id, [e.utterance_id for e in picked],
                         sum(e.duration_s for e in picked),
                         [w for e in picked for w in e.transcript], speaker, partial)


def simulate_alternating(entries: List[ManifestEntry], target_s: float = 120.0,
                         order: str = "extreme") -> List[LongFormEntry]:
    """Append above- and below-median utterances in pairs until the running
    length exceeds ``target_s``.

    Closure is checked after each (above, below) pair. ``order="extreme"``
    takes the longest unused above-median and the shortest unused
    below-median utterance; ``"adjacent"`` takes the ones closest to the
    median instead. Once either side runs dry the remaining utterances are
    consumed one at a time in ascending length, checking after each.
    """
    if not entries:
        raise ValueError("no entries to simulate from")
    ranked = sorted(entries, key=lambda e: (e.duration_s, e.utterance_id))
    median = ranked[(len(ranked) - 1) // 2].duration_s
    below = [e for e in ranked if e.duration_s <= median]
    above = [e for e in ranked if e.duration_s > median]
    if order == "extreme":
        above.reverse()
    elif order == "adjacent":
        below.reverse()
    else:
        raise ValueError(f"unknown order {order!r}")

    out, cur = [], []

    def step(picked):
        cur.extend(picked)
        if sum(e.duration_s for e in cur) > target_s:
            out.append(_finish(f"long{len(out):04d}", list(cur), False))
            cur.clear()

    while above and below:
        step([above.pop(0), below.pop(0)])
    for e in sorted(above + below, key=lambda x: (x.duration_s, x.utterance_id)):
        step([e])
    if cur:
        out.append(_finish(f"long{len(out):04d}", cur, True))
    return out


def simulate_samespeaker(entries: List[ManifestEntry],
                         target_s: float = 120.0) -> List[LongFormEntry]:
    """Concatenate each speaker's utterances in corpus order, closing an
    entry once it reaches ``target_s``."""
    groups: "OrderedDict[str, List[ManifestEntry]]" = OrderedDict()
    for e in entries:
        groups.setdefault(e.speaker_id, []).append(e)
    out = []
    for spk, group in groups.items():
        cur, total = [], 0.0
        for e in group:
            cur.append(e)
            total += e.duration_s
            if total >= target_s:
                out.append(_finish(f"{spk}_long{len(out):04d}", cur, False, spk))
                cur, total = [], 0.0
        if cur:
            out.append(_finish(f"{spk}_long{len(out):04d}", cur, True, spk))
    return out


def concat_audio(long: LongFormEntry, sources: Mapping[str, ManifestEntry],
                 audio_store: Optional[Mapping[str, AudioBuffer]] = None
                 ) -> Tuple[AudioBuffer, List[Word]]:
    """Sample-exact concatenation with reference words moved to long-form time."""
    pieces, words = [], []
    sr = None
    offset_n = 0
    for uid in long.source_ids:
        entry = sources[uid]
        audio = audio_store[uid] if audio_store is not None else load_audio(entry.audio_path)
        if sr is None:
            sr = audio.sample_rate
        elif audio.sample_rate != sr:
            raise ValueError(f"{uid}: sample rate {audio.sample_rate} != {sr}")
        off = offset_n / sr
        words.extend(Word(w.token, w.start_s + off, w.end_s + off) for w in entry.words())
        pieces.append(audio.samples)
        offset_n += len(audio.samples)
    return AudioBuffer(np.concatenate(pieces), sr), words


def write_jsonl(path, records: Iterable) -> None:
    with open(path, "w") as f:
        for r in records:
            doc = asdict(r) if hasattr(r, "__dataclass_fields__") else r
            f.write(json.dumps(doc) + "\n")


def read_jsonl(path) -> List[Dict]:
    with open(path) as f:
        return [json.loads(line) for line in f
                if line.strip() and not line.startswith("#")]


def read_manifest(path) -> List[ManifestEntry]:
    out = []
    for d in read_jsonl(path):
        if d.get("word_times") is not None:
            d["word_times"] = [tuple(t) for t in d["word_times"]]
        out.append(ManifestEntry(**d))
    return out


def zipf_vocabulary(n_types: int, seed: int = 0) -> Tuple[List[str], np.ndarray]:
    """Random lowercase word types with rank-1/k sampling probabilities."""
    rng = np.random.default_rng(seed)
    letters = list(string.ascii_lowercase)
    types: List[str] = []
    seen = set()
    while len(types) < n_types:
        w = "".join(rng.choice(letters, int(rng.integers(2, 10))))
        if w not in seen:
            seen.add(w)
            types.append(w)
    p = 1.0 / np.arange(1, n_types + 1)
    return types, p / p.sum()


def synthetic_sources(out_dir: str, n_sources: int, seed: int = 0, sample_rate: int = 16000,
                      n_speakers: int = 4, min_gap_s: float = 0.15,
                      vocab_size: Optional[int] = 1000,
                      ) -> Tuple[List[ManifestEntry], Dict[str, AudioBuffer]]:
    """Short synthetic utterances (noise-burst words, silent gaps >= ``min_gap_s``)
    written as WAVE files under ``out_dir``.

    Word labels are drawn from a Zipfian vocabulary of ``vocab_size`` types,
    so common words recur the way function words do. ``vocab_size=None``
    keeps the per-utterance ``w<k>`` labels, which repeat whole n-grams
    across concatenated sources.
    """
    rng = np.random.default_rng(seed)
    vocab = zipf_vocabulary(vocab_size, seed) if vocab_size else None
    os.makedirs(out_dir, exist_ok=True)
    entries, store = [], {}
    for k in range(n_sources):
        n_words = int(rng.integers(4, 16))
        word_dur = float(rng.uniform(0.25, 0.55))
        gap = float(rng.uniform(min_gap_s, 0.4))
        pad = 0.5 * gap
        audio, words = synth_utterance(n_words, word_dur, gap, sample_rate,
                                       seed=int(rng.integers(2 ** 31)), pad_s=pad)
        tokens = [w.token for w in words]
        if vocab is not None:
            tokens = [vocab[0][i] for i in rng.choice(len(vocab[0]), n_words, p=vocab[1])]
        uid = f"src{k:05d}"
        path = os.path.join(out_dir, uid + ".wav")
        save_audio(path, audio)
        # reload so stored samples match what is on disk
        audio = load_audio(path)
        entries.append(ManifestEntry(uid, path, tokens,
                                     f"spk{int(rng.integers(n_speakers))}", audio.duration_s,
                                     [(w.start_s, w.end_s) for w in words]))
        store[uid] = audio
    return entries, store


def realize_long_form(longs: List[LongFormEntry], sources: List[ManifestEntry],
                      out_dir: str, audio_store: Optional[Mapping[str, AudioBuffer]] = None
                      ) -> List[ManifestEntry]:
    """Write each long-form entry's audio and return a manifest for it."""
    os.makedirs(out_dir, exist_ok=True)
    by_id = {e.utterance_id: e for e in sources}
    out = []
    for lf in longs:
        audio, words = concat_audio(lf, by_id, audio_store)
        path = os.path.join(out_dir, lf.long_id + ".wav")
        save_audio(path, audio)
        out.append(ManifestEntry(lf.long_id, path, [w.token for w in words], lf.speaker_id,
                                 audio.duration_s, [(w.start_s, w.end_s) for w in words],
                                 empty_ok=not words))
    return out


def build_synthetic_longform(out_dir: str, n_long: int = 20, target_s: float = 120.0,
                             seed: int = 0, method: str = "alternating",
                             vocab_size: Optional[int] = 1000, sample_rate: int = 16000
                             ) -> Tuple[List[ManifestEntry], Dict[str, AudioBuffer],
                                        List[LongFormEntry]]:
    """Synthetic sources -> simulated long-form set with ``n_long`` full entries.

    Returns the long-form manifest, its audio keyed by utterance id and the
    LongFormEntry records (for provenance)."""
    if method not in ("alternating", "samespeaker"):
        raise ValueError(f"unknown method {method!r}")
    n_src = int(math.ceil(1.5 * n_long * target_s / 6.0))
    while True:
        src, store = synthetic_sources(os.path.join(out_dir, "sources"), n_src, seed,
                                       sample_rate, vocab_size=vocab_size)
        if method == "alternating":
            longs = simulate_alternating(src, target_s)
        else:
            longs = simulate_samespeaker(src, target_s)
        full = [lf for lf in longs if not lf.partial]
        if len(full) >= n_long:
            break
        n_src *= 2
    full = full[:n_long]
    manifest = realize_long_form(full, src, os.path.join(out_dir, "long"), store)
    audio = {m.utterance_id: load_audio(m.audio_path) for m in manifest}
    return manifest, audio, full
