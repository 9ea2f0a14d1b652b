"""
From a raw click log to training examples
=========================================

Walks the whole data path: a messy event file goes in, dense prefix
examples come out.  Run it from the repo root; it writes nothing
outside a temp directory.
"""

import tempfile
from pathlib import Path

import numpy as np

from sessrec.dataio import (ingest, prefix_augment, preprocess, split, stats,
                            write_examples)

# fabricate a click log: 60 sessions over 12 products, with some junk
# lines of the kind real exports contain
rng = np.random.default_rng(7)
lines = []
t = 0.0
for s in range(60):
    for _ in range(int(rng.integers(1, 7))):
        lines.append(f"sess{s},{t:.0f},prod{rng.integers(0, 12)}")
        t += 1.0
lines.insert(10, "sess3,notatime,prod1")       # bad timestamp
lines.insert(25, "only_two_fields,99")          # short row
raw = Path(tempfile.mkdtemp()) / "clicks.csv"
raw.write_text("\n".join(lines) + "\n", encoding="utf-8")

events, n_bad = ingest(raw)
print(f"ingested {len(events)} events, skipped {n_bad} malformed lines")

# preprocessing drops rare items and too-short sessions until both
# conditions hold at once, then builds a dense item catalog
sessions, catalog = preprocess(events, min_item_freq=3, min_session_len=2)
print(f"kept {len(sessions)} sessions over {catalog.count} items")
print("catalog maps raw ids to dense indices, e.g.",
      dict(list(catalog.item_to_index.items())[:3]))

# a time split: everything up to the boundary trains, the rest tests;
# test sessions may only mention items the training side knows
train_sessions, test_sessions = split(sessions, boundary=t * 0.8)
print(f"time split: {len(train_sessions)} train / "
      f"{len(test_sessions)} test sessions")

# each session of length n yields n-1 (prefix, next item) examples
train_examples = prefix_augment(train_sessions)
test_examples = prefix_augment(test_sessions)
print(f"prefix augmentation: {len(train_examples)} train examples")
print("one example:", train_examples[0].prefix, "->",
      train_examples[0].target)

st = stats(train_sessions, test_sessions, catalog)
print(f"corpus stats: {st.interactions} interactions, "
      f"avg length {st.avg_length:.2f}")

out = raw.parent / "train.jsonl"
write_examples(out, train_examples)
print(f"examples serialize to JSONL, one object per line -> {out}")
print(out.read_text().splitlines()[0])
