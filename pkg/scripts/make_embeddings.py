"""Regenerate the fixture embedding table for the kitchen catalog.

The table imitates what a pre-trained sentence encoder produces for short
object descriptions: name tokens dominate, color and intent words contribute
weakly, plus a small deterministic per-key jitter. The output is checked in
as src/safealt/data/embeddings.json; rerun this only to change the fixture.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from safealt.similarity import GoalCatalog, load_intents, packaged_data_path

DIM = 16
CATEGORY_WORDS = ["mug", "bowl", "glass", "flute", "tumbler", "pitcher", "teapot", "ramekin"]
COLOR_WORDS = ["red", "white", "brown", "blue"]
INTENT_KEYWORDS = {
    "color_sort": ["red", "white", "brown", "blue", "clear"],
    "microwave_soup": ["bowl", "soup", "mug", "ramekin"],
    "formal_wine": ["wine", "champagne", "stemmed", "flute"],
}

CATEGORY_W = 1.0
COLOR_W = 0.55
INTENT_W = 0.35
JITTER_W = 0.15


def _jitter(key: str, size: int) -> np.ndarray:
    digest = hashlib.sha256(key.encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.uniform(-1.0, 1.0, size)


def embed(entry, intent_id: str, intent_text: str) -> np.ndarray:
    words = (entry.name + " " + entry.description).lower().split()
    vec = np.zeros(DIM)
    for i, w in enumerate(CATEGORY_WORDS):
        if w in words:
            vec[i] += CATEGORY_W
    for i, w in enumerate(COLOR_WORDS):
        if w in words:
            vec[8 + i] += COLOR_W
    overlap = sum(1 for kw in INTENT_KEYWORDS[intent_id] if kw in words)
    vec[12] += INTENT_W * overlap
    vec[13] += INTENT_W * len(set(words) & set(intent_text.lower().split()))
    vec[12:] += JITTER_W * _jitter(f"{entry.id}|{intent_id}", 4)
    vec += 0.05 * _jitter(f"base|{entry.id}|{intent_id}", DIM)
    return vec / np.linalg.norm(vec)


def main():
    catalog = GoalCatalog.load(packaged_data_path("catalog.json"))
    intents = load_intents(packaged_data_path("intents.json"))
    entries = {}
    for e in catalog.entries:
        for intent in intents.values():
            vec = embed(e, intent.id, intent.text)
            entries[f"{e.id}/{intent.id}"] = [round(float(v), 6) for v in vec]
    out = {"dim": DIM, "entries": entries}
    path = Path(__file__).resolve().parent.parent / "src" / "safealt" / "data" / "embeddings.json"
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {len(entries)} embeddings to {path}")


if __name__ == "__main__":
    main()
