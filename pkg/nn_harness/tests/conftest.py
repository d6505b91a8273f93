"""Shared fixture: a small synthetic dataset in the manifest format.

Present images carry a bright square, absent images a dim one, so even a
randomly initialized frozen backbone yields linearly separable features
and the head can learn within a few epochs.
"""

import json

import numpy as np
import pytest
from PIL import Image

SET_SIZES = (1, 2, 4, 8)


def _image(present: bool, rng: np.random.Generator) -> np.ndarray:
    img = np.zeros((227, 227, 3), dtype=np.uint8)
    x = int(rng.integers(40, 140))
    y = int(rng.integers(40, 140))
    value = 220 if present else 50
    img[y:y + 50, x:x + 50] = value
    return img


def make_dataset(root, n_train_per_side=24, n_test_per_side=16, seed=0):
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    counters = {}
    for split, per_side in (("train", n_train_per_side), ("test", n_test_per_side)):
        for present in (True, False):
            for k in range(per_side):
                i = len(rows)
                trial_id = f"mini-{i:04d}"
                name = f"{trial_id}.png"
                Image.fromarray(_image(present, rng), mode="RGB").save(root / name)
                rows.append({
                    "trial_id": trial_id,
                    "split": split,
                    "task": "luminance",
                    "difficulty": 1,
                    "set_size": SET_SIZES[k % 4],
                    "target_present": present,
                    "image_path": name,
                    "seed": i,
                })
    manifest = root / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    return manifest, rows


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("mini_dataset")
    manifest, rows = make_dataset(root)
    return manifest, rows
