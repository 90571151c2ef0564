"""A hermetic world: class-colored PNG folders plus a random checkpoint.

No downloads.  The checkpoint is a seeded, untrained ResNet-18; tests
here check plumbing (shapes, order, determinism, formats), not detector
quality, so random weights are exactly enough.
"""

import numpy as np
import pytest
import torch
from PIL import Image

from oodd_extract.model import build_model


def _write_images(root, class_names, per_class, width, height, rng, shift):
    for ci, name in enumerate(class_names):
        class_dir = root / name
        class_dir.mkdir(parents=True)
        for j in range(per_class):
            base = np.zeros((height, width, 3), dtype=np.uint8)
            base[..., ci % 3] = 60 * (ci + 1) + shift
            noise = rng.integers(0, 60, size=base.shape).astype(np.uint8)
            Image.fromarray(base + noise).save(class_dir / f"img_{j:03d}.png")


@pytest.fixture(scope="session")
def world(tmp_path_factory):
    base = tmp_path_factory.mktemp("extract_world")
    rng = np.random.default_rng(99)
    _write_images(base / "id_train", ["apple", "boat", "cat"], 10, 32, 32, rng, shift=0)
    _write_images(base / "id_test", ["apple", "boat", "cat"], 4, 32, 32, rng, shift=0)
    _write_images(base / "ood_test", ["zebra"], 8, 32, 32, rng, shift=120)
    _write_images(base / "odd_sizes", ["apple"], 3, 48, 40, rng, shift=0)

    torch.manual_seed(0)
    ckpt = base / "ckpt.pt"
    torch.save(build_model(num_classes=3).state_dict(), ckpt)
    return {
        "dir": base,
        "ckpt": str(ckpt),
        "id_train": f"folder:{base / 'id_train'}",
        "id_test": f"folder:{base / 'id_test'}",
        "ood_test": f"folder:{base / 'ood_test'}",
        "odd_sizes": f"folder:{base / 'odd_sizes'}",
        "n_train": 30,
        "n_test": 12,
        "n_ood": 8,
    }
