"""The two extraction pipelines: multi-view crops and plain features.

Both walk a dataset in its canonical index order, run the checkpointed
classifier on CPU in eval mode, and write the engine's binary files.
Crop extraction emits n*M feature rows sample-major (all views of
sample i before sample i+1) plus a per-view max-softmax confidence
sidecar and a per-sample label sidecar.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torchvision import datasets as tvd
from torchvision.transforms import functional as tvf

from .crops import CropGeometry, crop_views
from .errors import DatasetMissingError, FormatError
from .formats import write_confidences, write_features, write_labels
from .model import forward_features, load_checkpoint

_TORCHVISION_SETS = {
    "cifar10": tvd.CIFAR10,
    "cifar100": tvd.CIFAR100,
    "mnist": tvd.MNIST,
    "svhn": tvd.SVHN,
}


@dataclass(frozen=True)
class ExtractionJob:
    """Everything one extraction run needs; geometry defaults are config.

    crops defaults to the standard four views.  normalize is an optional
    ((mean,)*3, (std,)*3) pair applied after conversion to [0, 1]; pass
    the checkpoint's training statistics for faithful features.
    """

    dataset: str
    split: str
    checkpoint: str
    crops: int = 4
    geometry: CropGeometry = field(default_factory=CropGeometry)
    out_dir: str = "."
    batch_size: int = 256
    seed: int = 0
    data_root: str = "data"
    normalize: tuple | None = None
    out_name: str | None = None

    def __post_init__(self):
        if self.crops < 1:
            raise FormatError(f"crops must be >= 1, got {self.crops}")
        if self.batch_size < 1:
            raise FormatError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def stem(self) -> str:
        if self.out_name:
            return self.out_name
        if self.dataset.startswith("folder:"):
            base = os.path.basename(os.path.normpath(self.dataset[len("folder:"):]))
            return f"{base}_{self.split}"
        return f"{self.dataset}_{self.split}"


def load_dataset(name, split, data_root):
    """Resolve a dataset name to an indexable (image, label) source.

    Known names map to torchvision datasets (never downloading);
    "folder:<path>" and unknown names resolve as class-per-directory
    image folders, the latter under <data_root>/<name>/<split>.
    """
    lowered = name.lower()
    try:
        if lowered in _TORCHVISION_SETS:
            cls = _TORCHVISION_SETS[lowered]
            if lowered == "svhn":
                return cls(os.path.join(data_root, lowered), split=split, download=False)
            return cls(os.path.join(data_root, lowered), train=(split == "train"),
                       download=False)
        if name.startswith("folder:"):
            return tvd.ImageFolder(name[len("folder:"):])
        return tvd.ImageFolder(os.path.join(data_root, name, split))
    except (OSError, RuntimeError, ValueError) as exc:
        raise DatasetMissingError(f"dataset {name!r} ({split}) not available: {exc}") from None


def _to_tensor(image, normalize):
    tensor = image if isinstance(image, torch.Tensor) else tvf.to_tensor(image)
    if tensor.shape[0] == 1:  # grayscale sources feed a 3-channel stem
        tensor = tensor.expand(3, -1, -1)
    if normalize is not None:
        mean, std = normalize
        tensor = tvf.normalize(tensor, list(mean), list(std))
    return tensor


def _run_model(model, stacked, batch_size):
    feats = []
    confs = []
    for start in range(0, stacked.shape[0], batch_size):
        chunk = stacked[start:start + batch_size]
        features, logits = forward_features(model, chunk)
        feats.append(features.numpy().astype(np.float32, copy=False))
        probs = torch.softmax(logits, dim=1)
        confs.append(probs.max(dim=1).values.numpy().astype(np.float32, copy=False))
    return np.concatenate(feats), np.concatenate(confs)


def extract_crops(job: ExtractionJob) -> dict:
    """Write <stem>_crops.oodf, <stem>_confs.oodc, <stem>_labels.oodl."""
    model = load_checkpoint(job.checkpoint)
    data = load_dataset(job.dataset, job.split, job.data_root)
    rng = np.random.default_rng(job.seed)
    n = len(data)
    views = []
    labels = np.empty(n, dtype=np.int32)
    for i in range(n):
        image, label = data[i]
        tensor = _to_tensor(image, job.normalize)
        views.append(crop_views(tensor, job.crops, rng, job.geometry))
        labels[i] = int(label)
    stacked = torch.cat(views)  # (n*M, C, S, S) sample-major
    features, conf_flat = _run_model(model, stacked, job.batch_size)
    os.makedirs(job.out_dir, exist_ok=True)
    paths = {
        "crops": os.path.join(job.out_dir, f"{job.stem}_crops.oodf"),
        "confs": os.path.join(job.out_dir, f"{job.stem}_confs.oodc"),
        "labels": os.path.join(job.out_dir, f"{job.stem}_labels.oodl"),
    }
    write_features(features, paths["crops"])
    write_confidences(np.clip(conf_flat.reshape(n, job.crops), 0.0, 1.0), paths["confs"])
    write_labels(labels, paths["labels"])
    return paths


def extract_plain(job: ExtractionJob) -> dict:
    """Write <stem>.oodf and <stem>.labels.oodl, one row per image."""
    model = load_checkpoint(job.checkpoint)
    data = load_dataset(job.dataset, job.split, job.data_root)
    n = len(data)
    side = job.geometry.size
    tensors = []
    labels = np.empty(n, dtype=np.int32)
    for i in range(n):
        image, label = data[i]
        tensor = _to_tensor(image, job.normalize)
        if tensor.shape[1] != side or tensor.shape[2] != side:
            tensor = tvf.resize(tensor, [side, side], antialias=True)
        tensors.append(tensor)
        labels[i] = int(label)
    features, _ = _run_model(model, torch.stack(tensors), job.batch_size)
    os.makedirs(job.out_dir, exist_ok=True)
    paths = {
        "features": os.path.join(job.out_dir, f"{job.stem}.oodf"),
        "labels": os.path.join(job.out_dir, f"{job.stem}.labels.oodl"),
    }
    write_features(features, paths["features"])
    write_labels(labels, paths["labels"])
    return paths
