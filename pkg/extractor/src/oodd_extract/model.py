"""CIFAR-scale ResNet-18 and checkpoint loading.

The backbone is torchvision's resnet18 with the standard small-image
stem swap: 3x3 stride-1 first conv and no maxpool, so 32x32 inputs keep
enough resolution.  The penultimate representation is the 512-wide
global-average-pool output feeding the classifier head.
"""

import os

import torch
from torch import nn
from torchvision.models import resnet18

from .errors import CheckpointLoadError, CheckpointMissingError

FEATURE_WIDTH = 512

# wrapper prefixes seen in the wild on classifier checkpoints
_STRIP_PREFIXES = ("module.", "backbone.", "network.")


def build_model(num_classes: int) -> nn.Module:
    net = resnet18(weights=None, num_classes=num_classes)
    net.conv1 = nn.Conv2d(3, 64, kernel_size=3, stride=1, padding=1, bias=False)
    net.maxpool = nn.Identity()
    return net


def _unwrap_state_dict(blob):
    if isinstance(blob, dict):
        for key in ("state_dict", "model", "net"):
            inner = blob.get(key)
            if isinstance(inner, dict) and inner:
                return inner
    if not isinstance(blob, dict) or not blob:
        raise CheckpointLoadError("checkpoint holds no state dict")
    return blob


def _normalize_keys(state):
    cleaned = {}
    for key, value in state.items():
        for prefix in _STRIP_PREFIXES:
            if key.startswith(prefix):
                key = key[len(prefix):]
                break
        cleaned[key] = value
    return cleaned


def load_checkpoint(path: str) -> nn.Module:
    """Load a ResNet-18 classifier checkpoint into eval mode on CPU.

    The class count is inferred from the fc weight.  Key prefixes from
    DataParallel or wrapper modules are stripped; anything that still
    does not line up is a hard error, not a silent partial load.
    """
    if not os.path.isfile(path):
        raise CheckpointMissingError(f"checkpoint not found: {path}")
    blob = torch.load(path, map_location="cpu", weights_only=True)
    state = _normalize_keys(_unwrap_state_dict(blob))
    fc_weight = state.get("fc.weight")
    if fc_weight is None or fc_weight.ndim != 2:
        raise CheckpointLoadError("checkpoint has no fc.weight classifier head")
    if fc_weight.shape[1] != FEATURE_WIDTH:
        raise CheckpointLoadError(
            f"classifier head expects width {fc_weight.shape[1]}, model has {FEATURE_WIDTH}"
        )
    model = build_model(num_classes=fc_weight.shape[0])
    missing, unexpected = model.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise CheckpointLoadError(
            f"checkpoint does not fit ResNet-18: missing {sorted(missing)[:4]}, "
            f"unexpected {sorted(unexpected)[:4]}"
        )
    model.eval()
    return model


@torch.no_grad()
def forward_features(model: nn.Module, batch: torch.Tensor):
    """Penultimate features and logits for one image batch.

    Mirrors torchvision's documented resnet forward, stopping before fc
    for the feature view.
    """
    x = model.conv1(batch)
    x = model.bn1(x)
    x = model.relu(x)
    x = model.maxpool(x)
    x = model.layer1(x)
    x = model.layer2(x)
    x = model.layer3(x)
    x = model.layer4(x)
    x = model.avgpool(x)
    features = torch.flatten(x, 1)
    logits = model.fc(features)
    return features, logits
