"""Frozen-backbone AlexNet harness for visual-search datasets.

Loads a dataset manifest (JSON Lines), replaces AlexNet's 1000-way output
layer with a fresh present/absent layer (4096 x 2 weights + 2 biases =
8194 trainable parameters), trains only that layer with SGD, and writes
test-split predictions as a response CSV the analysis pipeline consumes
directly. The backbone stays frozen; a weight fingerprint taken before and
after training enforces that.

The original protocol froze the backbone by giving it a 1e-20 base
learning rate while the new layer's rate factor selected 1e-4. Explicit
freezing (requires_grad=False) is the default here because it is exact;
pass paper_freeze_trick=True to reproduce the learning-rate construction.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import torch
from PIL import Image, UnidentifiedImageError
from torch import nn
from torch.utils.data import DataLoader, Dataset
from torchvision.models import alexnet

HEAD_IN_FEATURES = 4096
NUM_CLASSES = 2  # index 0 = absent, 1 = present
TRAINABLE_PARAMETERS = HEAD_IN_FEATURES * NUM_CLASSES + NUM_CLASSES

# torchvision's canonical ImageNet normalization for AlexNet inputs
CHANNEL_MEAN = (0.485, 0.456, 0.406)
CHANNEL_STD = (0.229, 0.224, 0.225)

PRETRAINED_FILE = "alexnet-owt-7be5be79.pth"
PRETRAINED_URL = f"https://download.pytorch.org/models/{PRETRAINED_FILE}"

MANIFEST_FIELDS = ("trial_id", "split", "task", "difficulty", "set_size",
                   "target_present", "image_path", "seed")


class HarnessError(Exception):
    """Base class for harness failures."""


class PretrainedWeightsError(HarnessError):
    """Pretrained backbone weights could not be found."""


class ManifestError(HarnessError):
    """Malformed or inconsistent manifest."""


class FrozenBackboneError(HarnessError):
    """The backbone changed during training, violating the frozen contract."""


@dataclass
class HarnessConfig:
    manifest: Path
    backbone: str = "alexnet"
    head_lr: float = 1e-4
    base_lr: float = 1e-20  # backbone rate in paper_freeze_trick mode
    epochs: int = 10
    minibatch: int = 100
    seed: int = 0
    paper_freeze_trick: bool = False
    pretrained: bool = True
    weights_path: Path | None = None
    device: str = "cpu"
    momentum: float = 0.9


@dataclass
class TrialRow:
    trial_id: str
    split: str
    target_present: bool
    image_path: Path


@dataclass
class TrainingLog:
    epoch_losses: list[float] = field(default_factory=list)

    def write(self, path: Path) -> None:
        doc = {"epoch_losses": self.epoch_losses}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: Path) -> list[TrialRow]:
    """Parse the dataset manifest; image paths resolve relative to it."""
    path = Path(path)
    root = path.parent
    rows: list[TrialRow] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            missing = [k for k in MANIFEST_FIELDS if k not in obj]
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing fields {missing}")
            if obj["split"] not in ("train", "test"):
                raise ManifestError(f"{path}:{lineno}: bad split {obj['split']!r}")
            if not isinstance(obj["target_present"], bool):
                raise ManifestError(f"{path}:{lineno}: target_present must be a boolean")
            if obj["trial_id"] in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate trial_id {obj['trial_id']!r}")
            seen.add(obj["trial_id"])
            rows.append(TrialRow(str(obj["trial_id"]), obj["split"],
                                 obj["target_present"], root / obj["image_path"]))
    if not rows:
        raise ManifestError(f"{path}: empty manifest")
    return rows


class SearchStimuli(Dataset):
    """Loads stimulus PNGs as normalized float tensors with 0/1 labels."""

    def __init__(self, rows: list[TrialRow]):
        self.rows = rows
        self._mean = torch.tensor(CHANNEL_MEAN).view(3, 1, 1)
        self._std = torch.tensor(CHANNEL_STD).view(3, 1, 1)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, index: int):
        row = self.rows[index]
        try:
            with Image.open(row.image_path) as img:
                img = img.convert("RGB")
                pixels = torch.frombuffer(bytearray(img.tobytes()), dtype=torch.uint8)
                tensor = pixels.view(img.height, img.width, 3).permute(2, 0, 1)
        except (OSError, UnidentifiedImageError) as exc:
            raise HarnessError(f"cannot decode image {row.image_path}: {exc}") from exc
        x = tensor.float().div_(255.0).sub_(self._mean).div_(self._std)
        return x, int(row.target_present)


def _resolve_pretrained(config: HarnessConfig) -> Path:
    if config.weights_path is not None:
        p = Path(config.weights_path)
        if not p.is_file():
            raise PretrainedWeightsError(
                f"pretrained weights file not found: {p}\n"
                f"Download {PRETRAINED_URL} and pass its path via --weights.")
        return p
    cache = Path(torch.hub.get_dir()) / "checkpoints" / PRETRAINED_FILE
    if cache.is_file():
        return cache
    raise PretrainedWeightsError(
        "pretrained AlexNet weights are not available.\n"
        f"Download them from {PRETRAINED_URL} and either place the file at\n"
        f"{cache}\nor pass its path via --weights. "
        "Use --no-pretrained for a randomly initialized backbone "
        "(structure tests only; it will not reproduce the reported results).")


def build_model(config: HarnessConfig) -> nn.Module:
    """AlexNet with a fresh 2-way output layer; backbone frozen by default.

    Raises:
        PretrainedWeightsError: pretrained weights requested but missing.
    """
    if config.backbone != "alexnet":
        raise HarnessError(f"unsupported backbone {config.backbone!r}")
    torch.manual_seed(config.seed)  # covers head init and, when
    model = alexnet(weights=None)   # --no-pretrained, the backbone too
    if config.pretrained:
        weights_file = _resolve_pretrained(config)
        state = torch.load(weights_file, map_location="cpu", weights_only=True)
        model.load_state_dict(state)

    head = nn.Linear(HEAD_IN_FEATURES, NUM_CLASSES)
    model.classifier[6] = head

    if not config.paper_freeze_trick:
        for name, param in model.named_parameters():
            param.requires_grad = name.startswith("classifier.6.")
    model.eval()  # inference-mode dropout unless training explicitly
    return model.to(config.device)


def head_parameters(model: nn.Module) -> list[nn.Parameter]:
    return list(model.classifier[6].parameters())


def backbone_parameters(model: nn.Module) -> list[tuple[str, nn.Parameter]]:
    return [(name, p) for name, p in model.named_parameters()
            if not name.startswith("classifier.6.")]


def trainable_parameter_count(model: nn.Module, config: HarnessConfig | None = None) -> int:
    """Number of parameters the optimizer can effectively move.

    In paper_freeze_trick mode every parameter has requires_grad=True, but
    only the head's receive a usable learning rate, so the effective count
    is the head's 8194 either way.
    """
    if config is not None and config.paper_freeze_trick:
        return sum(p.numel() for p in head_parameters(model))
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def backbone_fingerprint(model: nn.Module) -> str:
    """SHA-256 over every non-head parameter, in name order."""
    digest = hashlib.sha256()
    for name, param in sorted(backbone_parameters(model)):
        digest.update(name.encode())
        digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def _make_optimizer(model: nn.Module, config: HarnessConfig) -> torch.optim.Optimizer:
    if config.paper_freeze_trick:
        groups = [
            {"params": [p for _, p in backbone_parameters(model)],
             "lr": config.base_lr},
            {"params": head_parameters(model), "lr": config.head_lr},
        ]
        return torch.optim.SGD(groups, momentum=config.momentum)
    return torch.optim.SGD(head_parameters(model), lr=config.head_lr,
                           momentum=config.momentum)


def train_head(model: nn.Module, config: HarnessConfig,
               rows: list[TrialRow], log_path: Path | None = None) -> TrainingLog:
    """SGD over the train split with seeded shuffling and cross-entropy loss.

    The backbone fingerprint is checked after training; any change raises
    FrozenBackboneError.

    Returns the per-epoch mean training loss (also written to log_path).
    """
    train_rows = [r for r in rows if r.split == "train"]
    if not train_rows and config.epochs > 0:
        raise ManifestError("manifest has no train rows")
    fingerprint_before = backbone_fingerprint(model)

    torch.manual_seed(config.seed)
    loader = DataLoader(SearchStimuli(train_rows),
                        batch_size=config.minibatch, shuffle=True,
                        num_workers=0,
                        generator=torch.Generator().manual_seed(config.seed))
    optimizer = _make_optimizer(model, config)
    criterion = nn.CrossEntropyLoss()

    log = TrainingLog()
    model.train()
    for _ in range(config.epochs):
        total, count = 0.0, 0
        for images, labels in loader:
            images = images.to(config.device)
            labels = labels.to(config.device)
            optimizer.zero_grad()
            loss = criterion(model(images), labels)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(labels)
            count += len(labels)
        log.epoch_losses.append(total / count)
    model.eval()

    if backbone_fingerprint(model) != fingerprint_before:
        raise FrozenBackboneError(
            "backbone weights changed during training; the frozen-backbone "
            "contract is violated")
    if log_path is not None:
        log.write(log_path)
    return log


def evaluate_to_responses(model: nn.Module, config: HarnessConfig,
                          rows: list[TrialRow]) -> list[tuple[str, str]]:
    """Argmax present/absent decision per test row, in manifest order.

    Raises:
        ManifestError: no test rows to evaluate (aborts before writing).
    """
    test_rows = [r for r in rows if r.split == "test"]
    if not test_rows:
        raise ManifestError("manifest has no test rows")
    loader = DataLoader(SearchStimuli(test_rows), batch_size=config.minibatch,
                        shuffle=False, num_workers=0)
    predictions: list[int] = []
    model.eval()
    with torch.no_grad():
        for images, _ in loader:
            logits = model(images.to(config.device))
            predictions.extend(int(k) for k in logits.argmax(dim=1))
    return [(row.trial_id, "present" if pred == 1 else "absent")
            for row, pred in zip(test_rows, predictions)]


def write_responses(records: list[tuple[str, str]], path: Path) -> None:
    """Response CSV in the analysis pipeline's exact format."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("trial_id", "response"))
        writer.writerows(records)


def train_eval(config: HarnessConfig, out_path: Path,
               log_path: Path | None = None) -> list[tuple[str, str]]:
    """Full pass: build, train the head, evaluate, write the response CSV."""
    rows = read_manifest(config.manifest)
    model = build_model(config)
    train_head(model, config, rows, log_path=log_path)
    records = evaluate_to_responses(model, config, rows)
    write_responses(records, out_path)
    return records
