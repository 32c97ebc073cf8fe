"""Dataset splitting, the SGD training loop, and batch prediction.

Optimization is plain mini-batch gradient descent with momentum on the
per-bin distribution MSE. The learning rate starts at ``lr0`` and is
multiplied by ``lr_decay_factor`` whenever validation loss has not improved
for ``plateau_patience`` consecutive epochs; the returned weights are those
of the epoch with the lowest validation loss.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from . import rasters
from .corpus import Corpus, ScoreDistribution
from .errors import DivergedLoss, EmptyDataset, EmptySplit, ShapeMismatch
from .nn.network import DenseScoreNet, NetworkSpec, Parameters

RATIO_TOL = 1e-9

# Pixels are mapped to the symmetric range +-(PIXEL_CONTRAST/2) around zero.
# The per-bin squared-error loss through the exponential normalizer produces
# very small logit gradients, so desk-scale SGD at the protocol learning rate
# needs this much input contrast to make progress within its epoch budget.
PIXEL_CONTRAST = 24.0


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 100
    lr0: float = 1e-5
    lr_decay_factor: float = 0.1
    plateau_patience: int = 5
    momentum: float = 0.9
    seed: int = 0
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if len(self.split) != 3 or any(r <= 0 for r in self.split):
            raise ValueError("split must be three positive ratios")
        if abs(sum(self.split) - 1.0) > RATIO_TOL:
            raise ValueError(f"split ratios must sum to 1, got {sum(self.split)!r}")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must be in (0, 1]")

    @classmethod
    def from_kv_file(cls, path: str | os.PathLike, **overrides) -> "TrainConfig":
        """Flat key=value text config; explicit keyword overrides win."""
        values: dict = {}
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
        parsed: dict = {}
        for f in fields(cls):
            if f.name not in values:
                continue
            raw_value = values.pop(f.name)
            if f.name == "split":
                parsed["split"] = tuple(float(v) for v in raw_value.split(","))
            elif f.name in ("batch_size", "epochs", "plateau_patience", "seed"):
                parsed[f.name] = int(raw_value)
            else:
                parsed[f.name] = float(raw_value)
        if values:
            raise ValueError(f"unknown config keys: {sorted(values)}")
        parsed.update(overrides)
        config = cls(**parsed)
        config.validate()
        return config


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
            for rec in self.epochs:
                writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_loss), repr(rec.lr)])


def split_dataset(
    image_ids: Sequence[str], ratios: Sequence[float], seed: int
) -> tuple[list[str], list[str], list[str]]:
    """Deterministic disjoint train/validation/test partition.

    Validation and test sizes are floor allocations; the remainder goes to
    train.
    """
    ids = list(image_ids)
    if not ids:
        raise EmptyDataset("cannot split an empty id list")
    if len(set(ids)) != len(ids):
        raise ValueError("image ids must be unique")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > RATIO_TOL:
        raise ValueError(f"bad split ratios {ratios!r}")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n = len(order)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def load_image_batch(corpus: Corpus, image_ids: Sequence[str], side: int) -> np.ndarray:
    """Decode rasters into a zero-centered float32 (N, 3, side, side) batch."""
    batch = np.empty((len(image_ids), 3, side, side), dtype=np.float32)
    for i, image_id in enumerate(image_ids):
        record = corpus.image(image_id)
        pixels = rasters.read_raster(corpus.resolve_pixels(record))
        if pixels.shape != (side, side, 3):
            raise ShapeMismatch(
                f"image {image_id!r} raster is {pixels.shape[1]}x{pixels.shape[0]}, "
                f"the network expects {side}x{side}"
            )
        batch[i] = (pixels.transpose(2, 0, 1).astype(np.float32) / 255.0 - 0.5) * PIXEL_CONTRAST
    return batch


def _targets_for(corpus: Corpus, image_ids: Sequence[str]) -> np.ndarray:
    return np.array([corpus.distribution_of(i).p for i in image_ids], dtype=np.float32)


def evaluate_loss(
    net: DenseScoreNet, params: Parameters, x: np.ndarray, targets: np.ndarray, batch_size: int
) -> float:
    """Whole-set per-bin MSE, accumulated in float64."""
    sq_sum = 0.0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        p = net.forward(params, xb).astype(np.float64)
        sq_sum += float(((p - targets[start : start + batch_size]) ** 2).sum())
    return sq_sum / (x.shape[0] * targets.shape[1])


BatchHook = Callable[[int, np.ndarray, np.ndarray, float], None]


def train(
    corpus: Corpus,
    config: TrainConfig,
    spec: NetworkSpec,
    min_raters: int = 15,
    on_batch: BatchHook | None = None,
) -> tuple[Parameters, TrainHistory]:
    """Train on the corpus's qualified images; returns best-validation weights.

    ``on_batch(epoch, predictions, targets, loss)`` is invoked after every
    optimizer step with the predictions the loss was computed from, so an
    independent re-evaluation can audit the reported value.
    """
    config.validate()
    ids = corpus.qualified_images(min_raters=min_raters)
    if not ids:
        raise EmptySplit(f"every split is empty: no image has {min_raters} or more ballots")
    train_ids, val_ids, test_ids = split_dataset(ids, config.split, config.seed)
    for name, part in (("train", train_ids), ("validation", val_ids), ("test", test_ids)):
        if not part:
            raise EmptySplit(f"{name} split is empty with {len(ids)} qualified images")

    side = spec.input_side
    x_train = load_image_batch(corpus, train_ids, side)
    y_train = _targets_for(corpus, train_ids)
    x_val = load_image_batch(corpus, val_ids, side)
    y_val = _targets_for(corpus, val_ids)

    net = DenseScoreNet(spec)
    params = net.init_params(config.seed)
    velocity = {name: np.zeros_like(t) for name, t in params.items()}
    shuffle_rng = np.random.default_rng([config.seed, 0x5EED])

    history = TrainHistory()
    best_params = params.copy()
    best_val = float("inf")
    lr = config.lr0
    epochs_since_improve = 0

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_ids))
        sq_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            loss, grads, preds = net.loss_and_gradients(params, xb, yb)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            for name, g in grads.items():
                v = velocity[name]
                v *= config.momentum
                v -= lr * g
                params.tensors[name] += v
            sq_sum += loss * len(idx)
            if on_batch is not None:
                on_batch(epoch, preds, yb, loss)
        train_loss = sq_sum / len(train_ids)

        val_loss = evaluate_loss(net, params, x_val, y_val, config.batch_size)
        if not np.isfinite(val_loss):
            raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        history.epochs.append(EpochRecord(epoch, train_loss, val_loss, lr))

        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1
            if epochs_since_improve >= config.plateau_patience:
                lr *= config.lr_decay_factor
                epochs_since_improve = 0

    return best_params, history


def predict_corpus(
    params: Parameters, image_ids: Sequence[str], corpus: Corpus, batch_size: int = 32
) -> dict[str, ScoreDistribution]:
    """Predicted score distribution per image; pure per image, so duplicates collapse."""
    net = DenseScoreNet(params.spec)
    unique_ids = sorted(set(image_ids))
    out: dict[str, ScoreDistribution] = {}
    for start in range(0, len(unique_ids), batch_size):
        chunk = unique_ids[start : start + batch_size]
        batch = load_image_batch(corpus, chunk, params.spec.input_side)
        probs = net.forward(params, batch)
        for image_id, p in zip(chunk, probs):
            out[image_id] = ScoreDistribution.from_probabilities(p, n_ballots=0)
    return out
