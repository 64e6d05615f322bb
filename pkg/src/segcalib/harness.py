"""Desk-scale training harness on synthetic 2D segmentation data.

The synthetic cases are soft-edged blobs whose feature channels are noisy,
so class ambiguity concentrates at blob boundaries; a per-voxel MLP trained
with an overlap loss then shows the familiar over-confidence pathology that
an auxiliary calibration loss is meant to fix.

The optimizer is plain momentum gradient descent over the full (small)
batch, which keeps runs bit-reproducible.
"""

from __future__ import annotations

import csv
import json

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calib_loss import softmax_with_grad
from .core import BinConfig, build_report
from .errors import ConfigError, InputDomainError, TrainingError
from .metrics import ml1_ace, ml1_ece, ml1_mce
from .seg_losses import LossSpec, combined_loss, dice_score, parse_loss_spec
from .temperature import TemperatureFit, apply_temperature, fit_temperature

NUM_FEATURES = 3  # noisy signed distance, intensity, bias


@dataclass(frozen=True)
class SyntheticCase:
    features: np.ndarray  # (F, h, w)
    labels: np.ndarray    # (h, w) int64
    seed: int


@dataclass
class ToySegmenter:
    """Per-voxel MLP: linear -> tanh -> linear, mapping F features to C logits."""

    w1: np.ndarray  # (F, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, C)
    b2: np.ndarray  # (C,)

    @property
    def num_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def copy(self) -> "ToySegmenter":
        return ToySegmenter(self.w1.copy(), self.b1.copy(),
                            self.w2.copy(), self.b2.copy())


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "dice"
    epochs: int = 150
    learning_rate: float = 1e-2
    momentum: float = 0.9
    num_bins: int = 20
    seed: int = 0
    hidden: int = 16
    num_classes: int = 2
    num_train: int = 16
    num_val: int = 8
    num_test: int = 8
    size: tuple[int, int] = (32, 32)
    fg_band: tuple[float, float] = (0.05, 0.40)

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0 or self.hidden < 1:
            raise ConfigError("epochs, learning_rate and hidden must be positive")
        if not (0 <= self.momentum < 1):
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")

    @property
    def bin_config(self) -> BinConfig:
        return BinConfig(self.num_bins)

    @property
    def loss_spec(self) -> LossSpec:
        return parse_loss_spec(self.loss)


def load_train_config(path) -> TrainConfig:
    """Read a TrainConfig from a TOML or JSON file."""
    path = Path(path)
    if path.suffix == ".toml":
        raw = tomllib.loads(path.read_text())
    else:
        raw = json.loads(path.read_text())
    known = {f for f in TrainConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("size", "fg_band"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return TrainConfig(**raw)


def generate_synthetic_case(seed: int, size: tuple[int, int] = (32, 32),
                            fg_band: tuple[float, float] = (0.05, 0.40),
                            noise: float = 2.0) -> SyntheticCase:
    """Deterministic 2D case: 1-3 soft blobs, noisy features, binary labels.

    Feature 0 is the clean signed distance to the blob surface plus noise,
    so the signal-to-noise ratio drops near the label boundary where the
    distance is small. Resamples blob layouts until the foreground fraction
    lands in ``fg_band`` (both classes are then present by construction).
    """
    h, w = size
    if h < 32 or w < 32:
        raise ConfigError(f"size must be at least 32x32, got {size}")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(200):
        n_blobs = int(rng.integers(1, 4))
        signed = np.full((h, w), -np.inf)
        for _ in range(n_blobs):
            cy = rng.uniform(0.25 * h, 0.75 * h)
            cx = rng.uniform(0.25 * w, 0.75 * w)
            r = rng.uniform(0.10, 0.22) * min(h, w)
            dist = np.hypot(yy - cy, xx - cx)
            signed = np.maximum(signed, r - dist)
        labels = (signed > 0).astype(np.int64)
        frac = labels.mean()
        if fg_band[0] <= frac <= fg_band[1]:
            break
    else:
        raise ConfigError(
            f"could not hit foreground band {fg_band} for seed {seed}"
        )
    features = np.stack([
        signed + noise * rng.standard_normal((h, w)),
        np.tanh(signed / 2.0) + 0.5 * rng.standard_normal((h, w)),
        np.ones((h, w)),
    ])
    return SyntheticCase(features=features, labels=labels, seed=seed)


def generate_dataset(config: TrainConfig):
    """(train, val, test) case lists with seeds derived from config.seed."""
    base = config.seed * 100_000

    def cases(offset, count):
        return [
            generate_synthetic_case(base + offset + i, config.size, config.fg_band)
            for i in range(count)
        ]

    return (
        cases(0, config.num_train),
        cases(10_000, config.num_val),
        cases(20_000, config.num_test),
    )


def init_segmenter(seed: int, hidden: int = 16,
                   num_classes: int = 2) -> ToySegmenter:
    rng = np.random.default_rng(seed)
    return ToySegmenter(
        w1=rng.standard_normal((NUM_FEATURES, hidden)) * 0.3,
        b1=np.zeros(hidden),
        w2=rng.standard_normal((hidden, num_classes)) * 0.3,
        b2=np.zeros(num_classes),
    )


def forward(model: ToySegmenter, features: np.ndarray):
    """Logits of shape (C, h, w) plus the cache needed for backward."""
    f, h, w = features.shape
    x = features.reshape(f, h * w).T              # (N, F)
    z = np.tanh(x @ model.w1 + model.b1)          # (N, H)
    logits = (z @ model.w2 + model.b2).T.reshape(-1, h, w)
    return logits, (x, z)


def backward(model: ToySegmenter, grad_logits: np.ndarray, cache):
    """Parameter gradients from the logit gradient of one case."""
    x, z = cache
    c = grad_logits.shape[0]
    g = grad_logits.reshape(c, -1).T              # (N, C)
    d_w2 = z.T @ g
    d_b2 = g.sum(axis=0)
    d_z = (g @ model.w2.T) * (1.0 - z ** 2)
    d_w1 = x.T @ d_z
    d_b1 = d_z.sum(axis=0)
    return {"w1": d_w1, "b1": d_b1, "w2": d_w2, "b2": d_b2}


def case_loss_and_grads(model: ToySegmenter, case: SyntheticCase,
                        spec: LossSpec, cfg: BinConfig):
    logits, cache = forward(model, case.features)
    probs, softmax_back = softmax_with_grad(logits)
    out = combined_loss(spec, probs, case.labels, cfg)
    grad_logits = softmax_back(out.grad_probs)
    return out.value, backward(model, grad_logits, cache)


def train(config: TrainConfig, train_cases, val_cases):
    """Full-batch momentum descent; returns (best-val-Dice model, history).

    History rows carry the epoch's train loss and the validation Dice and
    mean ACE of the post-step weights. Deterministic for fixed seeds.
    """
    spec = config.loss_spec
    cfg = config.bin_config
    model = init_segmenter(config.seed, config.hidden, config.num_classes)
    velocity = {k: np.zeros_like(getattr(model, k))
                for k in ("w1", "b1", "w2", "b2")}
    best = model.copy()
    best_dice = -np.inf
    history = []
    n_cases = len(train_cases)
    for epoch in range(config.epochs):
        total = 0.0
        grads = {k: np.zeros_like(v) for k, v in velocity.items()}
        try:
            for case in train_cases:
                value, case_grads = case_loss_and_grads(model, case, spec, cfg)
                total += value / n_cases
                for k in grads:
                    grads[k] += case_grads[k] / n_cases
        except InputDomainError as exc:
            raise TrainingError(f"diverged at epoch {epoch}: {exc}") from exc
        if not np.isfinite(total) or not all(
            np.all(np.isfinite(g)) for g in grads.values()
        ):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        for k in velocity:
            velocity[k] = config.momentum * velocity[k] - config.learning_rate * grads[k]
            getattr(model, k)[...] += velocity[k]
        if not all(np.all(np.isfinite(getattr(model, k))) for k in velocity):
            raise TrainingError(f"non-finite parameters at epoch {epoch}")
        val = evaluate(model, val_cases, cfg)
        history.append({
            "epoch": epoch,
            "train_loss": total,
            "val_dice": val.mean_dice,
            "val_ace": val.mean_ace,
        })
        if val.mean_dice > best_dice:
            best_dice = val.mean_dice
            best = model.copy()
    return best, history


@dataclass(frozen=True)
class EvalSummary:
    case_dice: np.ndarray
    case_ace: np.ndarray
    case_ece: np.ndarray
    case_mce: np.ndarray
    mean_dice: float
    std_dice: float
    mean_ace: float
    std_ace: float
    mean_ece: float
    std_ece: float
    mean_mce: float
    std_mce: float
    temperature: float | None = None


def predict_probs(model: ToySegmenter, case: SyntheticCase,
                  temperature: float | None = None) -> np.ndarray:
    logits, _ = forward(model, case.features)
    if temperature is not None:
        return apply_temperature(logits, temperature)
    probs, _ = softmax_with_grad(logits)
    return probs


def evaluate(model: ToySegmenter, cases, cfg: BinConfig,
             temperature: float | None = None) -> EvalSummary:
    """Per-case Dice and calibration metrics with dataset means and stds."""
    dice, ace, ece, mce = [], [], [], []
    for case in cases:
        probs = predict_probs(model, case, temperature)
        report = build_report(probs, case.labels, cfg)
        dice.append(dice_score(probs, case.labels).mean())
        ace.append(ml1_ace(report).mean())
        ece.append(ml1_ece(report).mean())
        mce.append(ml1_mce(report).mean())
    dice, ace = np.array(dice), np.array(ace)
    ece, mce = np.array(ece), np.array(mce)

    def stats(values):
        # reduce in sorted order so aggregates do not depend on case order
        s = np.sort(values)
        return float(s.mean()), float(s.std())

    return EvalSummary(
        case_dice=dice, case_ace=ace, case_ece=ece, case_mce=mce,
        mean_dice=stats(dice)[0], std_dice=stats(dice)[1],
        mean_ace=stats(ace)[0], std_ace=stats(ace)[1],
        mean_ece=stats(ece)[0], std_ece=stats(ece)[1],
        mean_mce=stats(mce)[0], std_mce=stats(mce)[1],
        temperature=temperature,
    )


def fit_validation_temperature(model: ToySegmenter, val_cases,
                               seed: int = 0) -> TemperatureFit:
    """Fit a single temperature on the pooled validation logits."""
    logit_list = [forward(model, case.features)[0] for case in val_cases]
    num_classes = logit_list[0].shape[0]
    logits = np.concatenate([l.reshape(num_classes, -1) for l in logit_list], axis=1)
    labels = np.concatenate([case.labels.reshape(-1) for case in val_cases])
    return fit_temperature(logits, labels, seed=seed)


def write_history_csv(history, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss",
                                                "val_dice", "val_ace"])
        writer.writeheader()
        writer.writerows(history)
