"""Gait classification and table-lookup stride length.

Per-step features (duration, accel variance, peak, RMS) feed a two-level
linear classifier: level 1 separates slow from {normal, fast}, level 2
separates normal from fast. A score of exactly 0 goes to the larger-stride
side at both levels. The winning class indexes a stride table (meters).

Separators are trained with a deterministic full-batch hinge-loss subgradient
descent on standardized features; the learned standardization is folded back
into the stored weights so classification takes raw features.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .stepdetect import StrideFeatures


class Gait(str, enum.Enum):
    SLOW = "slow"
    NORMAL = "normal"
    FAST = "fast"


DEFAULT_STRIDE_TABLE = {Gait.SLOW: 0.50, Gait.NORMAL: 0.70, Gait.FAST: 0.90}


class GaitTrainingError(ValueError):
    pass


class GaitModelError(RuntimeError):
    """Model missing or malformed (configuration problem, not data)."""


@dataclass(frozen=True)
class GaitModel:
    """Two linear separators plus the gait -> stride-length table.

    Scores are plain dot products on raw feature vectors
    (duration, variance, peak, rms): ``score = w . x + b``.
    level1 >= 0 selects the {normal, fast} branch; level2 >= 0 selects fast.
    """

    l1_weights: tuple[float, float, float, float]
    l1_bias: float
    l2_weights: tuple[float, float, float, float]
    l2_bias: float
    stride_table: dict[Gait, float]

    def validate(self) -> None:
        for gait in Gait:
            length = self.stride_table.get(gait)
            if length is None or not (0.0 < length <= 2.0):
                raise GaitModelError(f"stride table entry for {gait.value} invalid: {length}")


def default_gait_model() -> GaitModel:
    # Hand-set separators on (duration, variance): slow walks are long and
    # flat, fast walks short and energetic. Margins ~2 units on the synthetic
    # gait statistics, so classification survives moderate sensor noise.
    return GaitModel(
        l1_weights=(-10.0, 1.0, 0.0, 0.0),
        l1_bias=5.0,
        l2_weights=(-10.0, 1.0, 0.0, 0.0),
        l2_bias=0.0,
        stride_table=dict(DEFAULT_STRIDE_TABLE),
    )


def extract_features(times: np.ndarray, magnitudes: np.ndarray) -> StrideFeatures:
    """Features over the magnitude window spanning one step.

    duration = last - first time (translation-invariant); variance is the
    population variance; rms = sqrt(mean(m^2)).
    """
    times = np.asarray(times, dtype=float)
    magnitudes = np.asarray(magnitudes, dtype=float)
    if len(times) == 0:
        raise ValueError("step window is empty")
    return StrideFeatures(
        stride_duration=float(times[-1] - times[0]),
        accel_variance=float(np.var(magnitudes)),
        accel_peak=float(np.max(magnitudes)),
        accel_rms=float(np.sqrt(np.mean(magnitudes**2))),
    )


def classify_gait(features: StrideFeatures, model: GaitModel | None) -> Gait:
    """Deterministic class in {slow, normal, fast}; boundary goes to the
    larger-stride side at both levels."""
    if model is None:
        raise GaitModelError("no gait model loaded")
    x = features.as_vector()
    s1 = float(np.dot(model.l1_weights, x)) + model.l1_bias
    if s1 < 0:
        return Gait.SLOW
    s2 = float(np.dot(model.l2_weights, x)) + model.l2_bias
    return Gait.FAST if s2 >= 0 else Gait.NORMAL


def stride_length(gait: Gait, model: GaitModel) -> float:
    return model.stride_table[gait]


def _fit_linear(
    X: np.ndarray, y: np.ndarray, epochs: int = 400, lam: float = 1e-3
) -> tuple[np.ndarray, float]:
    """Full-batch hinge-loss subgradient descent; y in {-1, +1}.

    Standardizes features internally and folds the scaling back into the
    returned raw-space (weights, bias). No randomness involved.
    """
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    Xs = (X - mu) / sd
    n, d = Xs.shape
    w = np.zeros(d)
    b = 0.0
    for t in range(1, epochs + 1):
        margins = y * (Xs @ w + b)
        active = margins < 1.0
        lr = 1.0 / (lam * t)
        grad_w = lam * w - (y[active, None] * Xs[active]).sum(axis=0) / n
        grad_b = -(y[active]).sum() / n
        w = w - lr * grad_w
        b = b - lr * grad_b
    w_raw = w / sd
    b_raw = b - float(np.dot(w, mu / sd))
    return w_raw, float(b_raw)


@dataclass
class TrainReport:
    model: GaitModel
    accuracy: float
    n_samples: int


def train_gait_model(
    labeled: Sequence[tuple[StrideFeatures, Gait]],
    stride_table: dict[Gait, float] | None = None,
    epochs: int = 400,
) -> TrainReport:
    """Fit the two-level separator from labeled step features.

    Raises GaitTrainingError if fewer than two classes are present. When the
    {normal, fast} branch holds a single class, level 2 degenerates to a
    constant separator for that class.
    """
    if not labeled:
        raise GaitTrainingError("no training samples")
    classes = {gait for _, gait in labeled}
    if len(classes) < 2:
        raise GaitTrainingError(f"need >= 2 gait classes, got {sorted(c.value for c in classes)}")

    X = np.array([f.as_vector() for f, _ in labeled])
    gaits = [gait for _, gait in labeled]

    y1 = np.array([-1.0 if g is Gait.SLOW else 1.0 for g in gaits])
    if len(set(y1)) == 1:
        # no slow examples at all: level 1 trivially routes to the branch
        w1, b1 = np.zeros(4), 1.0
    else:
        w1, b1 = _fit_linear(X, y1, epochs=epochs)

    branch = [i for i, g in enumerate(gaits) if g is not Gait.SLOW]
    if branch:
        y2 = np.array([1.0 if gaits[i] is Gait.FAST else -1.0 for i in branch])
        if len(set(y2)) == 1:
            w2, b2 = np.zeros(4), float(y2[0])
        else:
            w2, b2 = _fit_linear(X[branch], y2, epochs=epochs)
    else:
        w2, b2 = np.zeros(4), -1.0

    model = GaitModel(
        l1_weights=tuple(float(v) for v in w1),
        l1_bias=b1,
        l2_weights=tuple(float(v) for v in w2),
        l2_bias=b2,
        stride_table=dict(stride_table or DEFAULT_STRIDE_TABLE),
    )
    hits = sum(1 for (f, g) in labeled if classify_gait(f, model) is g)
    return TrainReport(model=model, accuracy=hits / len(labeled), n_samples=len(labeled))


def save_gait_model(model: GaitModel, path: str | Path) -> None:
    lines = [
        "l1.weights = " + " ".join(repr(v) for v in model.l1_weights),
        f"l1.bias = {model.l1_bias!r}",
        "l2.weights = " + " ".join(repr(v) for v in model.l2_weights),
        f"l2.bias = {model.l2_bias!r}",
        f"table.slow = {model.stride_table[Gait.SLOW]!r}",
        f"table.normal = {model.stride_table[Gait.NORMAL]!r}",
        f"table.fast = {model.stride_table[Gait.FAST]!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gait_model(path: str | Path) -> GaitModel:
    entries: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GaitModelError(f"cannot read gait model {path}: {exc}") from None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise GaitModelError(f"bad model line: {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    try:
        def vec(key: str) -> tuple[float, float, float, float]:
            parts = tuple(float(v) for v in entries[key].split())
            if len(parts) != 4:
                raise GaitModelError(f"{key} must have 4 components")
            return parts

        model = GaitModel(
            l1_weights=vec("l1.weights"),
            l1_bias=float(entries["l1.bias"]),
            l2_weights=vec("l2.weights"),
            l2_bias=float(entries["l2.bias"]),
            stride_table={
                Gait.SLOW: float(entries["table.slow"]),
                Gait.NORMAL: float(entries["table.normal"]),
                Gait.FAST: float(entries["table.fast"]),
            },
        )
    except KeyError as exc:
        raise GaitModelError(f"gait model missing key {exc}") from None
    except ValueError as exc:
        raise GaitModelError(f"gait model has unparsable value: {exc}") from None
    model.validate()
    return model
