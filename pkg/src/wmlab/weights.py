"""Entropy-to-influence weight functions for detection.

Four monotone non-decreasing families are provided:

* ``linear-shift``: W = max(se - shift, 0), the form used by the closed-form
  error analysis (no normalization).
* ``linear-normalized`` / ``sigmoid`` / ``exponential``: applied to entropies
  normalized into [0, 1], either per text or against the theoretical entropy
  bounds.  Sigmoid weights rise steeply at low entropy and flatten out;
  exponential weights do the opposite.  `strength` controls how far either
  family deviates from linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("linear-shift", "linear-normalized", "sigmoid", "exponential")
NORMALIZATION_MODES = ("per-text", "theoretical-bounds")


@dataclass(frozen=True)
class WeightFunctionSpec:
    """Choice of weight family plus its parameters.

    `strength` is ignored by the linear families; `shift` is used only by
    linear-shift; `normalization` selects how entropies are mapped to [0, 1]
    for the normalized families.
    """

    family: str = "linear-normalized"
    strength: float = 1.0
    shift: float = 0.0
    normalization: str = "per-text"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown weight family {self.family!r}")
        if self.family in ("sigmoid", "exponential") and self.strength <= 0.0:
            raise ValueError("strength must be positive")
        if self.normalization not in NORMALIZATION_MODES:
            raise ValueError(f"unknown normalization mode {self.normalization!r}")

    def label(self) -> str:
        """Config-file form, e.g. 'exponential, strength=10'."""
        if self.family == "linear-shift":
            return f"{self.family}, shift={self.shift:g}"
        if self.family in ("sigmoid", "exponential"):
            return f"{self.family}, strength={self.strength:g}"
        return self.family


def normalize_entropies(se, mode: str = "per-text",
                        bounds: tuple[float, float] | None = None) -> np.ndarray:
    """Map an entropy vector into [0, 1].

    per-text: u = (se - min(se)) / (max(se) - min(se)); a constant vector maps
    to all zeros.  theoretical-bounds: same formula with the supplied global
    (min, max) entropy bounds.  2-D input is treated as a batch of texts
    (one per row); per-text normalization is then per row.
    """
    se = np.asarray(se, dtype=np.float64)
    if se.size == 0:
        raise ValueError("entropy vector must be non-empty")
    if mode == "per-text":
        lo = se.min(axis=-1, keepdims=True)
        hi = se.max(axis=-1, keepdims=True)
        span = hi - lo
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(span > 0.0, (se - lo) / span, 0.0)
        return np.clip(u, 0.0, 1.0)
    if mode == "theoretical-bounds":
        if bounds is None:
            raise ValueError("theoretical-bounds normalization requires bounds")
        lo, hi = bounds
        if hi <= lo:
            raise ValueError("bounds must satisfy min < max")
        return np.clip((se - lo) / (hi - lo), 0.0, 1.0)
    raise ValueError(f"unknown normalization mode {mode!r}")


def compute_weights(se, spec: WeightFunctionSpec,
                    bounds: tuple[float, float] | None = None) -> np.ndarray:
    """Per-token detection weights from per-token spike entropies."""
    se = np.asarray(se, dtype=np.float64)
    if se.size == 0:
        raise ValueError("entropy vector must be non-empty")

    if spec.family == "linear-shift":
        return np.maximum(se - spec.shift, 0.0)

    u = normalize_entropies(se, mode=spec.normalization, bounds=bounds)
    if spec.family == "linear-normalized":
        return u
    s = spec.strength
    if spec.family == "exponential":
        return np.expm1(s * u) / math.expm1(s)
    # sigmoid: rescaled logistic with g(0) pinned to weight 0 and g(s) to 1
    g = lambda x: 1.0 / (1.0 + np.exp(-x))
    return (g(s * u) - g(0.0)) / (g(s) - g(0.0))
