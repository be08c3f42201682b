"""Shared parameter records used across generation, detection and theory."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class WatermarkParams:
    """Knobs of the green-list watermark shared by generator and detectors."""

    gamma: float = 0.5        # green-list fraction of the vocabulary
    delta: float = 2.0        # logit bias added to green tokens at generation
    key: int = 15485863       # detection key (any 64-bit value)
    window: int = 1           # number of previous tokens hashed into the seed
    spike_modulus: float = 1.0  # scalar modulus of the spike-entropy measure

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.window < 1:
            raise ValueError("window size must be >= 1")
        if self.spike_modulus <= 0.0:
            raise ValueError("spike modulus must be positive")
        if not 0 <= self.key < 2**64:
            raise ValueError("key must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class PowerLawParams:
    """Power law f(x) = a*x^(a-1) on [0, 1], shifted/scaled to [loc, loc+scale].

    Describes the per-token spike-entropy profile of a corpus; the default
    values give the strongly low-entropy profile used throughout the error
    analysis (mean entropy ~0.607 with support [0.566, 0.992]).
    """

    a: float = 0.106
    loc: float = 0.566
    scale: float = 0.426

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError("power-law shape must be positive")
        if self.scale <= 0.0:
            raise ValueError("power-law scale must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (self.loc, self.loc + self.scale)
