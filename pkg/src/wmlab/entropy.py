"""Probability-vector math: softmax, spike entropy, and entropy-targeted
construction of spike-plus-uniform distributions.

Spike entropy of a probability vector p with modulus z is
sum_k p_k / (1 + z * p_k): minimal (1/(1+z)) for a one-hot vector, maximal
(N/(N+z)) for the uniform distribution over N tokens.
"""

from __future__ import annotations

import math

import numpy as np

PROB_SUM_TOL = 1e-9
CALIBRATION_TOL = 1e-9
CALIBRATION_MAX_ITER = 200


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for numerical stability."""
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    scores = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("logits must be finite")
    scaled = scores / temperature
    scaled -= scaled.max()
    e = np.exp(scaled)
    return e / e.sum()


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be 1-D and non-empty")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities must sum to 1 within {PROB_SUM_TOL}")
    return p


def spike_entropy(probs, z_mod: float = 1.0) -> float:
    """sum_k p_k / (1 + z * p_k) for a probability vector."""
    if z_mod <= 0.0:
        raise ValueError("spike modulus must be positive")
    p = _check_probs(probs)
    return float(np.sum(p / (1.0 + z_mod * p)))


def entropy_bounds(vocab_size: int, z_mod: float = 1.0) -> tuple[float, float]:
    """(min, max) attainable spike entropy: one-hot and uniform respectively."""
    if vocab_size < 2:
        raise ValueError(f"vocab_size must be >= 2, got {vocab_size}")
    if z_mod <= 0.0:
        raise ValueError("spike modulus must be positive")
    return 1.0 / (1.0 + z_mod), vocab_size / (vocab_size + z_mod)


def spike_family_entropy(q, vocab_size: int, z_mod: float = 1.0):
    """Spike entropy of the spike-plus-uniform family as a function of q.

    The family puts mass q on one designated token and (1-q)/(N-1) on each of
    the others.  Strictly decreasing in q on [1/N, 1].  Accepts scalars or
    arrays.
    """
    q = np.asarray(q, dtype=np.float64)
    rest = (1.0 - q) / (vocab_size - 1)
    se = q / (1.0 + z_mod * q) + (1.0 - q) / (1.0 + z_mod * rest)
    return float(se) if np.isscalar(q) or q.ndim == 0 else se


_BISECTION_ITERS = 48  # final bracket width 2^-48 ~ 3.6e-15, far inside CALIBRATION_TOL


def spike_mass_for_entropy(target_se, vocab_size: int, z_mod: float = 1.0):
    """Solve spike_family_entropy(q) = target_se for q by bisection.

    Vectorized over `target_se`; each solution satisfies the entropy target
    within CALIBRATION_TOL.  The iteration count is fixed (not adaptive) so
    scalar and array invocations produce bit-identical results.  Raises if
    any target lies outside the attainable bounds.
    """
    lo_se, hi_se = entropy_bounds(vocab_size, z_mod)
    t = np.asarray(target_se, dtype=np.float64)
    if np.any(t < lo_se - 1e-12) or np.any(t > hi_se + 1e-12):
        raise ValueError(
            f"entropy target outside attainable range [{lo_se}, {hi_se}]")
    t = np.clip(t, lo_se, hi_se)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)

    q_lo = np.full_like(t, 1.0 / vocab_size)  # SE(q_lo) = max
    q_hi = np.ones_like(t)                    # SE(q_hi) = min
    for _ in range(_BISECTION_ITERS):
        mid = 0.5 * (q_lo + q_hi)
        se_mid = spike_family_entropy(mid, vocab_size, z_mod)
        too_high = se_mid > t  # entropy still above target -> push q up
        q_lo = np.where(too_high, mid, q_lo)
        q_hi = np.where(too_high, q_hi, mid)
    q = 0.5 * (q_lo + q_hi)
    return float(q[0]) if scalar else q


def calibrate_distribution(target_se: float, vocab_size: int,
                           z_mod: float = 1.0, spike_token: int = 0) -> np.ndarray:
    """Probability vector with the requested spike entropy.

    Returns the spike-plus-uniform member whose entropy matches `target_se`
    within CALIBRATION_TOL, with the spike placed on `spike_token`.
    """
    if not 0 <= spike_token < vocab_size:
        raise ValueError("spike token outside vocabulary")
    q = spike_mass_for_entropy(target_se, vocab_size, z_mod)
    p = np.full(vocab_size, (1.0 - q) / (vocab_size - 1), dtype=np.float64)
    p[spike_token] = q
    return p
