"""Synthetic autoregressive language model with a controllable spike-entropy
profile, plus the green-list watermark generator (logit bias + sampling).

Every per-step random quantity (entropy target, spike-token choice, sampling
uniform) is drawn from a counter-based stream keyed by (corpus rng_seed,
sequence index, step, lane).  That makes corpora reproducible and lets a
detector re-derive each position's entropy without replaying generation:
re-running the model is a pure function of the stream key.

Each step's next-token distribution is the spike-plus-uniform member whose
spike entropy matches the sampled target.  Watermarked steps multiply green
token probabilities by exp(delta) and renormalize before sampling, which is
exactly the add-delta-to-green-logits rule expressed on probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entropy import (calibrate_distribution, entropy_bounds,
                      spike_family_entropy, spike_mass_for_entropy)
from .greenlist import (GOLDEN64, MASK64, GreenList, _finalize64_np,
                        context_seed, finalize64, green_mask, is_green_seeded)
from .params import PowerLawParams, WatermarkParams

LABEL_WATERMARKED = "watermarked"
LABEL_HUMAN = "human"

# stream lanes: one independent 64-bit value per (sequence, step, purpose)
LANE_ENTROPY = 0
LANE_SPIKE = 1
LANE_SAMPLE = 2

_INV_2POW53 = 2.0 ** -53


def stream_u64(seed: int, *parts: int) -> int:
    """Counter-based 64-bit stream value keyed by (seed, parts...)."""
    s = seed & MASK64
    for p in parts:
        s = finalize64(s ^ ((int(p) + GOLDEN64) & MASK64))
    return s


def stream_uniform(seed: int, *parts: int) -> float:
    """Uniform draw in (0, 1) from the keyed stream."""
    return ((stream_u64(seed, *parts) >> 11) + 0.5) * _INV_2POW53


def _stream_uniform_grid(seed: int, seq_indices: np.ndarray,
                         n_steps: int, lane: int) -> np.ndarray:
    """Uniforms for every (sequence, step) pair, shape (n, n_steps)."""
    golden = np.uint64(GOLDEN64)
    seq = np.asarray(seq_indices, dtype=np.uint64)
    steps = np.arange(n_steps, dtype=np.uint64)
    s = _finalize64_np(np.uint64(seed & MASK64) ^ (seq + golden))
    s = _finalize64_np(s[:, None] ^ (steps + golden)[None, :])
    s = _finalize64_np(s ^ (np.uint64(lane) + golden))
    return ((s >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2POW53


@dataclass(frozen=True)
class CorpusConfig:
    """Shape of a synthetic corpus: sequence geometry plus entropy profile."""

    length: int = 200            # tokens per sequence, incl. the seed window
    count: int = 100             # sequences per label
    vocab_size: int = 1024
    entropy_source: str = "power-law"   # "power-law" or "two-level"
    powerlaw: PowerLawParams = PowerLawParams()
    low_se: float = 0.505        # two-level: entropy of the low atom
    high_se: float = 0.95        # two-level: entropy of the high atom
    epsilon: float = 0.8         # two-level: fraction of low-entropy tokens
    temperature: float = 1.0
    rng_seed: int = 1

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("sequence length must be >= 2")
        if self.count < 1:
            raise ValueError("sequence count must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.entropy_source not in ("power-law", "two-level"):
            raise ValueError(f"unknown entropy source {self.entropy_source!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")


@dataclass
class GenerationRecord:
    """One generated sequence with its per-token annotations.

    Green flags for positions before the context window are False (those
    positions are never scored).  Records read back from disk carry
    green=None; detection recomputes flags from the tokens.
    """

    tokens: np.ndarray
    se: np.ndarray
    label: str
    seq_index: int
    green: np.ndarray | None = None

    def __post_init__(self):
        if len(self.tokens) != len(self.se):
            raise ValueError("per-token vectors must share the sequence length")
        if self.green is not None and len(self.green) != len(self.tokens):
            raise ValueError("per-token vectors must share the sequence length")


def validate_entropy_source(config: CorpusConfig, z_mod: float) -> None:
    lo, hi = entropy_bounds(config.vocab_size, z_mod)
    if config.entropy_source == "power-law":
        s_lo, s_hi = config.powerlaw.support
    else:
        if config.low_se > config.high_se:
            raise ValueError("two-level source requires low_se <= high_se")
        s_lo, s_hi = config.low_se, config.high_se
    if s_lo < lo - 1e-12 or s_hi > hi + 1e-12:
        raise ValueError(
            f"entropy targets [{s_lo}, {s_hi}] outside attainable bounds "
            f"[{lo}, {hi}] for vocab_size={config.vocab_size}, z={z_mod}")


def sample_entropy_profile(params: PowerLawParams, n_steps: int, rng) -> np.ndarray:
    """Entropy targets via inverse-CDF sampling of the shifted power law.

    Each target is loc + scale * U**(1/a) with U uniform on (0, 1).
    """
    if n_steps < 1:
        raise ValueError("profile length must be >= 1")
    u = rng.random(n_steps)
    return params.loc + params.scale * u ** (1.0 / params.a)


def _targets_from_uniforms(config: CorpusConfig, u: np.ndarray) -> np.ndarray:
    if config.entropy_source == "power-law":
        p = config.powerlaw
        return p.loc + p.scale * u ** (1.0 / p.a)
    return np.where(u < config.epsilon, config.low_se, config.high_se)


def entropy_profile(config: CorpusConfig, seq_index: int) -> np.ndarray:
    """Per-step entropy targets for one sequence, re-derivable at detection."""
    u = _stream_uniform_grid(config.rng_seed, np.array([seq_index]),
                             config.length, LANE_ENTROPY)[0]
    return _targets_from_uniforms(config, u)


def entropy_profile_matrix(config: CorpusConfig, seq_indices) -> np.ndarray:
    """Entropy targets for many sequences at once, shape (n, length)."""
    u = _stream_uniform_grid(config.rng_seed, np.asarray(seq_indices),
                             config.length, LANE_ENTROPY)
    return _targets_from_uniforms(config, u)


def _spike_tokens(config: CorpusConfig, seq_indices) -> np.ndarray:
    u = _stream_uniform_grid(config.rng_seed, np.asarray(seq_indices),
                             config.length, LANE_SPIKE)
    return np.minimum((u * config.vocab_size).astype(np.int64),
                      config.vocab_size - 1)


def _temperature_spike_mass(q, vocab_size: int, temperature: float):
    """Spike mass after temperature reshaping of the spike-plus-uniform family."""
    if temperature == 1.0:
        return q
    q = np.asarray(q, dtype=np.float64)
    rest = (1.0 - q) / (vocab_size - 1)
    a = q ** (1.0 / temperature)
    b = rest ** (1.0 / temperature)
    return a / (a + (vocab_size - 1) * b)


def next_token_distribution(se_target: float, step: int, stream_seed: int,
                            seq_index: int, vocab_size: int,
                            z_mod: float = 1.0) -> np.ndarray:
    """Spike-plus-uniform distribution for one generation step.

    The spike token is drawn pseudo-randomly from the keyed stream; the spike
    mass is calibrated so the distribution's spike entropy matches
    `se_target` within the calibration tolerance.
    """
    u = stream_uniform(stream_seed, seq_index, step, LANE_SPIKE)
    spike = min(int(u * vocab_size), vocab_size - 1)
    return calibrate_distribution(se_target, vocab_size, z_mod, spike_token=spike)


def apply_watermark_bias(dist: np.ndarray, green, delta: float) -> np.ndarray:
    """Multiply green-token probabilities by exp(delta) and renormalize."""
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    p = np.asarray(dist, dtype=np.float64)
    if isinstance(green, GreenList):
        mask = np.zeros(len(p), dtype=bool)
        mask[green.ids] = True
    else:
        green = np.asarray(green)
        if green.dtype == bool:
            mask = green
        else:
            mask = np.zeros(len(p), dtype=bool)
            mask[green] = True
    out = np.where(mask, p * np.exp(delta), p)
    return out / out.sum()


def sample_spike_uniform(q, spike, vocab_size: int, u):
    """Inverse-CDF sample from the spike-plus-uniform family.

    Equivalent to multinomial sampling along the token-id axis with a single
    uniform; closed form, so it vectorizes.  Both the reference generator and
    the bulk corpus path call this same function for unbiased steps.
    """
    q = np.asarray(q, dtype=np.float64)
    spike = np.asarray(spike, dtype=np.int64)
    u = np.asarray(u, dtype=np.float64)
    rest = (1.0 - q) / (vocab_size - 1)
    before = spike * rest
    with np.errstate(divide="ignore", invalid="ignore"):
        v_low = np.floor(u / rest).astype(np.int64)
        v_high = spike + 1 + np.floor((u - before - q) / rest).astype(np.int64)
    token = np.where(u < before, v_low,
                     np.where(u < before + q, spike, v_high))
    token = np.clip(token, 0, vocab_size - 1)
    return int(token) if token.ndim == 0 else token


def _multinomial_from_vector(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF sample from an explicit probability vector."""
    c = np.cumsum(probs)
    return min(int(np.searchsorted(c, u, side="right")), len(probs) - 1)


def generate_sequence(config: CorpusConfig, wparams: WatermarkParams,
                      watermark: bool, seq_index: int = 0) -> GenerationRecord:
    """Autoregressive reference generator for one sequence.

    Per step: sample the entropy target, build the spike-plus-uniform
    distribution, bias green tokens by exp(delta) when watermarking (and past
    the seed window), then sample the token.  The recorded entropy is that of
    the pre-bias sampling distribution, which the detector can recompute.
    """
    m = wparams.window
    if config.length <= m:
        raise ValueError("too short: sequence length must exceed the window")
    validate_entropy_source(config, wparams.spike_modulus)

    n_v = config.vocab_size
    z = wparams.spike_modulus
    targets = entropy_profile(config, seq_index)
    spikes = _spike_tokens(config, [seq_index])[0]
    qs = spike_mass_for_entropy(targets, n_v, z)
    qs = _temperature_spike_mass(qs, n_v, config.temperature)
    se = np.asarray(spike_family_entropy(qs, n_v, z), dtype=np.float64)

    tokens = np.empty(config.length, dtype=np.int64)
    green = np.zeros(config.length, dtype=bool)

    for l in range(config.length):
        q = qs[l]
        u = stream_uniform(config.rng_seed, seq_index, l, LANE_SAMPLE)

        mask = None
        if l >= m:
            seed = context_seed(wparams.key, tokens[l - m:l])
            if watermark:
                mask = green_mask(seed, n_v, wparams.gamma)

        if watermark and mask is not None:
            probs = np.full(n_v, (1.0 - q) / (n_v - 1))
            probs[spikes[l]] = q
            biased = apply_watermark_bias(probs, mask, wparams.delta)
            tokens[l] = _multinomial_from_vector(biased, u)
            green[l] = mask[tokens[l]]
        else:
            tokens[l] = sample_spike_uniform(q, spikes[l], n_v, u)
            if l >= m:
                green[l] = is_green_seeded(seed, int(tokens[l]), n_v,
                                           wparams.gamma)

    label = LABEL_WATERMARKED if watermark else LABEL_HUMAN
    return GenerationRecord(tokens=tokens, se=se, label=label,
                            seq_index=seq_index, green=green)


def generate_corpus(config: CorpusConfig, wparams: WatermarkParams,
                    watermark: bool, count: int | None = None,
                    start_index: int = 0) -> list[GenerationRecord]:
    """Generate `count` sequences with consecutive sequence indices."""
    n = config.count if count is None else count
    return [generate_sequence(config, wparams, watermark, start_index + i)
            for i in range(n)]


def human_corpus_arrays(config: CorpusConfig, wparams: WatermarkParams,
                        count: int | None = None, start_index: int = 0
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Bulk human-corpus path: (tokens, se) arrays of shape (n, length).

    Unwatermarked sampling never consults the green list, so every position
    of every sequence is independent given the stream; this path vectorizes
    the exact computation `generate_sequence(..., watermark=False)` performs
    and produces identical tokens and entropies.  Work proceeds in row
    blocks to keep the bisection temporaries cache-friendly.
    """
    n = config.count if count is None else count
    validate_entropy_source(config, wparams.spike_modulus)
    n_v = config.vocab_size
    z = wparams.spike_modulus

    tokens = np.empty((n, config.length), dtype=np.int64)
    se = np.empty((n, config.length), dtype=np.float64)
    block = max(1, 2_000_000 // config.length)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        idx = np.arange(start_index + lo, start_index + hi)
        targets = entropy_profile_matrix(config, idx)
        q = spike_mass_for_entropy(targets.reshape(-1), n_v, z) \
            .reshape(targets.shape)
        q = _temperature_spike_mass(q, n_v, config.temperature)
        se[lo:hi] = spike_family_entropy(q, n_v, z)
        spikes = _spike_tokens(config, idx)
        u = _stream_uniform_grid(config.rng_seed, idx, config.length,
                                 LANE_SAMPLE)
        tokens[lo:hi] = sample_spike_uniform(q, spikes, n_v, u)
    return tokens, se


def recomputed_entropies(config: CorpusConfig, wparams: WatermarkParams,
                         seq_index: int) -> np.ndarray:
    """Re-derive one sequence's per-token entropies the way a detector would.

    Pure function of the stream key (rng_seed, seq_index, step): reproduces
    `GenerationRecord.se` exactly, without the tokens.
    """
    n_v = config.vocab_size
    z = wparams.spike_modulus
    t = entropy_profile(config, seq_index)
    q = spike_mass_for_entropy(t, n_v, z)
    q = _temperature_spike_mass(q, n_v, config.temperature)
    return spike_family_entropy(q, n_v, z)


def recomputed_entropies_matrix(config: CorpusConfig, wparams: WatermarkParams,
                                seq_indices) -> np.ndarray:
    """Matrix form of `recomputed_entropies`, shape (n, length)."""
    n_v = config.vocab_size
    z = wparams.spike_modulus
    t = entropy_profile_matrix(config, seq_indices)
    q = spike_mass_for_entropy(t.reshape(-1), n_v, z).reshape(t.shape)
    q = _temperature_spike_mass(q, n_v, config.temperature)
    return spike_family_entropy(q, n_v, z)


def write_corpus(path, records) -> None:
    """Line-delimited JSON, one record per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "tokens": [int(t) for t in rec.tokens],
                "label": rec.label,
                "se": [float(s) for s in rec.se],
                "seq_index": int(rec.seq_index),
            }) + "\n")


def read_corpus(path) -> list[GenerationRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            unknown = set(obj) - {"tokens", "label", "se", "seq_index"}
            if unknown:
                raise ValueError(f"unknown corpus record fields: {sorted(unknown)}")
            records.append(GenerationRecord(
                tokens=np.asarray(obj["tokens"], dtype=np.int64),
                se=np.asarray(obj["se"], dtype=np.float64),
                label=obj["label"],
                seq_index=int(obj["seq_index"]),
            ))
    return records
