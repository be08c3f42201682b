"""Flat key=value experiment configuration.

One `key = value` pair per line; `#` starts a comment.  Keys are dotted
names covering every field of ExperimentSpec; unknown keys are errors so
typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

from pathlib import Path

from .harness import EditAttackSpec, ExperimentSpec
from .params import PowerLawParams, WatermarkParams
from .simgen import CorpusConfig
from .weights import WeightFunctionSpec


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_list(s: str, conv):
    return tuple(conv(item.strip()) for item in s.split(",") if item.strip())


# key -> (converter, target section)
_SCHEMA = {
    "corpus.length": int,
    "corpus.count": int,
    "corpus.vocab_size": int,
    "corpus.entropy_source": str,
    "corpus.powerlaw.a": float,
    "corpus.powerlaw.loc": float,
    "corpus.powerlaw.scale": float,
    "corpus.low_se": float,
    "corpus.high_se": float,
    "corpus.epsilon": float,
    "corpus.temperature": float,
    "corpus.rng_seed": int,
    "watermark.gamma": float,
    "watermark.delta": float,
    "watermark.key": int,
    "watermark.window": int,
    "watermark.spike_modulus": float,
    "detectors": lambda s: _parse_list(s, str),
    "tau": float,
    "min_scored": int,
    "sweet.threshold": float,
    "sweet.selector": str,
    "ewd.weight.family": str,
    "ewd.weight.strength": float,
    "ewd.weight.shift": float,
    "ewd.weight.normalization": str,
    "fpr_targets": lambda s: _parse_list(s, float),
    "attack.substitution_rate": float,
    "attack.deletion_rate": float,
    "attack.insertion_rate": float,
    "attack.rng_seed": int,
    "simulate.sequences": int,
    "theory.tokens": int,
    "output.corpus": str,
    "output.reports": str,
    "output.metrics": str,
    "output.plots": str,
}


def parse_config_text(text: str) -> dict:
    """Parse flat key=value text into a typed dict; unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate configuration key {key!r}")
        try:
            values[key] = _SCHEMA[key](val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def experiment_from_config(values: dict,
                           seed_override: int | None = None) -> ExperimentSpec:
    """Build an ExperimentSpec from parsed configuration values."""
    v = dict(values)

    def take(key, default):
        return v.pop(key, default)

    powerlaw = PowerLawParams(
        a=take("corpus.powerlaw.a", 0.106),
        loc=take("corpus.powerlaw.loc", 0.566),
        scale=take("corpus.powerlaw.scale", 0.426),
    )
    corpus = CorpusConfig(
        length=take("corpus.length", 200),
        count=take("corpus.count", 100),
        vocab_size=take("corpus.vocab_size", 1024),
        entropy_source=take("corpus.entropy_source", "power-law"),
        powerlaw=powerlaw,
        low_se=take("corpus.low_se", 0.505),
        high_se=take("corpus.high_se", 0.95),
        epsilon=take("corpus.epsilon", 0.8),
        temperature=take("corpus.temperature", 1.0),
        rng_seed=(seed_override if seed_override is not None
                  else take("corpus.rng_seed", 1)),
    )
    if seed_override is not None:
        v.pop("corpus.rng_seed", None)
    watermark = WatermarkParams(
        gamma=take("watermark.gamma", 0.5),
        delta=take("watermark.delta", 2.0),
        key=take("watermark.key", 15485863),
        window=take("watermark.window", 1),
        spike_modulus=take("watermark.spike_modulus", 1.0),
    )
    weight_spec = WeightFunctionSpec(
        family=take("ewd.weight.family", "linear-normalized"),
        strength=take("ewd.weight.strength", 1.0),
        shift=take("ewd.weight.shift", 0.0),
        normalization=take("ewd.weight.normalization", "per-text"),
    )
    attack = None
    if any(k.startswith("attack.") for k in v):
        attack = EditAttackSpec(
            substitution_rate=take("attack.substitution_rate", 0.0),
            deletion_rate=take("attack.deletion_rate", 0.0),
            insertion_rate=take("attack.insertion_rate", 0.0),
            rng_seed=take("attack.rng_seed", 0),
        )
    outputs = {}
    for name in ("corpus", "reports", "metrics", "plots"):
        path = take(f"output.{name}", None)
        if path is not None:
            outputs[name] = path

    spec = ExperimentSpec(
        corpus=corpus,
        watermark=watermark,
        methods=take("detectors", ("kgw", "sweet", "ewd")),
        tau=take("tau", 2.0),
        min_scored=take("min_scored", 15),
        sweet_threshold=take("sweet.threshold", None),
        sweet_selector=take("sweet.selector", "median"),
        weight_spec=weight_spec,
        fpr_targets=take("fpr_targets", (0.01, 0.05)),
        attack=attack,
        outputs=outputs,
    )
    v.pop("simulate.sequences", None)
    v.pop("theory.tokens", None)
    if v:
        raise ValueError(f"unhandled configuration keys: {sorted(v)}")
    return spec
