"""Shared corpora for the detector and acceptance tests.

The expensive fixtures are session-scoped: the big null corpus backs both
the false-positive calibration check and the human-vs-human ROC check, and
the two-level corpora back the ordering, weight-ablation and attack checks.
"""

import numpy as np
import pytest

import wmlab
from wmlab.greenlist import green_flags
from wmlab.simgen import generate_corpus, human_corpus_arrays

WPARAMS = wmlab.WatermarkParams()  # gamma 0.5, delta 2.0, window 1, modulus 1.0


def standard_configs(vocab_size, sweet_threshold=0.695, ewd_spec=None,
                     tau=2.0, min_scored=15):
    if ewd_spec is None:
        ewd_spec = wmlab.WeightFunctionSpec(family="linear-shift", shift=0.566)
    return [
        wmlab.DetectionConfig(params=WPARAMS, vocab_size=vocab_size,
                              method="kgw", tau=tau, min_scored=min_scored),
        wmlab.DetectionConfig(params=WPARAMS, vocab_size=vocab_size,
                              method="sweet", tau=tau, min_scored=min_scored,
                              sweet_threshold=sweet_threshold),
        wmlab.DetectionConfig(params=WPARAMS, vocab_size=vocab_size,
                              method="ewd", tau=tau, min_scored=min_scored,
                              weight_spec=ewd_spec),
    ]


@pytest.fixture(scope="session")
def null_corpus():
    """10^5 human sequences, 200 scored positions each, power-law profile."""
    cfg = wmlab.CorpusConfig(length=201, count=100_000, vocab_size=256,
                             entropy_source="power-law", rng_seed=101)
    tokens, se = human_corpus_arrays(cfg, WPARAMS, count=cfg.count)
    return {"config": cfg, "tokens": tokens, "se": se}


@pytest.fixture(scope="session")
def null_z(null_corpus):
    """Null z-scores of the three theory-matched detectors on the big corpus."""
    cfg = null_corpus["config"]
    res = wmlab.detect_batch(null_corpus["tokens"],
                             standard_configs(cfg.vocab_size),
                             se=null_corpus["se"])
    return {m: r.z for m, r in res.items()}


def _two_level_dataset(epsilon, rng_seed):
    cfg = wmlab.CorpusConfig(length=201, count=1000, vocab_size=1024,
                             entropy_source="two-level", low_se=0.505,
                             high_se=0.95, epsilon=epsilon, rng_seed=rng_seed)
    wm = generate_corpus(cfg, WPARAMS, watermark=True, count=cfg.count)
    wm_tokens = np.stack([r.tokens for r in wm])
    wm_se = np.stack([r.se for r in wm])
    wm_green = np.stack([r.green for r in wm])
    hu_tokens, hu_se = human_corpus_arrays(cfg, WPARAMS, count=cfg.count,
                                           start_index=cfg.count)
    m = WPARAMS.window
    return {
        "config": cfg,
        "wm_tokens": wm_tokens, "wm_se": wm_se,
        "wm_flags": wm_green[:, m:],
        "hu_tokens": hu_tokens, "hu_se": hu_se,
        "hu_flags": green_flags(WPARAMS.key, hu_tokens, m, cfg.vocab_size,
                                WPARAMS.gamma),
    }


@pytest.fixture(scope="session")
def twolevel_eps08():
    """1000 watermarked/human pairs, 80% low-entropy tokens."""
    return _two_level_dataset(epsilon=0.8, rng_seed=202)


@pytest.fixture(scope="session")
def twolevel_eps0():
    """1000 watermarked/human pairs, every token at the high entropy level."""
    return _two_level_dataset(epsilon=0.0, rng_seed=203)


@pytest.fixture(scope="session")
def powerlaw_wm_records():
    """500 watermarked sequences on the power-law profile (10^5 scored tokens)."""
    cfg = wmlab.CorpusConfig(length=201, count=500, vocab_size=256,
                             entropy_source="power-law", rng_seed=301)
    return cfg, generate_corpus(cfg, WPARAMS, watermark=True, count=cfg.count)
