"""Entropy-weighted watermark detection laboratory.

Green-list text-watermark detectors (plain count, entropy-thresholded, and
entropy-weighted), a synthetic language model with a controllable entropy
profile for generating labeled corpora, closed-form Type-I/Type-II error
predictions, and an experiment harness that validates theory against
simulation.
"""

from .detectors import (BatchDetectionResult, DetectionConfig, DetectionReport,
                        INDETERMINATE, NOT_WATERMARKED, WATERMARKED, detect,
                        detect_batch, detect_ewd, detect_kgw, detect_sweet,
                        sweet_select_threshold, verdict)
from .entropy import (calibrate_distribution, entropy_bounds, softmax,
                      spike_entropy)
from .greenlist import (GreenList, context_seed, finalize64, green_flags,
                        green_list, is_green)
from .harness import (EditAttackSpec, ExperimentSpec, MetricsReport,
                      attack_edit, best_f1, roc_points, run_experiment,
                      simulate_theory, timing_report, tpr_at_fpr)
from .params import PowerLawParams, WatermarkParams
from .simgen import (CorpusConfig, GenerationRecord, apply_watermark_bias,
                     generate_corpus, generate_sequence, human_corpus_arrays,
                     next_token_distribution, read_corpus,
                     recomputed_entropies, sample_entropy_profile,
                     write_corpus)
from .theory import (AnalysisParams, NormalApprox, green_prob_lower_bound,
                     normal_cdf, powerlaw_moment, powerlaw_moment_quad,
                     predict_type2, truncated_se_moment, type1_error)
from .weights import WeightFunctionSpec, compute_weights, normalize_entropies

__all__ = [
    "AnalysisParams", "BatchDetectionResult", "CorpusConfig",
    "DetectionConfig", "DetectionReport", "EditAttackSpec", "ExperimentSpec",
    "GenerationRecord", "GreenList", "INDETERMINATE", "MetricsReport",
    "NOT_WATERMARKED", "NormalApprox", "PowerLawParams", "WATERMARKED",
    "WatermarkParams", "WeightFunctionSpec", "apply_watermark_bias",
    "attack_edit", "best_f1", "calibrate_distribution", "compute_weights",
    "context_seed", "detect", "detect_batch", "detect_ewd", "detect_kgw",
    "detect_sweet", "entropy_bounds", "finalize64", "generate_corpus",
    "generate_sequence", "green_flags", "green_list",
    "green_prob_lower_bound", "human_corpus_arrays", "is_green",
    "next_token_distribution", "normal_cdf", "normalize_entropies",
    "powerlaw_moment", "powerlaw_moment_quad", "predict_type2", "read_corpus",
    "recomputed_entropies", "roc_points", "run_experiment",
    "sample_entropy_profile", "simulate_theory", "softmax", "spike_entropy",
    "sweet_select_threshold", "timing_report", "tpr_at_fpr",
    "truncated_se_moment", "type1_error", "verdict", "write_corpus",
]

__version__ = "0.1.0"
