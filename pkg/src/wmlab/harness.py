"""Experiment orchestration: corpus generation, batch detection, score
metrics at fixed false-positive budgets, a random-edit attack, Monte Carlo
validation of the closed-form error predictions, and detector timing.

Score conventions: a detection is "flagged" when its z-score strictly
exceeds the threshold under test.  Indeterminate detections carry z = NaN
and are never flagged.  Thresholds for TPR@FPR are chosen from the human
score sample itself so that the empirical false positive rate stays strictly
under the budget.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .detectors import (DetectionConfig, detect_ewd, detect_kgw, detect_sweet,
                        detect_batch, sweet_select_threshold)
from .entropy import entropy_bounds
from .greenlist import green_flags
from .params import WatermarkParams
from .simgen import (CorpusConfig, generate_corpus, human_corpus_arrays,
                     recomputed_entropies)
from .theory import AnalysisParams, predict_type2
from .weights import WeightFunctionSpec


@dataclass(frozen=True)
class EditAttackSpec:
    """Random token edits applied to a sequence before detection."""

    substitution_rate: float = 0.0
    deletion_rate: float = 0.0
    insertion_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        rates = (self.substitution_rate, self.deletion_rate, self.insertion_rate)
        if any(not 0.0 <= r < 1.0 for r in rates):
            raise ValueError("edit rates must lie in [0, 1)")
        if sum(rates) >= 1.0:
            raise ValueError("edit rates must sum to less than 1")

    @property
    def is_identity(self) -> bool:
        return (self.substitution_rate == 0.0 and self.deletion_rate == 0.0
                and self.insertion_rate == 0.0)


def attack_edit(tokens, spec: EditAttackSpec, rng, vocab_size: int) -> np.ndarray:
    """Randomly substitute/delete tokens and insert new ones.

    One uniform per position decides substitute vs delete vs keep; one
    uniform per gap (before each position and after the last) decides
    insertion of a uniform random token.
    """
    t = np.asarray(tokens, dtype=np.int64)
    n = t.shape[0]
    u = rng.random(n)
    sub = u < spec.substitution_rate
    dele = (~sub) & (u < spec.substitution_rate + spec.deletion_rate)
    kept = t.copy()
    kept[sub] = rng.integers(0, vocab_size, size=int(sub.sum()))
    insert = rng.random(n + 1) < spec.insertion_rate
    ins_tokens = rng.integers(0, vocab_size, size=int(insert.sum()))

    out = []
    k = 0
    for i in range(n):
        if insert[i]:
            out.append(int(ins_tokens[k])); k += 1
        if not dele[i]:
            out.append(int(kept[i]))
    if insert[n]:
        out.append(int(ins_tokens[k]))
    return np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# score metrics
# ---------------------------------------------------------------------------

def _finite(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    return s[np.isfinite(s)]


def _confusion_f1(human, wm, threshold: float) -> float:
    tp = int(np.sum(wm > threshold))
    fp = int(np.sum(human > threshold))
    fn = len(wm) - tp
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def tpr_at_fpr(human_scores, wm_scores, fpr: float) -> tuple[float, float, float]:
    """(threshold, TPR, F1) with empirical FPR strictly under the target.

    The threshold is the smallest human score such that the fraction of human
    scores strictly above it is below `fpr`; TPR counts watermarked scores
    strictly above that threshold.  F1 assumes balanced classes.
    """
    human = np.asarray(human_scores, dtype=np.float64)
    wm = np.asarray(wm_scores, dtype=np.float64)
    if human.size == 0 or wm.size == 0:
        raise ValueError("score vectors must be non-empty")
    if not 0.0 < fpr < 1.0:
        raise ValueError("fpr target must lie in (0, 1)")
    finite = np.sort(_finite(human))
    if finite.size == 0:
        raise ValueError("human scores contain no finite values")
    candidates = np.unique(finite)
    # above[i] = finite human scores strictly above candidates[i]; NaN scores
    # (indeterminate detections) are never flagged but stay in the denominator
    above = finite.size - np.searchsorted(finite, candidates, side="right")
    ok = above / human.size < fpr
    if not np.any(ok):  # cannot happen for fpr > 0: the max candidate has 0 above
        raise ValueError("no threshold satisfies the fpr budget")
    threshold = float(candidates[np.argmax(ok)])  # smallest accepted candidate
    tpr = float(np.sum(wm > threshold)) / wm.size
    return threshold, tpr, _confusion_f1(human, wm, threshold)


def best_f1(human_scores, wm_scores) -> tuple[float, float]:
    """(threshold, F1) maximizing F1 over midpoint candidates.

    Candidates are the midpoints of consecutive sorted unique scores from the
    combined pool, plus one threshold below all scores; ties resolve to the
    lowest threshold.
    """
    human = np.asarray(human_scores, dtype=np.float64)
    wm = np.asarray(wm_scores, dtype=np.float64)
    if human.size == 0 or wm.size == 0:
        raise ValueError("score vectors must be non-empty")
    pool = np.unique(np.concatenate([_finite(human), _finite(wm)]))
    if pool.size == 0:
        raise ValueError("scores contain no finite values")
    candidates = np.concatenate([[pool[0] - 1.0],
                                 (pool[:-1] + pool[1:]) / 2.0])
    best_t, best = candidates[0], -1.0
    for t in candidates:
        f1 = _confusion_f1(human, wm, t)
        if f1 > best:
            best_t, best = float(t), f1
    return best_t, best


def roc_points(human_scores, wm_scores) -> list[tuple[float, float]]:
    """(FPR, TPR) pairs swept over all score thresholds, ascending in FPR."""
    human = np.asarray(human_scores, dtype=np.float64)
    wm = np.asarray(wm_scores, dtype=np.float64)
    pool = np.unique(np.concatenate([_finite(human), _finite(wm)]))
    hs = np.sort(_finite(human))
    ws = np.sort(_finite(wm))
    pts = [(0.0, 0.0)]
    for t in pool[::-1]:
        fpr = (human.size - np.searchsorted(hs, t, side="right")) / human.size
        tpr = (wm.size - np.searchsorted(ws, t, side="right")) / wm.size
        pts.append((float(fpr), float(tpr)))
    pts.append((1.0, 1.0))
    pts.sort()
    return pts


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """A full experiment: corpus shape, watermark, detectors, metrics."""

    corpus: CorpusConfig = CorpusConfig()
    watermark: WatermarkParams = WatermarkParams()
    methods: tuple[str, ...] = ("kgw", "sweet", "ewd")
    tau: float = 2.0
    min_scored: int = 15
    sweet_threshold: float | None = None    # explicit threshold ...
    sweet_selector: str = "median"          # ... or selected from human texts
    weight_spec: WeightFunctionSpec = field(default_factory=WeightFunctionSpec)
    fpr_targets: tuple[float, ...] = (0.01, 0.05)
    attack: EditAttackSpec | None = None
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one detector is required")
        if any(not 0.0 < f < 1.0 for f in self.fpr_targets):
            raise ValueError("fpr targets must lie in (0, 1)")


def detection_configs(spec: ExperimentSpec,
                      sweet_threshold: float | None = None) -> list[DetectionConfig]:
    """Materialize DetectionConfig records for the experiment's methods."""
    thr = sweet_threshold if sweet_threshold is not None else spec.sweet_threshold
    configs = []
    for method in spec.methods:
        configs.append(DetectionConfig(
            params=spec.watermark, vocab_size=spec.corpus.vocab_size,
            method=method, tau=spec.tau, min_scored=spec.min_scored,
            sweet_threshold=thr if method == "sweet" else None,
            weight_spec=spec.weight_spec))
    return configs


def _stack_records(records) -> tuple[np.ndarray, np.ndarray]:
    tokens = np.stack([r.tokens for r in records])
    se = np.stack([r.se for r in records])
    return tokens, se


def run_experiment(spec: ExperimentSpec) -> "MetricsReport":
    """Generate paired corpora, run every detector, compute metrics."""
    corpus, wparams = spec.corpus, spec.watermark
    n = corpus.count

    wm_records = generate_corpus(corpus, wparams, watermark=True, count=n)
    wm_tokens, wm_se = _stack_records(wm_records)
    hu_tokens, hu_se = human_corpus_arrays(corpus, wparams, count=n,
                                           start_index=n)

    if spec.attack is not None and not spec.attack.is_identity:
        rng = np.random.default_rng(spec.attack.rng_seed)
        edited = [attack_edit(t, spec.attack, rng, corpus.vocab_size)
                  for t in wm_tokens]
        lengths = {len(e) for e in edited}
        if len(lengths) == 1:
            new_len = lengths.pop()
            wm_tokens = np.stack(edited)
            wm_se = _profile_matrix_for_length(
                corpus, wparams, np.arange(n), new_len)
        else:
            # ragged after deletions/insertions: pad per-sequence detection
            return _run_experiment_ragged(spec, edited, hu_tokens, hu_se)

    sweet_thr = spec.sweet_threshold
    if "sweet" in spec.methods and sweet_thr is None:
        m = wparams.window
        sweet_thr = sweet_select_threshold(hu_se[:, m:].reshape(-1),
                                           spec.sweet_selector)
    configs = detection_configs(spec, sweet_threshold=sweet_thr)

    wm_res = detect_batch(wm_tokens, configs, se=wm_se)
    hu_res = detect_batch(hu_tokens, configs, se=hu_se)
    report = compute_metrics(spec, {m: r.z for m, r in hu_res.items()},
                             {m: r.z for m, r in wm_res.items()},
                             sweet_threshold=sweet_thr)
    _emit_outputs(spec, report, wm_res, hu_res,
                  (wm_tokens, wm_se), (hu_tokens, hu_se))
    return report


def _profile_matrix_for_length(corpus, wparams, seq_indices, length):
    cfg = replace(corpus, length=length)
    rows = [recomputed_entropies(cfg, wparams, int(i)) for i in seq_indices]
    return np.stack(rows)


def _run_experiment_ragged(spec, edited_tokens, hu_tokens, hu_se):
    """Per-sequence fallback when an attack changes sequence lengths."""
    corpus, wparams = spec.corpus, spec.watermark
    sweet_thr = spec.sweet_threshold
    if "sweet" in spec.methods and sweet_thr is None:
        m = wparams.window
        sweet_thr = sweet_select_threshold(hu_se[:, m:].reshape(-1),
                                           spec.sweet_selector)
    configs = detection_configs(spec, sweet_threshold=sweet_thr)

    z_wm = {c.method: [] for c in configs}
    for i, toks in enumerate(edited_tokens):
        cfg_len = replace(corpus, length=max(len(toks), wparams.window + 1))
        se = recomputed_entropies(cfg_len, wparams, i)[:len(toks)]
        for c in configs:
            if len(toks) <= wparams.window:
                z_wm[c.method].append(float("nan"))
                continue
            if c.method == "kgw":
                rep = detect_kgw(toks, c)
            elif c.method == "sweet":
                rep = detect_sweet(toks, se, c)
            else:
                rep = detect_ewd(toks, se, c)
            z_wm[c.method].append(rep.z)
    hu_res = detect_batch(hu_tokens, configs, se=hu_se)
    return compute_metrics(spec, {m: r.z for m, r in hu_res.items()},
                           {m: np.asarray(v) for m, v in z_wm.items()},
                           sweet_threshold=sweet_thr)


@dataclass
class MetricsReport:
    """Per-method detection quality metrics for one experiment."""

    methods: dict
    sweet_threshold: float | None = None

    def to_dict(self) -> dict:
        return {"sweet_threshold": self.sweet_threshold,
                "methods": self.methods}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def compute_metrics(spec: ExperimentSpec, z_human: dict, z_wm: dict,
                    sweet_threshold=None) -> MetricsReport:
    """TPR/F1 at each FPR budget, best F1, ROC, and z summaries per method."""
    methods = {}
    for method in spec.methods:
        zh = np.asarray(z_human[method], dtype=np.float64)
        zw = np.asarray(z_wm[method], dtype=np.float64)
        entry = {
            "n_human": int(zh.size),
            "n_watermarked": int(zw.size),
            "n_indeterminate_human": int(np.isnan(zh).sum()),
            "n_indeterminate_watermarked": int(np.isnan(zw).sum()),
            "z_human_mean": _nanmean(zh),
            "z_human_std": _nanstd(zh),
            "z_watermarked_mean": _nanmean(zw),
            "z_watermarked_std": _nanstd(zw),
            "at_fpr": {},
        }
        for target in spec.fpr_targets:
            thr, tpr, f1 = tpr_at_fpr(zh, zw, target)
            emp_fpr = float(np.sum(zh > thr)) / zh.size
            entry["at_fpr"][f"{target:g}"] = {
                "threshold": thr, "tpr": tpr, "f1": f1,
                "empirical_fpr": emp_fpr,
            }
        thr_b, f1_b = best_f1(zh, zw)
        entry["best_f1"] = f1_b
        entry["best_f1_threshold"] = thr_b
        entry["roc"] = [[f, t] for f, t in roc_points(zh, zw)]
        methods[method] = entry
    return MetricsReport(methods=methods, sweet_threshold=sweet_threshold)


def _nanmean(x):
    x = x[np.isfinite(x)]
    return float(x.mean()) if x.size else None


def _nanstd(x):
    x = x[np.isfinite(x)]
    return float(x.std()) if x.size else None


def _emit_outputs(spec, report, wm_res, hu_res, wm_data, hu_data):
    """Write metrics JSON and plot-ready delimited text when paths are set."""
    out = spec.outputs or {}
    if "metrics" in out:
        with open(out["metrics"], "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    if "plots" not in out:
        return
    import os
    os.makedirs(out["plots"], exist_ok=True)
    for method in spec.methods:
        with open(f"{out['plots']}/z_scores_{method}.csv", "w") as fh:
            fh.write("label,z\n")
            for z in wm_res[method].z:
                fh.write(f"watermarked,{z:.6f}\n")
            for z in hu_res[method].z:
                fh.write(f"human,{z:.6f}\n")
        with open(f"{out['plots']}/roc_{method}.csv", "w") as fh:
            fh.write("fpr,tpr\n")
            for f, t in report.methods[method]["roc"]:
                fh.write(f"{f:.6f},{t:.6f}\n")
    _emit_weight_green_scatter(spec, out["plots"], wm_data, hu_data)


def _emit_weight_green_scatter(spec, plots_dir, wm_data, hu_data):
    """Mean green rate as a function of token weight, per label."""
    from .weights import compute_weights

    corpus, wp = spec.corpus, spec.watermark
    bounds = entropy_bounds(corpus.vocab_size, wp.spike_modulus)
    with open(f"{plots_dir}/weight_vs_green.csv", "w") as fh:
        fh.write("label,weight_bin,green_rate,count\n")
        for label, (toks, se) in (("watermarked", wm_data), ("human", hu_data)):
            flags = green_flags(wp.key, toks, wp.window, corpus.vocab_size,
                                wp.gamma)
            w = compute_weights(se[:, wp.window:], spec.weight_spec,
                                bounds=bounds).reshape(-1)
            f = flags.reshape(-1)
            bins = np.linspace(0.0, max(float(w.max()), 1e-9), 21)
            idx = np.clip(np.digitize(w, bins) - 1, 0, 19)
            for b in range(20):
                sel = idx == b
                if sel.sum() == 0:
                    continue
                center = 0.5 * (bins[b] + bins[b + 1])
                fh.write(f"{label},{center:.6f},{f[sel].mean():.6f},"
                         f"{int(sel.sum())}\n")


# ---------------------------------------------------------------------------
# theory-matched Monte Carlo
# ---------------------------------------------------------------------------

def simulate_theory(params: AnalysisParams, n_sequences: int = 10000,
                    rng_seed: int = 0,
                    methods=("kgw", "sweet", "ewd")) -> dict:
    """Monte Carlo miss rates with green probabilities set exactly to the
    per-token lower bound, compared against the closed-form predictions.

    Each sequence draws `tokens` entropies i.i.d. from the power law; each
    token is green with probability C1*SE.  The z statistic of every detector
    is then evaluated exactly as in detection, and its miss rate at the z
    threshold is compared with `predict_type2`.
    """
    rng = np.random.default_rng(rng_seed)
    t, g, c1 = params.tokens, params.gamma, params.c1
    dist = params.entropy_dist
    se = dist.loc + dist.scale * rng.random((n_sequences, t)) ** (1.0 / dist.a)
    flags = rng.random((n_sequences, t)) < np.clip(c1 * se, 0.0, 1.0)
    zt = params.z_threshold

    out = {}
    for method in methods:
        if method == "kgw":
            s = flags.sum(axis=1)
            z = (s - g * t) / math.sqrt(g * (1 - g) * t)
        elif method == "sweet":
            keep = se > params.sweet_threshold
            tt = keep.sum(axis=1)
            s = (flags & keep).sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = (s - g * tt) / np.sqrt(g * (1 - g) * tt)
            z = np.where(tt == 0, np.nan, z)
        else:
            w = np.maximum(se - params.c0, 0.0)
            s = (w * flags).sum(axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = (s - g * w.sum(axis=1)) / np.sqrt(
                    g * (1 - g) * (w * w).sum(axis=1))
        valid = np.isfinite(z)
        fnr = float((z[valid] <= zt).mean())
        pred = predict_type2(method, params)
        out[method] = {
            "empirical_fnr": fnr,
            "predicted_fnr": pred.predicted_error,
            "mu": pred.mu, "sigma": pred.sigma,
            "threshold_mass": pred.threshold_mass,
            "n": int(valid.sum()),
        }
    return out


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------

def timing_report(spec: ExperimentSpec, n_sequences: int = 100) -> dict:
    """Mean per-sequence detection seconds per method (reference detectors).

    Entropy recomputation is charged to the methods that need it (sweet and
    ewd), mirroring a detector that re-runs the model.
    """
    corpus, wp = spec.corpus, spec.watermark
    n = min(n_sequences, corpus.count)
    tokens, _ = human_corpus_arrays(corpus, wp, count=n)
    sweet_thr = spec.sweet_threshold
    if sweet_thr is None:
        lo, hi = entropy_bounds(corpus.vocab_size, wp.spike_modulus)
        sweet_thr = 0.5 * (lo + hi)
    configs = {c.method: c for c in detection_configs(
        replace(spec, methods=("kgw", "sweet", "ewd")),
        sweet_threshold=sweet_thr)}

    timings = {}
    for method in spec.methods:
        cfg = configs[method]
        start = time.perf_counter()
        for i in range(n):
            if method == "kgw":
                detect_kgw(tokens[i], cfg)
            else:
                se = recomputed_entropies(corpus, wp, i)
                if method == "sweet":
                    detect_sweet(tokens[i], se, cfg)
                else:
                    detect_ewd(tokens[i], se, cfg)
        timings[method] = (time.perf_counter() - start) / n
    return timings
