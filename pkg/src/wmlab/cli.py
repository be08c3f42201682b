"""Command line interface.

Subcommands: generate (corpus -> file), detect (corpus + config -> reports),
theory (parameters -> prediction table), simulate (Monte Carlo validation of
the predictions), attack (corpus -> edited corpus), eval (reports ->
metrics), timing (per-method detection seconds).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .config import experiment_from_config, load_config
from .detectors import detect, sweet_select_threshold
from .harness import (ExperimentSpec, attack_edit, compute_metrics,
                      detection_configs, simulate_theory, timing_report)
from .simgen import (GenerationRecord, generate_corpus, read_corpus,
                     recomputed_entropies, write_corpus)
from .theory import (AnalysisParams, powerlaw_moment, predict_type2,
                     type1_error)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override corpus.rng_seed")
    p.add_argument("--output", default=None, help="override the output path")
    p.add_argument("--format", choices=("human", "machine"), default="human",
                   help="human-readable text or machine-readable JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmlab",
        description="Entropy-weighted watermark detection laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled synthetic corpus")
    _add_common(p)

    p = sub.add_parser("detect", help="run configured detectors over a corpus file")
    _add_common(p)
    p.add_argument("--input", required=True, help="corpus JSONL file")
    p.add_argument("--verbose-reports", action="store_true",
                   help="include per-token arrays in each report")

    p = sub.add_parser("theory", help="closed-form error predictions")
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo check of the predictions")
    _add_common(p)

    p = sub.add_parser("attack", help="apply random token edits to a corpus file")
    _add_common(p)
    p.add_argument("--input", required=True, help="corpus JSONL file")

    p = sub.add_parser("eval", help="score metrics from detection reports")
    _add_common(p)
    p.add_argument("--input", required=True, help="reports JSONL file")

    p = sub.add_parser("timing", help="mean per-sequence detection time")
    _add_common(p)
    return parser


def _analysis_params(values: dict, spec: ExperimentSpec) -> AnalysisParams:
    tokens = values.get("theory.tokens",
                        spec.corpus.length - spec.watermark.window)
    c0 = spec.weight_spec.shift if spec.weight_spec.family == "linear-shift" \
        else spec.corpus.powerlaw.loc
    sweet_thr = spec.sweet_threshold
    if sweet_thr is None:
        sweet_thr = 0.695
    return AnalysisParams(
        gamma=spec.watermark.gamma, delta=spec.watermark.delta,
        tokens=tokens, entropy_dist=spec.corpus.powerlaw, c0=c0,
        sweet_threshold=sweet_thr, z_threshold=spec.tau)


def cmd_generate(args, values, spec) -> int:
    n = spec.corpus.count
    records = generate_corpus(spec.corpus, spec.watermark, watermark=True,
                              count=n)
    records += generate_corpus(spec.corpus, spec.watermark, watermark=False,
                               count=n, start_index=n)
    path = args.output or spec.outputs.get("corpus")
    if path is None:
        raise SystemExit("no output path: pass --output or set output.corpus")
    write_corpus(path, records)
    print(f"wrote {2 * n} records ({n} watermarked + {n} human) to {path}")
    return 0


def cmd_detect(args, values, spec) -> int:
    records = read_corpus(args.input)
    sweet_thr = spec.sweet_threshold
    if "sweet" in spec.methods and sweet_thr is None:
        m = spec.watermark.window
        human_se = [r.se[m:] for r in records if r.label == "human"]
        if not human_se:
            raise SystemExit("sweet.selector needs human records in the corpus")
        sweet_thr = sweet_select_threshold(np.concatenate(human_se),
                                           spec.sweet_selector)
    configs = detection_configs(spec, sweet_threshold=sweet_thr)
    path = args.output or spec.outputs.get("reports")
    lines = []
    for rec in records:
        for cfg in configs:
            if len(rec.tokens) <= spec.watermark.window:
                # e.g. a heavily-deleted attacked record: nothing to score
                obj = {"seq_index": rec.seq_index, "label": rec.label,
                       "method": cfg.method, "z": None, "s_green": 0.0,
                       "t_scored": 0, "verdict": "indeterminate",
                       "tau": cfg.tau}
            else:
                rep = detect(rec.tokens, rec.se, cfg)
                obj = {"seq_index": rec.seq_index, "label": rec.label}
                obj.update(rep.to_dict(verbose=args.verbose_reports))
            lines.append(json.dumps(obj, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(lines)} reports to {path}")
    return 0


def cmd_theory(args, values, spec) -> int:
    params = _analysis_params(values, spec)
    rows = [predict_type2(m, params) for m in ("kgw", "sweet", "ewd")]
    moments = [powerlaw_moment(params.entropy_dist, n) for n in (1, 2, 3, 4)]
    if args.format == "machine":
        out = {
            "z_threshold": params.z_threshold,
            "type1_error": type1_error(params.z_threshold),
            "entropy_moments": moments,
            "methods": {r.method: {
                "mu": r.mu, "sigma": r.sigma,
                "threshold_mass": r.threshold_mass,
                "predicted_fnr": r.predicted_error} for r in rows},
        }
        print(json.dumps(out, sort_keys=True))
        return 0
    print(f"z threshold      : {params.z_threshold:g}")
    print(f"type-I error     : {type1_error(params.z_threshold):.4%}")
    print("entropy moments  : " + "  ".join(
        f"E{n}={m:.4f}" for n, m in enumerate(moments, start=1)))
    if not all(a > b for a, b in zip(moments, moments[1:])):
        print("warning: moments are not strictly decreasing; for an entropy "
              "distribution supported inside (0, 1) they must be, so the "
              "parameters look inconsistent")
    print(f"{'method':<8}{'mu':>10}{'sigma':>10}{'threshold':>12}{'FNR':>10}")
    for r in rows:
        print(f"{r.method:<8}{r.mu:>10.3f}{r.sigma:>10.3f}"
              f"{r.threshold_mass:>12.3f}{r.predicted_error:>10.2%}")
    return 0


def cmd_simulate(args, values, spec) -> int:
    params = _analysis_params(values, spec)
    n = values.get("simulate.sequences", 10000)
    seed = args.seed if args.seed is not None else spec.corpus.rng_seed
    table = simulate_theory(params, n_sequences=n, rng_seed=seed)
    if args.format == "machine":
        print(json.dumps(table, sort_keys=True))
        return 0
    print(f"theory-matched Monte Carlo, {n} sequences, "
          f"z threshold {params.z_threshold:g}")
    print(f"{'method':<8}{'empirical FNR':>15}{'predicted FNR':>15}{'diff':>9}")
    for m, row in table.items():
        diff = row["empirical_fnr"] - row["predicted_fnr"]
        print(f"{m:<8}{row['empirical_fnr']:>15.4f}"
              f"{row['predicted_fnr']:>15.4f}{diff:>+9.4f}")
    return 0


def cmd_attack(args, values, spec) -> int:
    if spec.attack is None:
        raise SystemExit("config has no attack.* settings")
    records = read_corpus(args.input)
    rng = np.random.default_rng(spec.attack.rng_seed)
    out = []
    for rec in records:
        edited = attack_edit(rec.tokens, spec.attack, rng,
                             spec.corpus.vocab_size)
        cfg = replace(spec.corpus,
                      length=max(len(edited), spec.watermark.window + 1))
        se = recomputed_entropies(cfg, spec.watermark, rec.seq_index)[:len(edited)]
        out.append(GenerationRecord(tokens=edited, se=se, label=rec.label,
                                    seq_index=rec.seq_index))
    path = args.output
    if path is None:
        raise SystemExit("attack requires --output")
    write_corpus(path, out)
    print(f"wrote {len(out)} attacked records to {path}")
    return 0


def cmd_eval(args, values, spec) -> int:
    z_h: dict[str, list] = {m: [] for m in spec.methods}
    z_w: dict[str, list] = {m: [] for m in spec.methods}
    with open(args.input, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            method = obj["method"]
            if method not in z_h:
                continue
            z = obj["z"] if obj["z"] is not None else float("nan")
            (z_w if obj["label"] == "watermarked" else z_h)[method].append(z)
    report = compute_metrics(spec, {m: np.asarray(v) for m, v in z_h.items()},
                             {m: np.asarray(v) for m, v in z_w.items()},
                             sweet_threshold=spec.sweet_threshold)
    if args.format == "machine":
        print(report.to_json())
    else:
        for method, entry in report.methods.items():
            print(f"[{method}]")
            for target, row in entry["at_fpr"].items():
                print(f"  TPR@{float(target):.0%}FPR = {row['tpr']:.3f}  "
                      f"F1 = {row['f1']:.3f}  (threshold {row['threshold']:.3f})")
            print(f"  best F1 = {entry['best_f1']:.3f}")
    path = args.output or spec.outputs.get("metrics")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        print(f"wrote metrics to {path}")
    return 0


def cmd_timing(args, values, spec) -> int:
    table = timing_report(spec)
    if args.format == "machine":
        print(json.dumps(table, sort_keys=True))
        return 0
    for method, seconds in table.items():
        print(f"{method:<8}{seconds * 1e3:>10.3f} ms/sequence")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "detect": cmd_detect,
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "timing": cmd_timing,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    values = load_config(args.config)
    spec = experiment_from_config(values, seed_override=args.seed)
    return _COMMANDS[args.command](args, values, spec)


if __name__ == "__main__":
    sys.exit(main())
