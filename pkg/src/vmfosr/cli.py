"""Command-line entry point: ``vmfosr {generate,train,evaluate,gradcheck,ablate}``.

Exit codes: 0 success, 1 missing input files, 2 config error,
3 numeric failure, 4 gradient-check failure.
"""
import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .datagen import generate_dataset, openness, read_dataset_csv, write_dataset_csv
from .errors import (
    ConfigError,
    GradCheckFailure,
    MissingCheckpoint,
    NearZeroNorm,
    NonFiniteEvaluation,
    NonFiniteLoss,
)
from .experiment import DATA_STREAM, config_hash, evaluate_model, train_model
from .gradcheck import run_gradcheck
from .losses import vmfal_grad_z
from .metrics import aggregate, oscr_curve, roc_curve
from .model import load_checkpoint, save_checkpoint
from .numerics import seeded_rng
from .scoring import RULES, write_score_dump
from .training import extract_features

log = logging.getLogger("vmfosr")

EXIT_OK, EXIT_MISSING, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GRADCHECK = 0, 1, 2, 3, 4
ABLATIONS = ("no-mixup", "no-ls", "no-r-ortho")


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def with_ablations(cfg, disabled):
    """Copy of ``cfg`` with the named components switched off."""
    aug, train = cfg.augment, cfg.train
    if "no-mixup" in disabled:
        aug = replace(aug, mixup_enabled=False)
    if "no-ls" in disabled:
        aug = replace(aug, ls_enabled=False)
    if "no-r-ortho" in disabled:
        train = replace(train, r_ortho_enabled=False)
    return replace(cfg, augment=aug, train=train)


def ablation_tag(cfg):
    off = [name for name, on in (("no-mixup", cfg.augment.mixup_enabled),
                                 ("no-ls", cfg.augment.ls_enabled),
                                 ("no-r-ortho", cfg.train.r_ortho_enabled)) if not on]
    return "+".join(off) or "full"


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seeds=[args.seed])
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.rules:
        rules = [r.strip() for r in args.rules.split(",") if r.strip()]
        bad = [r for r in rules if r not in RULES]
        if bad or not rules:
            raise ConfigError(f"--rules must name rules from {RULES}, got {args.rules!r}")
        cfg = replace(cfg, scoring=replace(cfg.scoring, rules=rules))
    disabled = [name for name in ABLATIONS if getattr(args, name.replace("-", "_"), False)]
    return with_ablations(cfg, disabled)


class Workspace:
    """Output layout under ``cfg.output_dir``."""

    def __init__(self, cfg):
        self.root = Path(cfg.output_dir)
        self.data = self.root / "data"
        self.run = self.root / ablation_tag(cfg)

    def checkpoint(self, seed):
        return self.run / "checkpoints" / f"seed-{seed}.json"


def load_data(cfg):
    """``(train, test, n_train_classes, n_test_classes)`` from CSV or the synthetic spec."""
    if cfg.data_dir:
        data_dir = Path(cfg.data_dir)
        if not (data_dir / "inputs.csv").exists():
            raise FileNotFoundError(f"no inputs.csv in {data_dir}")
        train, test = read_dataset_csv(data_dir)
        n_train = int(train.labels.max()) + 1
        n_test = None
        manifest = data_dir / "manifest.json"
        if manifest.exists():
            info = json.loads(manifest.read_text())
            n_train, n_test = info["n_known_classes"], info["n_test_classes"]
        return train, test, n_train, n_test
    spec = cfg.dataset
    train, test = generate_dataset(spec, seeded_rng(spec.seed, DATA_STREAM))
    return train, test, spec.n_known_classes, spec.n_test_classes


def model_config(cfg, train, n_train_classes):
    return replace(cfg.model, input_dim=train.inputs.shape[1], C=n_train_classes)


def cmd_generate(cfg):
    spec = cfg.dataset
    train, test = generate_dataset(spec, seeded_rng(spec.seed, DATA_STREAM))
    ws = Workspace(cfg)
    write_dataset_csv(ws.data, train, test)
    write_json(ws.data / "manifest.json", {
        "dataset": cfg.to_dict()["dataset"],
        "n_known_classes": spec.n_known_classes,
        "n_test_classes": spec.n_test_classes,
        "n_train_samples": len(train),
        "n_test_samples": len(test),
        "openness": openness(spec.n_known_classes, spec.n_test_classes),
    })
    log.info("wrote %d train / %d test samples to %s", len(train), len(test), ws.data)
    return ws.data


def cmd_train(cfg):
    train, _, n_train, _ = load_data(cfg)
    mcfg = model_config(cfg, train, n_train)
    ws = Workspace(cfg)
    runs = []
    for seed in cfg.seeds:
        state, _, h1, h2 = train_model(train, mcfg, cfg.train, cfg.augment, seed)
        path = ws.checkpoint(seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(state, path, extra={"seed": seed, "tag": ablation_tag(cfg)})
        runs.append({"seed": seed, "checkpoint": str(path),
                     "stage1_loss": h1["loss"], "embedding_norm_dev": h1["embedding_norm_dev"],
                     "stage2_loss": h2["loss"], "stage2_accuracy": h2["accuracy"]})
        log.info("seed %d: stage-one loss %.4f -> %.4f, bank accuracy %.3f", seed,
                 h1["loss"][0] if h1["loss"] else float("nan"),
                 h1["loss"][-1] if h1["loss"] else float("nan"),
                 h2["accuracy"][-1] if h2["accuracy"] else float("nan"))
    manifest = {
        "tag": ablation_tag(cfg),
        "ablation": {"mixup": cfg.augment.mixup_enabled, "label_smoothing": cfg.augment.ls_enabled,
                     "r_ortho": cfg.train.r_ortho_enabled},
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg.dataset, mcfg, cfg.train, cfg.augment),
        "runs": runs,
    }
    write_json(ws.run / "train_manifest.json", manifest)
    return manifest


def _operating_points(scores, known, thetas):
    return [{"theta": t,
             "known_accepted": float(np.mean(scores[known] >= t)),
             "unknown_rejected": float(np.mean(scores[~known] < t))} for t in thetas]


def cmd_evaluate(cfg, checkpoints=None):
    train, test, n_train, n_test = load_data(cfg)
    ws = Workspace(cfg)
    if checkpoints is None:
        manifest = ws.run / "train_manifest.json"
        if not manifest.exists():
            raise MissingCheckpoint(f"no train manifest at {manifest}; run 'train' first")
        checkpoints = [(r["seed"], r["checkpoint"]) for r in json.loads(manifest.read_text())["runs"]]
    rules = tuple(cfg.scoring.rules)
    reports, operating = [], {}
    offset = len(train)
    for seed, path in checkpoints:
        state = load_checkpoint(path)
        bank = extract_features(state, train, source=str(path))
        meta = {"checkpoint": str(path), "tag": ablation_tag(cfg)}
        seed_reports, _, logits, scores = evaluate_model(
            state, bank, test, rules, cfg.scoring.k, seed, n_train, n_test, meta)
        reports.extend(seed_reports)
        pred = np.argmax(logits, axis=1)
        known = test.known
        correct = pred[known] == test.labels[known]
        dump = []
        for rule, s in scores.items():
            fpr, tpr = roc_curve(s[known], s[~known])
            write_rows(ws.run / "curves" / f"roc_seed{seed}_{rule}.csv", ["fpr", "tpr"], zip(fpr, tpr))
            fpr, ccr = oscr_curve(s[known], correct, s[~known])
            write_rows(ws.run / "curves" / f"oscr_seed{seed}_{rule}.csv", ["fpr", "ccr"], zip(fpr, ccr))
            dump.extend((offset + i, rule, s[i], pred[i], known[i]) for i in range(len(test)))
            if cfg.scoring.thetas:
                operating[f"{seed}/{rule}"] = _operating_points(s, known, cfg.scoring.thetas)
        ws.run.mkdir(parents=True, exist_ok=True)
        (ws.run / "scores").mkdir(exist_ok=True)
        write_score_dump(ws.run / "scores" / f"seed{seed}.csv", dump)
    agg = aggregate(reports)
    out = {"tag": ablation_tag(cfg), "reports": [r.to_dict() for r in reports], "aggregate": agg}
    if operating:
        out["operating_points"] = operating
    write_json(ws.run / "report.json", out)
    header = list(reports[0].csv_row())
    write_rows(ws.run / "report.csv", header, ([r.csv_row()[h] for h in header] for r in reports))
    write_rows(ws.run / "aggregate.csv", ["rule", "metric", "mean", "std", "n_seeds"],
               ([rule, name, v["mean"], v["std"], stats["n_seeds"]]
                for rule, stats in agg.items() for name, v in stats.items() if name != "n_seeds"))
    for rule, stats in agg.items():
        log.info("%-8s acc %.3f  auroc %.3f  oscr %.3f  dtacc %.3f", rule, stats["accuracy"]["mean"],
                 stats["auroc"]["mean"], stats["oscr"]["mean"], stats["dtacc"]["mean"])
    return out


def cmd_ablate(cfg):
    """Train and evaluate the full model and each single-component ablation."""
    base = with_ablations(replace(cfg, augment=replace(cfg.augment, mixup_enabled=True, ls_enabled=True),
                                  train=replace(cfg.train, r_ortho_enabled=True)), [])
    summary = {}
    for variant in ("full",) + ABLATIONS:
        vcfg = with_ablations(base, [] if variant == "full" else [variant])
        cmd_train(vcfg)
        agg = cmd_evaluate(vcfg)["aggregate"]
        stats = next(iter(agg.values()))
        summary[variant] = {name: stats[name]["mean"] for name in
                            ("accuracy", "angular_separability", "norm_separability", "dispersion_degrees")}
        summary[variant]["auroc"] = {rule: s["auroc"]["mean"] for rule, s in agg.items()}
    full = summary["full"]
    checks = {
        "mixup_lowers_angular_separability":
            full["angular_separability"] < summary["no-mixup"]["angular_separability"],
        "label_smoothing_raises_norm_separability":
            full["norm_separability"] > summary["no-ls"]["norm_separability"],
        "r_ortho_raises_dispersion":
            full["dispersion_degrees"] > summary["no-r-ortho"]["dispersion_degrees"],
    }
    out = {"seeds": cfg.seeds, "variants": summary, "directional_checks": checks}
    root = Path(cfg.output_dir)
    write_json(root / "ablation.json", out)
    write_rows(root / "ablation.csv",
               ["variant", "accuracy", "angular_separability", "norm_separability", "dispersion_degrees"],
               ([v, s["accuracy"], s["angular_separability"], s["norm_separability"], s["dispersion_degrees"]]
                for v, s in summary.items()))
    for name, ok in checks.items():
        log.info("%-42s %s", name, "yes" if ok else "no")
    return out


def _flipped_loss_gradient(z, S_i, M, tau):
    return -vmfal_grad_z(z, S_i, M, tau)


def cmd_gradcheck(cfg, instances=40, inject_sign_flip=False):
    grad_fn = _flipped_loss_gradient if inject_sign_flip else vmfal_grad_z
    path = Path(cfg.output_dir) / "gradcheck.json"
    try:
        report = run_gradcheck(seed=cfg.seeds[0], n_instances=instances, grad_fn=grad_fn)
    except GradCheckFailure as exc:
        write_json(path, exc.report)
        _log_gradcheck(exc.report)
        raise
    write_json(path, report)
    _log_gradcheck(report)
    return report


def _log_gradcheck(report):
    for block, err in sorted(report["worst_relative_error"].items()):
        flag = "FAIL" if block in report["failing_blocks"] else "ok"
        log.info("%-14s %.3e  %s", block, err, flag)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--seed", type=int, help="run a single seed instead of the config's list")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--no-mixup", action="store_true", help="disable Mixup")
    common.add_argument("--no-ls", action="store_true", help="disable label smoothing")
    common.add_argument("--no-r-ortho", action="store_true", help="disable the orthogonality regularizer")
    common.add_argument("--rules", help="comma-separated scoring rules, e.g. maxlogit,knn")

    parser = argparse.ArgumentParser(prog="vmfosr", description="Hyperspherical open-set recognition experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the synthetic dataset as CSV")
    sub.add_parser("train", parents=[common], help="run both training stages for every seed")
    ev = sub.add_parser("evaluate", parents=[common], help="score the test split and write reports")
    ev.add_argument("--checkpoint", action="append",
                    help="evaluate this checkpoint instead of the train manifest (repeatable)")
    gc = sub.add_parser("gradcheck", parents=[common], help="finite-difference audit of all gradients")
    gc.add_argument("--instances", type=int, default=40, help="random instances for the loss gradient")
    gc.add_argument("--inject-sign-flip", action="store_true",
                    help="negative control: flip the sign of the loss gradient")
    sub.add_parser("ablate", parents=[common], help="full model vs each single-component ablation")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "evaluate":
            checkpoints = None
            if args.checkpoint:
                checkpoints = []
                for path in args.checkpoint:
                    if not Path(path).exists():
                        raise MissingCheckpoint(f"no checkpoint at {path}")
                    extra = json.loads(Path(path).read_text()).get("extra", {})
                    checkpoints.append((extra.get("seed", cfg.seeds[0]), path))
            cmd_evaluate(cfg, checkpoints)
        elif args.command == "gradcheck":
            cmd_gradcheck(cfg, args.instances, args.inject_sign_flip)
        elif args.command == "ablate":
            cmd_ablate(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (NonFiniteLoss, NonFiniteEvaluation, NearZeroNorm) as exc:
        log.error("numeric failure: %s", exc)
        if getattr(exc, "diagnostic", None):
            log.error("diagnostic: %s", json.dumps(exc.diagnostic, default=_jsonable))
        return EXIT_NUMERIC
    except GradCheckFailure as exc:
        log.error("gradient check failed: %s", exc)
        return EXIT_GRADCHECK
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return EXIT_MISSING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
