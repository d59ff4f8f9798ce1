"""Command-line interface: ``growthmic {simulate,extract,train,predict,evaluate,run}``.

Exit codes: 0 success, 2 bad input (malformed files, bad config, schema
mismatch), 3 numerical failure (IRLS non-convergence, singular systems).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as gio
from .config import config_to_dict, load_config
from .evaluation import (
    categorical_agreement,
    essential_agreement,
    format_agreement_table,
    mic_to_bin,
    residual_table,
    split_panels,
)
from .glm import ConvergenceError
from .pipeline import PipelineConfig, extract_panel, predict_panel, train
from .sim import simulate_dataset

log = logging.getLogger("growthmic")

DEFAULTS_HELP = """\
defaults (JSON config keys in brackets):
  readiness thresholds 0.07 / 0.2 redox, failure after 16 h  [features.readiness]
  LOESS span 0.5                                                [features.span]
  loss weights w1=5, w2=1, w3=0                                 [loss_weights]
  training fraction 0.65                                        [split.train_fraction]
  call threshold 0.9 on P(estimate +/- 1 dilution)              [call_threshold]
"""


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(
            cfg,
            simulation=dataclasses.replace(cfg.simulation, seed=args.seed),
            split_seed=args.seed,
        )
    if getattr(args, "n_panels", None) is not None:
        cfg = dataclasses.replace(cfg, simulation=dataclasses.replace(cfg.simulation, n_panels=args.n_panels))
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_distinct(inputs, out: Path, outputs) -> None:
    targets = {(out / name).resolve() for name in outputs}
    for p in inputs:
        if p is not None and Path(p).resolve() in targets:
            raise ValueError(f"input {p} would be overwritten by an output in {out}")


def cmd_simulate(args) -> None:
    cfg = _config(args)
    out = _out(args)
    panels, manifest = simulate_dataset(cfg.simulation)
    gio.write_dataset(panels, out / "dataset.csv")
    gio.write_references(panels, out / "references.csv")
    gio.write_json(manifest, out / "manifest.json")
    log.info("wrote %d panels to %s", len(panels), out)


def cmd_extract(args) -> None:
    cfg = _config(args)
    out = _out(args)
    _check_distinct([args.dataset, args.references], out, ["features.csv"])
    refs = gio.read_references(args.references) if args.references else None
    panels = gio.read_dataset(args.dataset, refs)
    feats = [extract_panel(p, cfg.features) for p in panels]
    gio.write_features(feats, out / "features.csv")
    log.info("extracted features for %d panels (%d ready)", len(feats), sum(f.ready for f in feats))


def cmd_train(args) -> None:
    cfg = _config(args)
    out = _out(args)
    _check_distinct([args.features], out, ["model.json", "search_report.csv"])
    feats = gio.read_features(args.features)
    ready = [f for f in feats if f.ready]
    if not ready:
        raise ValueError("no ready panels in feature file")
    model = train(
        feats, cfg.candidate_features, exhaustive_cap=cfg.exhaustive_cap, top_k=cfg.top_k, seed=cfg.split_seed
    )
    gio.save_model(model, ready[0].dilutions, cfg.features, out / "model.json")
    gio.write_search_report({"linear": model.stage1, "polynomial": model.stage2}, out / "search_report.csv")
    log.info("selected terms %s", model.basis.terms)


def cmd_predict(args) -> None:
    cfg = _config(args)
    out = _out(args)
    _check_distinct([args.model, args.dataset], out, ["predictions.csv"])
    model, grid, feature_config = gio.load_model(args.model)
    panels = gio.read_dataset(args.dataset)
    preds = []
    for p in panels:
        if not np.allclose(p.dilutions, grid):
            raise ValueError(f"panel {p.panel_id} dilutions differ from the model's grid")
        preds.append(predict_panel(model, extract_panel(p, feature_config), cfg.weights, cfg.call_threshold))
    gio.write_predictions(preds, out / "predictions.csv", cfg.weights)


EVALUATION_OUTPUTS = ("essential_agreement.csv", "categorical_agreement.csv", "residuals.csv", "summary.txt")


def evaluate_rows(rows, refs, cfg: PipelineConfig, out: Path) -> dict:
    """Write agreement reports for prediction rows; return the reports."""
    ready = [r for r in rows if "distribution" in r and r["panel_id"] in refs]
    ref_bins = [mic_to_bin(refs[r["panel_id"]], r["distribution"].dilutions) for r in ready]
    modal_calls = [(r["modal_index"], b) for r, b in zip(ready, ref_bins)]
    dt_calls = [(r["dt_index"], b) for r, b in zip(ready, ref_bins)]
    dists = [r["distribution"] for r in ready]
    reports = {"Modal MIC": essential_agreement(modal_calls), "Decision theoretic MIC": essential_agreement(dt_calls)}

    modal_res = residual_table(modal_calls, dists, cfg.weights)
    dt_res = residual_table(dt_calls, dists, cfg.weights)
    confident = {
        "Modal MIC": essential_agreement([modal_calls[i] for i in modal_res.confident]),
        "Decision theoretic MIC": essential_agreement([dt_calls[i] for i in dt_res.confident]),
    }

    ea_rows = [["all", name] + list(rep.as_row().values()) for name, rep in reports.items()]
    ea_rows += [["modal_prob>=0.5", name] + list(rep.as_row().values()) for name, rep in confident.items()]
    gio.atomic_write(
        out / "essential_agreement.csv",
        gio._csv_text(["subset", "estimator", *reports["Modal MIC"].as_row().keys()], ea_rows),
    )
    res_rows = [
        [r["panel_id"], m.residual, gio._fmt(m.modal_loss), d.residual, gio._fmt(d.dt_loss), int(i in modal_res.confident)]
        for i, (r, m, d) in enumerate(zip(ready, modal_res.rows, dt_res.rows))
    ]
    gio.atomic_write(
        out / "residuals.csv",
        gio._csv_text(
            ["panel_id", "modal_residual", "one_minus_modal_prob", "dt_residual", "dt_expected_loss", "modal_prob_ge_0.5"],
            res_rows,
        ),
    )
    text = [
        format_agreement_table(reports, "Essential agreement (%), all ready panels"),
        "",
        format_agreement_table(confident, "Essential agreement (%), panels with P(modal MIC) >= 0.5"),
    ]
    cat = {}
    if cfg.breakpoints is not None and ready:
        grid = ready[0]["distribution"].dilutions
        cat = {
            "Modal MIC": categorical_agreement(modal_calls, cfg.breakpoints, grid),
            "Decision theoretic MIC": categorical_agreement(dt_calls, cfg.breakpoints, grid),
        }
        gio.atomic_write(
            out / "categorical_agreement.csv",
            gio._csv_text(
                ["estimator", *cat["Modal MIC"].as_row().keys()],
                [[name] + list(rep.as_row().values()) for name, rep in cat.items()],
            ),
        )
        text += ["", "Categorical agreement"]
        for name, rep in cat.items():
            text.append(
                f"{name:<28} CA {rep.agreement_pct:6.2f}%  very major {rep.very_major_pct:5.2f}%"
                f"  major {rep.major_pct:5.2f}%  minor {rep.minor}"
            )
    n_skipped = len(rows) - len(ready)
    text += ["", f"panels evaluated: {len(ready)}; not ready or without reference: {n_skipped}"]
    gio.atomic_write(out / "summary.txt", "\n".join(text) + "\n")
    return {"essential": reports, "confident": confident, "categorical": cat}


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    out = _out(args)
    _check_distinct([args.predictions, args.references], out, EVALUATION_OUTPUTS)
    rows = gio.read_predictions(args.predictions)
    refs = gio.read_references(args.references)
    evaluate_rows(rows, refs, cfg, out)
    print((out / "summary.txt").read_text(), end="")


def cmd_run(args) -> None:
    """Simulate, split, extract, train, predict and evaluate in one go."""
    cfg = _config(args)
    out = _out(args)
    panels, manifest = simulate_dataset(cfg.simulation)
    gio.write_dataset(panels, out / "dataset.csv")
    gio.write_references(panels, out / "references.csv")
    gio.write_json(manifest, out / "manifest.json")
    gio.write_json(config_to_dict(cfg), out / "config.json")

    train_panels, valid_panels = split_panels(panels, cfg.train_fraction, cfg.split_seed)
    gio.write_json(
        {"train": [p.panel_id for p in train_panels], "validation": [p.panel_id for p in valid_panels]},
        out / "split.json",
    )
    train_feats = [extract_panel(p, cfg.features) for p in train_panels]
    gio.write_features(train_feats, out / "features.csv")
    model = train(
        train_feats, cfg.candidate_features, exhaustive_cap=cfg.exhaustive_cap, top_k=cfg.top_k, seed=cfg.split_seed
    )
    gio.save_model(model, cfg.simulation.dilutions, cfg.features, out / "model.json")
    gio.write_search_report({"linear": model.stage1, "polynomial": model.stage2}, out / "search_report.csv")

    preds = [predict_panel(model, extract_panel(p, cfg.features), cfg.weights, cfg.call_threshold) for p in valid_panels]
    gio.write_predictions(preds, out / "predictions.csv", cfg.weights)
    rows = gio.read_predictions(out / "predictions.csv")
    evaluate_rows(rows, {p.panel_id: p.reference_mic for p in valid_panels}, cfg, out)
    print((out / "summary.txt").read_text(), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="growthmic",
        description="MIC estimation from growth-curve panels.",
        epilog=DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, epilog=DEFAULTS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", metavar="PATH", help="JSON pipeline configuration")
        p.add_argument("--out", metavar="DIR", required=True, help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "generate a synthetic dataset")
    p.add_argument("--seed", type=int, help="override simulation.seed and split.seed")
    p.add_argument("--n-panels", type=int, help="override simulation.n_panels")

    p = add("extract", cmd_extract, "compute well features from a dataset CSV")
    p.add_argument("--dataset", required=True, metavar="PATH")
    p.add_argument("--references", metavar="PATH", help="reference MIC CSV (adds growth labels)")

    p = add("train", cmd_train, "two-stage BIC selection and logistic fit")
    p.add_argument("--features", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, help="seed for stepwise restarts")

    p = add("predict", cmd_predict, "MIC posterior and calls for every panel")
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--dataset", required=True, metavar="PATH")

    p = add("evaluate", cmd_evaluate, "essential/categorical agreement and residuals")
    p.add_argument("--predictions", required=True, metavar="PATH")
    p.add_argument("--references", required=True, metavar="PATH")

    p = add("run", cmd_run, "simulate, split, train, predict and evaluate")
    p.add_argument("--seed", type=int, help="override simulation.seed and split.seed")
    p.add_argument("--n-panels", type=int, help="override simulation.n_panels")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"growthmic: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (gio.DataFormatError, gio.SchemaVersionError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"growthmic: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
