"""Command-line entry point: ``graft <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical/runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from graft import harness, kernels, modelfile
from graft.calibration import fit_cox_calibrator, fit_isotonic
from graft.data import generate_synthetic, inject_noise, load_csv, standardize, write_csv
from graft.errors import ConfigurationError, GraftError, NumericError
from graft.imputation import build_table, write_audit_csv
from graft.metrics import c_index, censoring_km, integrated_brier, make_eval_grid
from graft.trainer import TrainConfig, gate_summary, predict_scores, train

log = logging.getLogger("graft")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_value(v)
    return out


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None


def _train_config(args) -> TrainConfig:
    d = _read_config(args.config)
    d = dict(d.get("train", d))
    d.update(_overrides(args.set))
    for name in ("seed", "variant", "gate_variant"):
        if getattr(args, name, None) is not None:
            d[name] = getattr(args, name)
    return TrainConfig.from_dict(d)


def _experiment_config(args) -> harness.ExperimentConfig:
    d = _read_config(args.config)
    flags = {
        "data": args.data, "time_col": args.time_col, "event_col": args.event_col,
        "folds": args.folds, "seeds": args.seeds, "noise_multipliers": args.multipliers,
        "variants": args.variants, "gate_variants": args.gate_variants,
        "calibrations": args.calibrations, "out": args.out, "dataset_name": args.name,
    }
    d.update({k: v for k, v in flags.items() if v is not None})
    if args.set:
        d["train"] = {**d.get("train", {}), **_overrides(args.set)}
    return harness.ExperimentConfig.from_dict(d)


def cmd_synth(args) -> int:
    ds, beta = generate_synthetic(args.n, args.p, args.n_signal, args.censor_frac, args.seed)
    if args.noise_k:
        ds = inject_noise(ds, args.noise_k, args.noise_dist, args.seed + 1)
    write_csv(ds, args.out)
    print(f"wrote {ds.n} subjects x {ds.p} features to {args.out} "
          f"(censored {1 - ds.events.mean():.3f}); true beta = {np.round(beta, 4).tolist()}")
    return 0


def cmd_train(args) -> int:
    ds = load_csv(args.data, args.time_col, args.event_col)
    cfg = _train_config(args)
    model = train(ds, cfg)
    s = predict_scores(model, ds.features)
    bundle = modelfile.ModelBundle(
        model, ds.feature_names,
        cox=fit_cox_calibrator(s, ds.times, ds.events),
        isotonic=fit_isotonic(s, ds.times, ds.events),
        censoring=censoring_km(ds.times, ds.events),
    )
    modelfile.save(args.out, bundle)
    print(f"trained {cfg.variant}/{cfg.gate_kind}: {model.epochs_run} epochs, best epoch {model.best_epoch}, "
          f"validation loss {model.best_val_loss:.4f}; saved {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    bundle = modelfile.load(args.model)
    ds = load_csv(args.data, args.time_col, args.event_col)
    if ds.p != len(bundle.feature_names):
        raise ConfigurationError(f"model expects {len(bundle.feature_names)} features, data has {ds.p}")
    s = predict_scores(bundle.model, ds.features)
    cal = bundle.cox if args.calibration == "cox" else bundle.isotonic
    if cal is None:
        raise ConfigurationError(f"model file has no {args.calibration} calibrator")
    # the censoring curve stored at training time stands in for the training sample
    G = bundle.censoring if bundle.censoring is not None else censoring_km(ds.times, ds.events)
    grid = make_eval_grid(ds.times, G).times
    surv = cal.survival(s, grid)

    results = {
        "n": ds.n,
        "calibration": args.calibration,
        "c_index": c_index(s, ds.times, ds.events),
        "ibs": integrated_brier(surv, ds.times, ds.events, grid, G),
    }
    for k, v in results.items():
        print(f"{k}: {v:.6f}" if isinstance(v, float) else f"{k}: {v}")

    if args.out:
        Path(args.out).write_text(json.dumps(results, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if args.curves:
        with Path(args.curves).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["subject_id", "t", "S"])
            for i in range(ds.n):
                for t, v in zip(grid, surv[i]):
                    w.writerow([i, repr(float(t)), repr(float(v))])
    if args.dump_gates:
        with Path(args.dump_gates).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_name", "eta", "deterministic_gate"])
            for name, eta, g in gate_summary(bundle.model, bundle.feature_names):
                w.writerow([name, repr(eta), repr(g)])
    return 0


def cmd_impute_check(args) -> int:
    ds = load_csv(args.data, args.time_col, args.event_col)
    z, _ = standardize(ds)
    table = build_table(z, args.k_events)
    write_audit_csv(table, args.out)
    print(f"{int((ds.events == 0).sum())} censored subjects, {len(table.fallback)} degenerate "
          f"(fallback to log t_i); audit written to {args.out}")
    return 0


def _run_experiment(args, runner) -> int:
    cfg = _experiment_config(args)
    table = runner(cfg)
    print(table.render())
    if cfg.out:
        csv_path, json_path = table.write(cfg.out, cfg.to_dict())
        print(f"wrote {csv_path} and {json_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graft", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def data_flags(p, required=True):
        p.add_argument("--data", required=required, help="CSV with a header row")
        p.add_argument("--time-col", default=None if not required else "time")
        p.add_argument("--event-col", default=None if not required else "event")

    p = sub.add_parser("synth", help="write a synthetic linear-AFT dataset")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--n-signal", type=int, default=3)
    p.add_argument("--censor-frac", type=float, default=0.3)
    p.add_argument("--noise-k", type=int, default=0)
    p.add_argument("--noise-dist", default="gaussian", choices=["gaussian", "student_t_df2"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and save it as JSON")
    data_flags(p)
    p.add_argument("--config", help="JSON file of training options (or {'train': {...}})")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=["full", "no_stg", "linear_only"])
    p.add_argument("--gate-variant", choices=["stg", "sigmoid", "reinforce"])
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a training option")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="C-index and IBS of a saved model on a dataset")
    data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--calibration", choices=["cox", "isotonic"], default="cox")
    p.add_argument("--curves", help="write per-subject survival curves (subject_id, t, S)")
    p.add_argument("--dump-gates", help="write (feature_name, eta, deterministic_gate)")
    p.add_argument("--out", help="write metrics as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("impute-check", help="audit the local-KM imputation table")
    data_flags(p)
    p.add_argument("--k-events", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_impute_check)

    for name, runner, help_ in (
        ("benchmark", harness.run_benchmark, "cross-validated GRAFT benchmark"),
        ("ablation", harness.run_ablation, "variants x Gaussian noise multipliers"),
        ("noise-sweep", harness.run_noise_sweep, "gate mechanisms x Student-t noise multipliers"),
    ):
        p = sub.add_parser(name, help=help_)
        data_flags(p, required=False)
        p.add_argument("--config", help="JSON experiment config; flags override it")
        p.add_argument("--name", help="dataset label in the tables")
        p.add_argument("--folds", type=int)
        p.add_argument("--seeds", type=int, nargs="+")
        p.add_argument("--multipliers", type=int, nargs="+")
        p.add_argument("--variants", nargs="+", choices=["full", "no_stg", "linear_only"])
        p.add_argument("--gate-variants", nargs="+", choices=["stg", "sigmoid", "reinforce"])
        p.add_argument("--calibrations", nargs="+", choices=["cox", "isotonic"])
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a training option")
        p.add_argument("--out", help="output prefix: writes <out>.csv and <out>.json")
        p.set_defaults(func=lambda a, r=runner: _run_experiment(a, r))
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse: --help exits 0, bad usage exits 2
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (GraftError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
