"""Command-line interface.

Subcommands: synth, train, dpsgd, eval, bound, approx, pipeline.  All file
formats are CSV (data, result tables) or JSON (schemas, configs, models,
reports).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import bounds as bounds_mod
from .dataset import Schema, load_csv, load_raw_csv, preprocess, rules_from_dict, write_csv
from .evaluate import accuracy, empirical_risk, roc_auc_model
from .experiment import ExperimentConfig, run_experiment
from .learn import (DpSgdConfig, LossSpec, TrainConfig, dp_sgd, load_model,
                    save_model, train_projected)
from .marginals import compute_marginal, enumerate_queries, save_marginals
from .polyapprox import (Interval, approx_report, bernstein, iterated_bernstein,
                         logistic_loss, remez_minimax)
from .privacy import PrivacyParams
from .synth import generate_synthetic


def _write_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _loss_from_args(args) -> LossSpec:
    if args.loss == "logistic":
        return LossSpec.logistic()
    if args.loss == "gamma_margin":
        return LossSpec.gamma_margin(args.gamma)
    raise SystemExit(f"unsupported loss {args.loss!r}")


def _cmd_prep(args) -> int:
    raw = load_raw_csv(args.raw)
    with open(args.rules) as fh:
        doc = json.load(fh)
    rules = rules_from_dict(doc.get("preprocess", doc))
    ds = preprocess(raw, rules)
    write_csv(ds, args.out)
    if args.schema_out:
        ds.schema.to_file(args.schema_out)
    print(f"coded {ds.n} rows ({len(raw.cells) - ds.n} dropped) into {args.out}")
    return 0


def _cmd_synth(args) -> int:
    schema = Schema.from_file(args.schema)
    ds = load_csv(args.data, schema)
    privacy = None
    if args.sigma_override is None:
        privacy = PrivacyParams(args.epsilon, args.delta, lam=args.lam,
                                allow_large_epsilon=args.allow_large_epsilon)
    ds_syn, report = generate_synthetic(
        ds, args.order, privacy, mode=args.mode, seed=args.seed,
        sensitivity_mode=args.sensitivity_mode, sigma_override=args.sigma_override)
    write_csv(ds_syn, args.out)
    if args.report:
        _write_json(report.to_dict(), args.report)
    if args.marginals_out:
        queries = enumerate_queries(schema.num_features, args.order)
        margs = [compute_marginal(ds_syn, q) for q in queries]
        save_marginals(margs, schema, args.marginals_out + ".csv", args.marginals_out + ".json")
    print(f"wrote {ds_syn.n} synthetic rows to {args.out} (sigma={report.sigma:.6g})")
    return 0


def _cmd_train(args) -> int:
    schema = Schema.from_file(args.schema)
    ds = load_csv(args.data, schema)
    loss = _loss_from_args(args)
    tau = math.inf if args.tau == "inf" else float(args.tau)
    cfg = TrainConfig(max_iters=args.max_iters, step_size=args.step_size,
                      step_decay=args.step_decay, tolerance=args.tolerance, seed=args.seed)
    model = train_projected(ds, loss, tau, cfg)
    save_model(model, schema, args.out)
    print(f"trained on {ds.n} rows; ||w||={np.linalg.norm(model.w):.6g}, "
          f"risk={empirical_risk(model, ds):.6g}")
    return 0


def _cmd_dpsgd(args) -> int:
    schema = Schema.from_file(args.schema)
    ds = load_csv(args.data, schema)
    loss = _loss_from_args(args)
    cfg = DpSgdConfig(iterations=args.iterations, batch_size=args.batch_size,
                      learning_rate=args.learning_rate,
                      clip_norm=math.inf if args.clip_norm == "inf" else float(args.clip_norm),
                      lipschitz_L=args.lipschitz, epsilon=args.epsilon, delta=args.delta)
    model = dp_sgd(ds, loss, cfg, np.random.default_rng(args.seed))
    save_model(model, schema, args.out)
    print(f"noisy-gradient training done; risk={empirical_risk(model, ds):.6g}")
    return 0


def _cmd_eval(args) -> int:
    schema = Schema.from_file(args.schema)
    ds = load_csv(args.data, schema)
    model, schema_hash = load_model(args.model)
    if schema_hash != schema.digest():
        print("warning: model schema hash does not match the evaluation schema", file=sys.stderr)
    doc = {
        "accuracy": accuracy(model, ds),
        "roc_auc": roc_auc_model(model, ds),
        "empirical_risk": empirical_risk(model, ds),
    }
    if args.baseline_model:
        baseline, _ = load_model(args.baseline_model)
        doc["excess_empirical_risk"] = doc["empirical_risk"] - empirical_risk(baseline, ds)
    if args.out:
        _write_json(doc, args.out)
    print(json.dumps(doc, indent=2))
    return 0


def _cmd_bound(args) -> int:
    with open(args.params) as fh:
        params = json.load(fh)
    family = params.pop("family", "lipschitz")
    mode = params.pop("mode", "explicit")
    if family == "schedule":
        schedule = bounds_mod.hard_instance_schedule(int(params["m"]))
        doc = {k: getattr(schedule, k) for k in schedule.__dataclass_fields__}
    else:
        inputs = bounds_mod.BoundInputs(**params)
        if family == "lipschitz":
            report = bounds_mod.lipschitz_excess_risk_bound(inputs, mode)
        elif family == "logistic":
            report = bounds_mod.logistic_excess_risk_bound(inputs, mode)
        elif family in ("private-lipschitz", "private-logistic"):
            report = bounds_mod.private_excess_risk_bound(inputs, family.split("-")[1], mode)
        else:
            raise SystemExit(f"unknown bound family {family!r}")
        doc = {"approx_term": report.approx_term, "marginal_term": report.marginal_term,
               "total": report.total, "constants_mode": report.constants_mode,
               "terms": report.terms, "notes": list(report.notes)}
    if args.out:
        _write_json(doc, args.out)
    print(json.dumps(doc, indent=2))
    return 0


_APPROX_FUNCTIONS = {
    "logistic-loss": logistic_loss,
    "abs": np.abs,
    "exp": np.exp,
}


def _cmd_approx(args) -> int:
    f = _APPROX_FUNCTIONS.get(args.function)
    if f is None:
        raise SystemExit(f"unknown function {args.function!r}; choices: {sorted(_APPROX_FUNCTIONS)}")
    iv = Interval(args.a, args.b)
    rows = []
    polys = [("bernstein", bernstein(f, args.degree, iv))]
    for k in args.iters:
        polys.append((f"iterated:{k}", iterated_bernstein(f, args.degree, k, iv)))
    polys.append(("minimax", remez_minimax(f, args.degree, iv)))
    for method, poly in polys:
        rep = approx_report(poly, f)
        rows.append([method, args.degree, iv.a, iv.b, rep.max_abs_error, rep.coeff_abs_sum,
                     *[repr(c) for c in poly.coeffs]])
    header = ["method", "degree", "a", "b", "max_abs_error", "coeff_abs_sum",
              *[f"c{k}" for k in range(args.degree + 1)]]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_pipeline(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.out_dir:
        cfg = ExperimentConfig.from_dict({**json.load(open(args.config)), "out_dir": args.out_dir})
    result = run_experiment(cfg)
    print(f"wrote {result.runs_path} and {result.aggregates_path}; "
          f"{sum(r['status'] == 'ok' for r in result.runs)}/{len(result.runs)} cells completed")
    return 0 if result.all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="margsyn",
                                     description="Marginal-preserving DP synthetic data toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="clean and integer-code a raw CSV")
    p.add_argument("--raw", required=True)
    p.add_argument("--rules", required=True,
                   help="JSON with a `preprocess` section (or a bare {column: rule} map)")
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out", default=None, help="write the derived schema here")
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("synth", help="generate a DP synthetic dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--lambda", dest="lam", type=float, default=3.0)
    p.add_argument("--order", "-d", type=int, default=2, help="max marginal order d")
    p.add_argument("--mode", choices=["brute", "fitted"], default="fitted")
    p.add_argument("--sensitivity-mode", choices=["exact", "paper"], default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-large-epsilon", action="store_true")
    p.add_argument("--sigma-override", type=float, default=None,
                   help="bypass calibration with an explicit noise scale (testing)")
    p.add_argument("--report", default=None, help="write the provenance report JSON here")
    p.add_argument("--marginals-out", default=None,
                   help="prefix for dumping the synthetic marginals (.csv/.json)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="norm-constrained training")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", choices=["logistic", "gamma_margin"], default="logistic")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--tau", default="inf", help="norm budget; 'inf' for unconstrained")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--step-size", type=float, default=1.0)
    p.add_argument("--step-decay", type=float, default=0.5)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("dpsgd", help="noisy-gradient baseline training")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss", choices=["logistic", "gamma_margin"], default="logistic")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--iterations", "-T", type=int, default=300)
    p.add_argument("--batch-size", "-B", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=1.0)
    p.add_argument("--clip-norm", default="1.0")
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_dpsgd)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--baseline-model", default=None,
                   help="also report the risk gap against this model")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bound", help="evaluate an excess-risk bound from a parameter file")
    p.add_argument("--params", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("approx", help="polynomial approximation table (CSV)")
    p.add_argument("--function", default="logistic-loss")
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--a", type=float, default=-5.0)
    p.add_argument("--b", type=float, default=5.0)
    p.add_argument("--iters", type=lambda s: [int(v) for v in s.split(",")], default=[1, 4, 9])
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_approx)

    p = sub.add_parser("pipeline", help="run a privacy-budget sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
