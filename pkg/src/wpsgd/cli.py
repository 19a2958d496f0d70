"""``wpsgd`` command line: generate, train, check, fit-rate, evaluate."""

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time

from . import cluster, delay, theory
from .config import load_config
from .data import generate_analog, read_model, read_sparse_text, write_model, write_sparse_text
from .errors import ConfigError, DegenerateConditionError, WPSGDError
from .objective import error_rate, objective_value
from .trainer import train

CSV_HEADER = ("algorithm", "fastest_iteration", "objective_train", "objective_test",
              "error_rate_test", "wall_seconds", "seed")


def _load_data(cfg):
    if cfg.has_gen:
        return generate_analog(cfg.gen_spec())
    dim = cfg.get("data.dim")
    tr = read_sparse_text(cfg["data.train"], dim) if cfg.get("data.train") else None
    if dim is None and tr is not None:
        dim = tr.dim
    te = read_sparse_text(cfg["data.test"], dim) if cfg.get("data.test") else None
    if tr is not None and te is not None and te.dim > tr.dim:
        tr = read_sparse_text(cfg["data.train"], te.dim)
    return tr, te


def run_experiment(cfg, threads=1):
    """Train the configured algorithm; returns ``(rows, final_model, rejections)``."""
    train_d, test_d = _load_data(cfg)
    tc = cfg.train_config()
    algo = cfg.algorithm
    rate = cfg.get("train.rate")
    start = time.perf_counter()
    rejections = []
    if algo == "sequential":
        final, cps = train(train_d, tc)
        checkpoints = [(c.iteration, c.model) for c in cps]
    else:
        spec = cfg.cluster()
        if algo == "simuparallel":
            res = cluster.run_simuparallel(train_d, spec, tc, threads)
        elif algo == "wpsgd":
            res = cluster.run_wpsgd(train_d, spec, tc, rate, threads)
        elif algo == "direct-avg":
            res = cluster.run_direct_average_unbalanced(train_d, spec, tc, threads)
        elif algo == "periodic-avg":
            res = cluster.run_periodic_averaging(train_d, spec, tc, cfg["train.span"], rate, threads)
        else:
            res = delay.run_delay_wpsgd(train_d, spec, tc, cfg.delay_config(), rate, threads)
            rejections = res.rejections
        final, checkpoints = res.final_model, list(res.checkpoints)
    wall = time.perf_counter() - start
    t = tc.total_iterations
    if not checkpoints or checkpoints[-1][0] != t:
        checkpoints.append((t, final))
    loss = tc.loss
    rows = []
    for n, model in checkpoints:
        rows.append({
            "algorithm": algo,
            "fastest_iteration": n,
            "objective_train": objective_value(model, train_d, loss),
            "objective_test": objective_value(model, test_d, loss),
            "error_rate_test": error_rate(model, test_d),
            # checkpoints are produced inside one run; time is apportioned by progress
            "wall_seconds": wall * n / t,
            "seed": tc.seed,
        })
    return rows, final, rejections


def write_metrics(rows, fh):
    w = csv.DictWriter(fh, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_metrics(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise WPSGDError(f"{path}: unexpected CSV header {reader.fieldnames}")
        return list(reader)


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.values["train.seed"] = args.seed
        cfg.values["gen.seed"] = args.seed
    return cfg


def cmd_generate(args):
    cfg = _apply_overrides(load_config(args.config, "generate"), args)
    tr, te = generate_analog(cfg.gen_spec())
    write_sparse_text(tr, cfg["data.train"])
    write_sparse_text(te, cfg["data.test"])
    print(f"wrote {len(tr)} training and {len(te)} test samples (dim {tr.dim})", file=sys.stderr)
    return 0


def cmd_train(args):
    cfg = _apply_overrides(load_config(args.config, "train"), args)
    rows, final, rejections = run_experiment(cfg, args.threads)
    out = cfg.get("experiment.output")
    if out is None:
        write_metrics(rows, sys.stdout)
        return 0
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "metrics.csv"), "w", newline="", encoding="utf-8") as fh:
        write_metrics(rows, fh)
    write_model(final, os.path.join(out, "model.txt"))
    if cfg.algorithm == "delay-wpsgd":
        with open(os.path.join(out, "rejections.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["server", "iteration", "sample_id", "gate", "predicate"])
            for r in rejections:
                w.writerow(dataclasses.astuple(r))
    print(f"wrote metrics and model to {out}", file=sys.stderr)
    return 0


def _finite(x):
    return x if math.isfinite(x) else str(x)


def check_report(cfg, beta_sq_max=None):
    """Evaluate every tolerance predicate and bound the config allows."""
    loss = cfg.loss()
    profile = cfg.delay_profile()
    t = cfg["train.iterations"]
    rate = cfg.get("train.rate")
    report = {}

    c3 = theory.corollary_report(profile, loss.contraction)
    report["corollary3"] = {"holds": c3.holds, "lhs": c3.lhs, "rhs": c3.rhs}
    if rate is not None:
        c4 = theory.corollary_report(profile, rate)
        report["corollary4"] = {"holds": c4.holds, "lhs": c4.lhs, "rhs": c4.rhs}
    else:
        report["corollary4"] = {"status": "not evaluated", "reason": "train.rate not set"}

    grad_lip = cfg.get("theory.grad_lip")
    if grad_lip is None:
        b = beta_sq_max if beta_sq_max is not None else cfg.get("theory.beta_sq_max", 1.0)
        grad_lip = loss.lam + b * cfg["delay.c_star"]
    tp = theory.TheoryParams(
        G=cfg["theory.G"], lam=loss.lam, eta=loss.eta, delays=profile, t=t, rate=rate,
        span=cfg.get("train.span"), grad_lip=grad_lip, residual=cfg["theory.residual"],
        wasserstein_1=cfg.get("theory.wasserstein_1"), wasserstein_2=cfg.get("theory.wasserstein_2"),
        sigma_star=cfg.get("theory.sigma_star"),
    )
    if tp.wasserstein_1 is None or tp.wasserstein_2 is None or tp.sigma_star is None:
        report["corollary2"] = {"status": "not evaluated", "reason": "distribution distance estimates missing"}
    else:
        try:
            c2 = theory.corollary2_report(tp)
            report["corollary2"] = {"holds": c2.holds, "lhs": c2.lhs, "rhs": c2.rhs}
        except DegenerateConditionError as exc:
            report["corollary2"] = {"status": "not evaluated", "reason": str(exc)}

    report["theorem4_bound"] = _finite(theory.theorem4_bound(tp))
    if rate is not None:
        report["theorem5_bound"] = _finite(theory.theorem5_bound(tp))
    if tp.span is not None and t % tp.span == 0:
        db = theory.deduction_bounds(tp)
        report["deduction"] = {
            "periodic_simuparallel_bound": _finite(db.periodic_simuparallel),
            "periodic_weighted_bound": _finite(db.periodic_weighted),
            "valid": db.valid,
            "validity_factor": db.validity_factor,
        }

    b = beta_sq_max if beta_sq_max is not None else cfg.get("theory.beta_sq_max")
    if b is None:
        report["delay_step_size"] = {"status": "not evaluated", "reason": "beta_sq_max unknown"}
    else:
        dcfg = cfg.delay_config()
        lhs, rhs = delay.step_size_sides(loss, b, dcfg)
        report["delay_step_size"] = {"holds": lhs <= rhs, "lhs": lhs, "rhs": rhs,
                                     "delay_wpsgd_eligible": lhs <= rhs}
    return report


def format_report(report):
    lines = []
    for name, val in report.items():
        if isinstance(val, dict):
            if "status" in val:
                lines.append(f"{name}: {val['status']} ({val['reason']})")
            elif "holds" in val:
                lines.append(f"{name}: {'true' if val['holds'] else 'false'} "
                             f"(lhs {val['lhs']:.10g}, rhs {val['rhs']:.10g})")
            else:
                inner = ", ".join(f"{k} {v}" for k, v in val.items())
                lines.append(f"{name}: {inner}")
        else:
            lines.append(f"{name}: {val}")
    return "\n".join(lines)


def cmd_check(args):
    cfg = load_config(args.config, "check")
    beta = None
    if cfg.get("theory.beta_sq_max") is None and (cfg.has_gen or cfg.get("data.train")):
        tr, _ = _load_data(cfg)
        beta = tr.beta_sq_max()
    report = check_report(cfg, beta)
    if args.format == "json":
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        print(format_report(report))
    return 0


def cmd_fit_rate(args):
    rows = read_metrics(args.csv)
    if args.algorithm:
        rows = [r for r in rows if r["algorithm"] == args.algorithm]
    if len(rows) < 3:
        raise WPSGDError(f"need at least 3 checkpoints to fit a rate, found {len(rows)}")
    curve = [(float(r["fastest_iteration"]), float(r[args.column])) for r in rows]
    fit = theory.fit_rate(curve, args.floor)
    print(f"rate {fit.rate!r}")
    print(f"residual {fit.residual!r}")
    return 0


def cmd_evaluate(args):
    cfg = load_config(args.config, "evaluate")
    model = read_model(args.model)
    if args.data:
        d = read_sparse_text(args.data, model.dim)
    else:
        _, d = _load_data(cfg)
    print(f"objective {objective_value(model, d, cfg.loss())!r}")
    print(f"error_rate {error_rate(model, d)!r}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="wpsgd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", required=True, metavar="PATH")
        if seed:
            sp.add_argument("--seed", type=int, metavar="N", help="override train.seed and gen.seed")
        sp.add_argument("--threads", type=int, default=1, metavar="N", help="node loop threads (speed only)")

    sp = sub.add_parser("generate", help="write analog train/test files")
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("train", help="run an experiment and write metrics")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("check", help="report tolerance conditions and bounds")
    common(sp, seed=False)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("fit-rate", help="fit a contracting rate to a metrics CSV")
    sp.add_argument("csv")
    sp.add_argument("--floor", type=float, default=0.0)
    sp.add_argument("--column", default="objective_train", choices=("objective_train", "objective_test"))
    sp.add_argument("--algorithm", default=None)
    sp.set_defaults(func=cmd_fit_rate)

    sp = sub.add_parser("evaluate", help="objective and error rate of a saved model")
    common(sp, seed=False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", default=None, help="sparse text file (defaults to data.test)")
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for prob in exc.problems:
            print(f"  - {prob}", file=sys.stderr)
        return 2
    except (WPSGDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
