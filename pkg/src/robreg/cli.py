"""Command-line entry point: ``robreg <subcommand> [flags]``.

Exit codes: 0 on success, 1 when a check fails or output cannot be
written, 2 on usage errors.  ``ROBREG_SEED`` overrides ``--seed``.  A
``--config`` file of ``key=value`` lines supplies defaults for flags; flags
given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import certificate, lowdeg, reduction, sq
from .core import LinearModelSpec, SpikedCovariance, random_unit_vector, stream
from .experiments import bench, moment_grid, parallel_map, quadrature_moments, regression_model, regression_trial
from .regression import RegressorConfig, fit_robust
from .sampling import ContaminationSpec, contaminate, sample_clean


class CheckFailed(Exception):
    pass


# --- output --------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _json_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)) and math.isfinite(v):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return json.dumps(format_value(v))
    return json.dumps(v)


def render_records(rows: Sequence[dict], fmt: str = "csv", columns: Optional[List[str]] = None) -> str:
    """CSV with a header, or one JSON object per line.  Floats keep 17 digits."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    for r in rows:
        if list(r.keys()) != columns:
            raise ValueError("rows are not homogeneous")
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r[c]) for c in columns])
    elif fmt == "jsonl":
        for r in rows:
            buf.write("{" + ", ".join(f"{json.dumps(c)}: {_json_value(r[c])}" for c in columns) + "}\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue()


def emit_records(rows: Sequence[dict], fmt: str = "csv", path: Optional[str] = None,
                 columns: Optional[List[str]] = None) -> None:
    text = render_records(rows, fmt, columns)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# --- parsing -------------------------------------------------------------

def _floats(s: str) -> List[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def read_config(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--config", default=None, help="key=value defaults file")

    p = argparse.ArgumentParser(prog="robreg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def model_flags(sp, d=20, n=5000):
        sp.add_argument("--d", type=int, default=d)
        sp.add_argument("--n", type=int, default=n)
        sp.add_argument("--kappa", type=float, default=1.0)
        sp.add_argument("--eps", type=float, default=0.05)
        sp.add_argument("--sigma", type=float, default=1.0)

    g = sub.add_parser("generate", parents=[common], help="emit a contaminated dataset")
    model_flags(g, n=1000)
    g.add_argument("--adversary", default="targeted_labels",
                   choices=("none", "huber_mixture", "targeted_labels"))

    r = sub.add_parser("regress", parents=[common], help="fit estimators and report errors")
    model_flags(r)
    r.add_argument("--adversary", default="targeted_labels",
                   choices=("none", "huber_mixture", "targeted_labels"))
    r.add_argument("--estimators", default="zero,ols,robust")
    r.add_argument("--trials", type=int, default=5)
    r.add_argument("--stop-mult", type=float, default=RegressorConfig(0.1).stop_mult)

    c = sub.add_parser("certify", parents=[common], help="truncated fourth-moment certificate")
    c.add_argument("--d", type=int, default=30)
    c.add_argument("--n", type=int, default=None, help="default ceil(d log d / eps^4), capped at 1e6")
    c.add_argument("--eps", type=float, default=0.1)
    c.add_argument("--kappa", type=float, default=1.0)
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--c-est", type=float, default=certificate.C_EST)

    s = sub.add_parser("sq-instance", parents=[common], help="build and verify moment-matched mixtures")
    s.add_argument("--mu-s", default=None, help="comma list of signal means (default: a grid)")
    s.add_argument("--sigma-s2", type=float, default=0.05)
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--kappa", type=float, default=None, help="also report the label-marginal normalizer")
    s.add_argument("--c1", type=float, default=0.01)

    a = sub.add_parser("lowdeg-advantage", parents=[common], help="evaluate the low-degree advantage bound")
    a.add_argument("--n", type=float, default=None)
    a.add_argument("--d", type=float, default=None)
    a.add_argument("--eps", type=float, default=None)
    a.add_argument("--kappa", type=float, default=None)
    a.add_argument("--D", type=int, default=None)

    t = sub.add_parser("reduction-test", parents=[common], help="estimation-to-testing reduction")
    t.add_argument("--d", type=int, default=100)
    t.add_argument("--kappa", type=float, default=9.0)
    t.add_argument("--eps", type=float, default=0.1)
    t.add_argument("--alpha", type=float, default=1.0)
    t.add_argument("--n", type=int, default=5000)
    t.add_argument("--trials", type=int, default=20)
    t.add_argument("--mode", choices=("oracle", "robust"), default="oracle")
    t.add_argument("--c-large", type=float, default=reduction.LARGE_KAPPA_C)

    b = sub.add_parser("bench", parents=[common], help="error against (eps, kappa) sweep")
    b.add_argument("--eps", default="0.02,0.05,0.1")
    b.add_argument("--kappa", default="1,2,4,8")
    b.add_argument("--d", type=int, default=50)
    b.add_argument("--n", type=int, default=20000)
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--max-epskappa", type=float, default=0.8)

    sub.add_parser("verify-all", parents=[common], help="run the oracle verification suite")
    return p


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            conf = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        subp = parser._subparsers._group_actions[0].choices[args.cmd]
        known = {a.dest for a in subp._actions}
        unknown = set(conf) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        subp.set_defaults(**conf)
        args = parser.parse_args(argv)
    env = os.environ.get("ROBREG_SEED")
    if env is not None:
        try:
            args.seed = int(env)
        except ValueError:
            parser.error("ROBREG_SEED must be an integer")
    if args.cmd == "lowdeg-advantage":
        missing = [f"--{k}" for k in ("n", "d", "eps", "kappa", "D") if getattr(args, k) is None]
        if missing:
            parser.error(f"missing required flags: {' '.join(missing)}")
    if getattr(args, "trials", 1) < 1:
        parser.error("--trials must be >= 1")
    args._parser = parser
    return args


# --- subcommands ----------------------------------------------------------

def _model(args, rng):
    return regression_model(args.d, args.kappa, rng, args.sigma)


def cmd_generate(args) -> List[dict]:
    rng = stream(args.seed, "generate", 0)
    model = _model(args, rng)
    data = contaminate(sample_clean(model, args.n, rng),
                       ContaminationSpec(args.eps, args.adversary, {"sigma": args.sigma}), rng)
    cols = [f"x{j}" for j in range(args.d)] + ["y"]
    return [dict(zip(cols, row)) for row in data.rows.tolist()]


def cmd_regress(args) -> List[dict]:
    names = [s for s in args.estimators.split(",") if s]
    cfg = RegressorConfig(args.eps, stop_mult=args.stop_mult)
    res = parallel_map(lambda t: regression_trial(args.d, args.n, args.kappa, args.eps, t, args.seed,
                                                  args.adversary, names, args.sigma, cfg),
                       list(range(args.trials)), args.threads)
    return [{"trial": t, "estimator": nm, "eps": args.eps, "kappa": args.kappa, "n": args.n,
             "error": r[nm]} for t, r in enumerate(res) for nm in names]


def cmd_certify(args) -> List[dict]:
    rng = stream(args.seed, "certify", 0)
    spike = SpikedCovariance(random_unit_vector(args.d, rng), args.kappa)
    model = LinearModelSpec.from_spike(spike, np.zeros(args.d), 1.0)
    n = args.n or certificate.certificate_sample_size(args.d, args.eps)
    data = sample_clean(model, n, rng)
    reps = certificate.certify(data, model, args.eps, args.trials, rng, args.c_est)
    return [{"trial": i, "n": r.n, "frac_big_norm": r.frac_big_norm, "frac_big_proj": r.frac_big_proj,
             "g_u_size": r.g_u_size, "spectral_value": r.spectral_value,
             "bound_value": r.bound_value, "pass": r.passed} for i, r in enumerate(reps)]


def cmd_sq_instance(args) -> List[dict]:
    if args.mu_s:
        mus = _floats(args.mu_s)
    else:
        mus = [0.0, 0.05, 0.2, 0.4, 0.6, 0.64, 0.7, 1.0, 2.0]
    rows = []
    C = sq.marginal_normalizer(args.eps, args.c1, args.kappa) if args.kappa else float("nan")
    for mu in mus:
        m = sq.build_mixture(mu, args.sigma_s2, args.eps)
        am = m.moments(3)
        qm = quadrature_moments(m)
        ok = bool(np.abs(am - [0, 1, 0]).max() <= 1e-9 and np.abs(qm - [0, 1, 0]).max() <= 1e-7)
        rows.append({"mu_s": mu, "sigma_s2": args.sigma_s2, "regime": m.regime, "eps_mu": m.eps_mu,
                     "n_components": len(m.components),
                     "weights": ";".join(format_value(w) for w in m.weights),
                     "means": ";".join(format_value(x) for x in m.means),
                     "variances": ";".join(format_value(x) for x in m.variances),
                     "m1": qm[0], "m2": qm[1], "m3": qm[2], "chi2": sq.chi2_mixture(m),
                     "normalizer": C, "pass": ok})
    if not all(r["pass"] for r in rows):
        raise CheckFailed(rows)
    return rows


def cmd_lowdeg_advantage(args) -> List[dict]:
    terms = lowdeg.advantage_terms(args.n, args.d, args.eps, args.kappa, args.D)
    rows = [{"p": p, "log_term": lt, "term": math.exp(lt) if lt < 709 else math.inf}
            for p, lt in terms.items()]
    la = lowdeg.log_advantage_bound(args.n, args.d, args.eps, args.kappa, args.D)
    rows.append({"p": "total", "log_term": la, "term": lowdeg.advantage_bound(
        args.n, args.d, args.eps, args.kappa, args.D)})
    return rows


def cmd_reduction_test(args) -> List[dict]:
    v = random_unit_vector(args.d, stream(args.seed, "reduction-v", 0))
    inst = reduction.reduction_instance(args.d, args.kappa, args.eps, args.alpha, v)
    if args.mode == "oracle":
        est = "oracle"
    else:
        est = lambda h: fit_robust(h, RegressorConfig(args.eps))  # noqa: E731

    def one(job):
        which, t = job
        return reduction.run_reduction(inst, args.n, est, which, stream(args.seed, f"reduction-{which}", t),
                                       args.c_large)

    jobs = [(w, t) for w in ("null", "alt") for t in range(args.trials)]
    res = parallel_map(one, jobs, args.threads)
    return [{"hypothesis": w, "trial": t, "regime": r.regime, "statistic": r.statistic,
             "threshold": r.threshold, "decide_alternative": r.decide_alternative,
             "correct": r.decide_alternative == (w == "alt")} for (w, t), r in zip(jobs, res)]


def cmd_bench(args) -> List[dict]:
    return bench(_floats(args.eps), _floats(args.kappa), args.d, args.n, args.trials,
                 args.seed, args.threads, args.max_epskappa)


def cmd_verify_all(args) -> List[dict]:
    from .verify import run_suite
    rows = run_suite(args.seed, args.threads)
    if not all(r["passed"] for r in rows):
        raise CheckFailed(rows)
    return rows


COMMANDS = {
    "generate": cmd_generate, "regress": cmd_regress, "certify": cmd_certify,
    "sq-instance": cmd_sq_instance, "lowdeg-advantage": cmd_lowdeg_advantage,
    "reduction-test": cmd_reduction_test, "bench": cmd_bench, "verify-all": cmd_verify_all,
}


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        rows = COMMANDS[args.cmd](args)
        code = 0
    except CheckFailed as exc:
        rows, code = exc.args[0], 1
    except ValueError as exc:
        # invalid parameter combinations surface as usage errors
        args._parser.print_usage(sys.stderr)
        print(f"robreg: error: {exc}", file=sys.stderr)
        return 2
    try:
        emit_records(rows, args.format, args.out)
    except OSError as exc:
        print(f"robreg: cannot write output: {exc}", file=sys.stderr)
        return 1
    return code


def main() -> None:
    sys.exit(run_cli())
