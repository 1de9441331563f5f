"""Command-line interface.

Subcommands: simulate, optimize, sweep-fig3, ratio-fig4, verify.

Configuration is a JSON document given with ``--config PATH`` (``-`` reads
stdin), optionally amended with ``--set key=value`` (value parsed as JSON,
falling back to a plain string).

Exit codes: 0 success, 1 verification failure, 2 configuration or input
error, 3 degenerate geometry or model, 4 numerical failure.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import InvalidInputError, QsoptError
from .grover import (
    average_success,
    lambda_of_j,
    simulated_average_success,
    standard_count,
    std_lambda,
    success_probability_analytic,
    success_probability_exact,
)
from .optimizer import optimize
from .states import normalize, prior_from_weights, uniform_state
from .twovalue import TwoValueSpec, exact_ratio_scan, optimize_two_value, s_factor
from .vecio import read_vector, write_vector
from . import verify as vf

log = logging.getLogger("qsopt")

SCHEMA_VERSION = "qsopt.result/1"
GENERAL_PATH_MAX_N = 2000
SIMULATE_ALL_TARGETS_MAX_N = 1024
FIG3_K = [1, 10, 100, 1000, 5000]
FIG4_K = [1, 10, 100, 1000, 5000]
FIG4_GRID = [float(-x) for x in np.geomspace(1e-5, 0.3, 30)]
VERIFY_CHECKS = ("gradients", "std_identities", "curvature", "minv", "ascent")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


class ConfigError(InvalidInputError):
    def __init__(self, field, message):
        super().__init__(message)
        self.field = field
        self.message = message


# configuration ----------------------------------------------------------------


def _field_line(text, field):
    if not text or not field:
        return None
    key = field.split(".")[-1]
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def load_config(path, overrides):
    text = ""
    if path is not None:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    try:
        cfg = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(None, f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(None, "line 1: top-level JSON value must be an object")
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(None, f"--set expects key=value, got {item!r}")
        try:
            cfg[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg[key] = raw
    return cfg, text


def _int(cfg, key, default=None, minimum=None):
    val = cfg.get(key, default)
    if val is None:
        raise ConfigError(key, f"field '{key}': required")
    if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
        raise ConfigError(key, f"field '{key}': expected an integer, got {val!r}")
    val = int(val)
    if minimum is not None and val < minimum:
        raise ConfigError(key, f"field '{key}': must be >= {minimum}, got {val}")
    return val


def _float(cfg, key, default=None):
    val = cfg.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(key, f"field '{key}': expected a finite number, got {val!r}")
    return float(val)


def _float_list(cfg, key, default):
    val = cfg.get(key, default)
    if not isinstance(val, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
        raise ConfigError(key, f"field '{key}': expected a list of numbers")
    return [float(v) for v in val]


def _int_list(cfg, key, default):
    val = cfg.get(key, default)
    if not isinstance(val, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in val):
        raise ConfigError(key, f"field '{key}': expected a list of integers")
    return list(val)


def resolve_prior(cfg):
    """Return ``(probs, spec)``; ``spec`` is a TwoValueSpec or None."""
    n = _int(cfg, "n", minimum=2)
    prior = cfg.get("prior", "uniform")
    try:
        if prior == "uniform":
            return np.full(n, 1.0 / n), TwoValueSpec(n, 1, 1.0 / n)
        if isinstance(prior, list):
            if len(prior) != n:
                raise ConfigError("prior", f"field 'prior': {len(prior)} weights for n={n}")
            return prior_from_weights(prior).probs, None
        if isinstance(prior, dict) and set(prior) == {"k", "p"}:
            spec = TwoValueSpec(n, prior["k"], prior["p"])
            return spec.probs(), spec
    except ConfigError:
        raise
    except QsoptError as exc:
        raise ConfigError("prior", f"field 'prior': {exc}") from None
    raise ConfigError("prior", "field 'prior': expected \"uniform\", a weight list, or {\"k\": K, \"p\": p}")


# output -----------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        obj = float(obj)
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def render_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def render_json(command, cfg, result, **extra):
    doc = {"schema_version": SCHEMA_VERSION, "qsopt_version": __version__, "command": command, "config": cfg}
    doc.update(extra)
    doc["result"] = result
    return json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n"


def emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# commands ---------------------------------------------------------------------


def cmd_simulate(cfg, args):
    probs, _ = resolve_prior(cfg)
    n = probs.size
    psi = _load_state(cfg, "state_file", n)
    phi = _load_state(cfg, "axis_file", n)
    j = _int(cfg, "j", standard_count(n), minimum=0)
    targets = cfg.get("targets", "all" if n <= SIMULATE_ALL_TARGETS_MAX_N else [])
    if targets == "all":
        targets = list(range(n))
    if not isinstance(targets, list) or not all(isinstance(t, int) and 0 <= t < n for t in targets):
        raise ConfigError("targets", f"field 'targets': expected \"all\" or a list of indices below {n}")
    exact = [success_probability_exact(psi, phi, t, j) for t in targets]
    analytic = [success_probability_analytic(psi, phi, t, j) for t in targets]
    lam = lambda_of_j(n, j)
    result = {
        "j": j,
        "lambda": lam,
        "average_success": average_success(psi, phi, probs, lam, n),
        "targets": targets,
        "success_probability_exact": exact,
        "success_probability_analytic": analytic,
    }
    if args.format == "csv":
        return render_csv(["t", "exact", "analytic"], zip(targets, exact, analytic))
    return render_json("simulate", cfg, result)


def _load_state(cfg, key, n):
    path = cfg.get(key)
    if path is None:
        return np.asarray(uniform_state(n))
    try:
        vec = read_vector(path)
    except OSError as exc:
        raise ConfigError(key, f"field '{key}': {exc}") from None
    if vec.size != n:
        raise ConfigError(key, f"field '{key}': vector has {vec.size} entries, expected {n}")
    if abs(np.linalg.norm(vec) - 1) > 1e-9:
        log.info("%s is not unit norm; normalizing", path)
    return normalize(vec)


def _choose_route(cfg, spec, n):
    route = cfg.get("route", "auto")
    if route not in ("auto", "general", "closed_form"):
        raise ConfigError("route", "field 'route': expected auto, general or closed_form")
    if route == "auto":
        route = "closed_form" if spec is not None and n > GENERAL_PATH_MAX_N else "general"
    if route == "closed_form" and spec is None:
        raise ConfigError("route", "field 'route': the closed form needs a two-value or uniform prior")
    if route == "general" and n > GENERAL_PATH_MAX_N:
        raise ConfigError(
            "n", f"field 'n': the dense general path is limited to n <= {GENERAL_PATH_MAX_N}; use a two-value prior"
        )
    return route


def cmd_optimize(cfg, args):
    probs, spec = resolve_prior(cfg)
    n = probs.size
    delta_p = _float(cfg, "delta_p", 0.0)
    if not 0 <= delta_p < 1:
        raise ConfigError("delta_p", f"field 'delta_p': must lie in [0, 1), got {delta_p!r}")
    route = _choose_route(cfg, spec, n)
    out = optimize_two_value(spec, delta_p) if route == "closed_form" else optimize(probs, n, delta_p)
    simulated = simulated_average_success(out.psi_opt, out.phi_opt, probs, out.j_min)
    writes = cfg.get("write_states") or {}
    if not isinstance(writes, dict) or not set(writes) <= {"psi", "phi"}:
        raise ConfigError("write_states", "field 'write_states': expected {\"psi\": path, \"phi\": path}")
    if "psi" in writes:
        write_vector(writes["psi"], out.psi_opt)
    if "phi" in writes:
        write_vector(writes["phi"], out.phi_opt)
    result = {
        "route": route,
        "s_factor": out.s_factor,
        "delta_lambda": out.delta_lambda,
        "j_min": out.j_min,
        "j_standard": out.j_standard,
        "predicted_success": out.predicted_success,
        "simulated_success": simulated,
        "average_queries_per_success": out.j_min / simulated if simulated > 0 else math.inf,
        "condition_estimate": out.condition,
        "repair_steps": out.repair_steps,
        "lambda_opt": out.lambda_opt,
    }
    return render_json("optimize", cfg, result)


def fig3_p_values(n, k, points, include_uniform):
    ps = np.linspace(0.0, 1.0 / k, points)
    ps[-1] = 1.0 / k
    if include_uniform and 1.0 / n <= 1.0 / k:
        # replace a grid point that only differs from 1/n by rounding
        near = np.isclose(ps, 1.0 / n, rtol=1e-12, atol=0)
        ps = np.append(ps[~near], 1.0 / n)
    return np.unique(ps)


def cmd_sweep_fig3(cfg, args):
    n = _int(cfg, "n", 10000, minimum=2)
    ks = _int_list(cfg, "k_list", FIG3_K)
    points = _int(cfg, "p_points", 201, minimum=2)
    include_uniform = bool(cfg.get("include_uniform", True))
    explicit = _float_list(cfg, "p_grid", []) if "p_grid" in cfg else None

    def rows_for(k):
        if not 1 <= k < n:
            print(f"note: skipping k={k} outside [1, {n})", file=sys.stderr)
            return []
        if explicit is not None:
            ps = [p for p in explicit if 0 <= p <= 1.0 / k]
        else:
            ps = fig3_p_values(n, k, points, include_uniform)
        rows = []
        for p in ps:
            try:
                rows.append((p, k, n, s_factor(TwoValueSpec(n, k, p))))
            except QsoptError as exc:
                print(f"note: skipping k={k} p={p!r}: {exc}", file=sys.stderr)
        return rows

    chunks = _map(rows_for, ks, args.threads)
    rows = [r for chunk in chunks for r in chunk]
    if args.format == "json":
        return render_json("sweep-fig3", cfg, [dict(zip(("p", "k", "n", "s"), r)) for r in rows])
    return render_csv(["p", "k", "n", "s"], rows)


def fig4_p(rule, k):
    if rule == "near_max":
        return (1 - 1e-6) / k
    if rule == "tiny":
        return 1e-6
    raise ConfigError("p_rule", f"field 'p_rule': expected near_max or tiny, got {rule!r}")


def cmd_ratio_fig4(cfg, args):
    n = _int(cfg, "n", 10000, minimum=2)
    ks = _int_list(cfg, "k_list", FIG4_K)
    rule = cfg.get("p_rule", "near_max")
    grid = _float_list(cfg, "dlambda_grid", FIG4_GRID)
    if not grid:
        raise ConfigError("dlambda_grid", "field 'dlambda_grid': must not be empty")
    specs = []
    for k in ks:
        try:
            specs.append(TwoValueSpec(n, k, fig4_p(rule, k)))
        except ConfigError:
            raise
        except QsoptError as exc:
            raise ConfigError("k_list", f"field 'k_list': k={k}: {exc}") from None

    def rows_for(spec):
        return [(spec.k, dl, dp, r) for dl, dp, r in exact_ratio_scan(spec, grid)]

    try:
        chunks = _map(rows_for, specs, args.threads)
    except InvalidInputError as exc:
        raise ConfigError("dlambda_grid", f"field 'dlambda_grid': {exc}") from None
    rows = [r for chunk in chunks for r in chunk]
    if args.format == "json":
        return render_json("ratio-fig4", cfg, [dict(zip(("k", "dlambda", "dpbar", "ratio"), r)) for r in rows])
    return render_csv(["k", "dlambda", "dpbar", "ratio"], rows)


def _spec_list(cfg, key, default):
    raw = cfg.get(key)
    if raw is None:
        return default
    try:
        return [TwoValueSpec(d["n"], d["k"], d["p"]) for d in raw]
    except (TypeError, KeyError, QsoptError) as exc:
        raise ConfigError(key, f"field '{key}': expected a list of {{n, k, p}} records ({exc})") from None


def default_curvature_priors():
    return [
        np.full(16, 1 / 16),
        TwoValueSpec(100, 10, 0.05).probs(),
        TwoValueSpec(400, 40, 0.001).probs(),
    ]


def ascent_check(specs, delta_p=1e-3, tol=1e-8, seeds=5):
    """Ascent fixed points versus the first-order optimum at the same count."""
    details = []
    for spec in specs:
        out = optimize(spec.probs(), spec.n, delta_p)
        # compare at the count the returned states were built for
        lam = out.lambda_opt
        results, spread = vf.multistart_ascent(spec.probs(), spec.n, lam, seeds=seeds)
        radius = 2 * np.linalg.norm(out.dpsi_dlambda) * abs(lam - std_lambda(spec.n))
        dist = max(min(np.linalg.norm(r.psi - out.psi_opt), np.linalg.norm(r.psi + out.psi_opt)) for r in results)
        residual = max(max(r.residual_psi, r.residual_phi) for r in results)
        gain = max(vf.perturbation_gain(r.psi, r.phi, spec.probs(), lam, spec.n, seed=i) for i, r in enumerate(results))
        details.append(
            {
                "n": spec.n,
                "k": spec.k,
                "p": spec.p,
                "residual": residual,
                "distance": dist,
                "first_order_radius": radius,
                "start_spread": spread,
                "perturbation_gain": gain,
                "abs_error": residual,
                "rel_error": dist / radius if radius > 0 else dist,
                "passed": residual < tol and dist <= radius and gain <= 0 and all(r.converged for r in results),
            }
        )
    return vf._report("ascent", details, tol)


def run_checks(cfg, seed):
    checks = cfg.get("checks", list(VERIFY_CHECKS))
    if isinstance(checks, str):
        checks = [checks]
    unknown = [c for c in checks if c not in VERIFY_CHECKS]
    if unknown:
        raise ConfigError("checks", f"field 'checks': unknown checks {unknown}; choose from {list(VERIFY_CHECKS)}")
    reports = []
    for name in checks:
        if name == "gradients":
            sizes = _int_list(cfg, "gradient_sizes", [4, 8, 16, 32])
            reports.append(vf.gradient_check(_int(cfg, "gradient_cases", 100, minimum=1), sizes, seed))
        elif name == "std_identities":
            reports.append(vf.std_identity_check(seed=seed))
        elif name == "curvature":
            grid = cfg.get("curvature_grid")
            if grid is not None:
                grid = _float_list(cfg, "curvature_grid", [])
            reports.append(vf.curvature_check(default_curvature_priors(), grid))
        elif name == "minv":
            reports.append(vf.minv_grid_check(_spec_list(cfg, "minv_specs", vf.default_minv_specs())))
        elif name == "ascent":
            reports.append(ascent_check(_spec_list(cfg, "ascent_specs", [TwoValueSpec(50, 5, 0.1)]), seeds=3))
    return reports


def cmd_verify(cfg, args):
    reports = run_checks(cfg, args.seed)
    passed = all(r.passed for r in reports)
    text = render_json("verify", cfg, [r.to_dict() for r in reports], passed=passed)
    return text, (EXIT_OK if passed else EXIT_VERIFY)


def quick_verification(seed):
    cfg = {"checks": ["std_identities", "gradients", "minv"], "gradient_cases": 20,
           "minv_specs": [{"n": 20, "k": 4, "p": 0.1}]}
    return run_checks(cfg, seed)


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep-fig3": cmd_sweep_fig3,
    "ratio-fig4": cmd_ratio_fig4,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="qsopt", description="Grover search with a priori probabilities")
    parser.add_argument("--version", action="version", version=f"qsopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    default_threads = os.environ.get("QSOPT_THREADS", "1")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON config file, '-' for stdin")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override a config field")
        p.add_argument("--out", metavar="PATH", help="write the result here instead of stdout")
        fmt_default = "csv" if name in ("sweep-fig3", "ratio-fig4") else "json"
        p.add_argument("--format", choices=("json", "csv"), default=fmt_default)
        p.add_argument("--threads", type=int, default=None, help="worker threads (default $QSOPT_THREADS or 1)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verify-first", action="store_true", help="run a quick verification suite first")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(default_threads=default_threads)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    text = ""
    try:
        if args.threads is None:
            try:
                args.threads = int(args.default_threads)
            except ValueError:
                raise ConfigError(None, f"QSOPT_THREADS must be an integer, got {args.default_threads!r}") from None
        if args.threads < 1:
            raise ConfigError(None, "--threads must be at least 1")
        cfg, text = load_config(args.config, args.set)
        if args.verify_first:
            reports = quick_verification(args.seed)
            if not all(r.passed for r in reports):
                sys.stderr.write(render_json("verify", {}, [r.to_dict() for r in reports], passed=False))
                return EXIT_VERIFY
        out = COMMANDS[args.command](cfg, args)
        code = EXIT_OK
        if isinstance(out, tuple):
            out, code = out
        emit(out, args.out)
        return code
    except ConfigError as exc:
        line = _field_line(text, exc.field)
        where = f"line {line}: " if line else ""
        print(f"config error: {where}{exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QsoptError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
