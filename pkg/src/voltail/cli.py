"""``voltail`` command-line front end.

Every command writes CSV (or JSON with ``--format json``) to ``--out`` or
stdout. Floats carry 12 significant digits. Options may also come from a
``--config`` file; flags given on the command line win. ``--report PATH``
stores a JSON record of the run that ``voltail replay PATH`` re-executes and
verifies.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import platform
import re
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .carrlee import (EigenContract, ReplicationError, clock_tail_slope, recover_clock_laplace,
                      replication_weights, subexponential_feasibility)
from .cev import (CevParams, CevQuadratureError, cev_log_density, cev_tail_asymptote, cev_wing_asymptote,
                  locvol_wing_asymptote)
from .config import ConfigError, load_config
from .energy import EnergySolverError, NsBounds, EnergyProblem, energy_curve, ns_bounds_check
from .expr import ExpressionError, parse as parse_expr
from .geodesic import (BracketError, DossBounds, QuadratureError, doss_sandwich_log_tail, doss_tail_asymptote,
                       geodesic_curve)
from .montecarlo import (McConfig, compose_time_change, simulate_cev, simulate_cir_and_integral,
                         simulate_log_stock, tail_prob)
from .timechange import CirParams, critical_lambda, digital_tail_slope
from .volmodel import BoundsError, DomainError, DriftSpec, VolModel

log = logging.getLogger("voltail")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (QuadratureError, BracketError, EnergySolverError, CevQuadratureError, ReplicationError,
                  FloatingPointError, ZeroDivisionError, OverflowError)


class NumericalFailure(RuntimeError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    return buf.getvalue()


def parse_grid(text: str) -> List[float]:
    """``a:b:step`` (inclusive, rounded to the step) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid {text!r} must be start:stop:step")
        a, b, h = (float(p) for p in parts)
        if h <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [float(np.round(a + i * h, 12)) for i in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# -- argument groups ------------------------------------------------------


def _model_args(p, default="local-dip"):
    g = p.add_argument_group("volatility model")
    g.add_argument("--model", default=default,
                   help="constant | local-dip (alias paper-figure-1) | cev-local | expression")
    g.add_argument("--sigma0", type=float, default=0.2)
    g.add_argument("--delta", type=float, default=0.2)
    g.add_argument("--beta", type=float, default=-0.5)
    g.add_argument("--expr", default=None, help="sigma as an expression in x (and t)")
    g.add_argument("--sigma-lo", type=float, default=None)
    g.add_argument("--sigma-hi", type=float, default=None)
    g.add_argument("--confirm-bounds", action="store_true", help="accept grid-estimated bounds for --expr")
    g.add_argument("--fd-step", type=float, default=None, help="use central differences with this step")
    g.add_argument("--central-differences", action="store_true")


def _drift_args(p):
    p.add_argument("--drift", default="driftless",
                   help="driftless (log of a driftless stock), zero, or an expression for mu")


def _cev_args(p):
    g = p.add_argument_group("CEV")
    g.add_argument("--delta", type=float, default=0.2)
    g.add_argument("--beta", type=float, default=-0.5)
    g.add_argument("--x0", type=float, default=1.0)
    g.add_argument("--T", type=float, default=1.0)


def _cir_args(p):
    g = p.add_argument_group("CIR clock")
    g.add_argument("--kappa", type=float, default=2.0)
    g.add_argument("--theta", type=float, default=0.04)
    g.add_argument("--sigma-v", type=float, default=0.5)
    g.add_argument("--v0", type=float, default=0.04)
    g.add_argument("--T", type=float, default=1.0)


def _mc_args(p, paths=100_000, steps=200):
    g = p.add_argument_group("Monte Carlo")
    g.add_argument("--n-paths", type=int, default=paths)
    g.add_argument("--n-steps", type=int, default=steps)


def build_model(a) -> VolModel:
    kind = a.model
    if kind in ("constant",):
        m = VolModel.constant(a.sigma0)
    elif kind in ("cev-local",):
        m = VolModel.cev_local(a.delta, a.beta)
    elif kind in ("expression", "user-expression"):
        if not a.expr:
            raise ConfigError("--model expression needs --expr")
        m = VolModel.from_expression(a.expr, a.sigma_lo, a.sigma_hi, confirm_bounds=a.confirm_bounds)
    else:
        m = VolModel.from_kind(kind)
    if a.central_differences or a.fd_step is not None:
        m = m.with_central_differences(a.fd_step)
    return m


def build_drift(a) -> DriftSpec:
    if a.drift in ("driftless", "driftless-log-stock"):
        return DriftSpec.driftless_log_stock()
    if a.drift == "zero":
        return DriftSpec.zero()
    return DriftSpec.explicit(a.drift)


def _cev(a) -> CevParams:
    return CevParams(a.delta, a.beta, a.x0, a.T)


def _cir(a) -> CirParams:
    return CirParams(a.kappa, a.theta, a.sigma_v, a.v0)


# -- commands ---------------------------------------------------------------


def cmd_geodesic(a):
    m = build_model(a)
    us = a.u_grid if a.u_grid is not None else [a.to]
    if us == [None]:
        raise ConfigError("geodesic needs --to or --u-grid")
    rows = geodesic_curve(m, a.frm, us)
    return _csv(["y", "u", "d"], rows), {"rows": len(rows)}


def _energy_rows(a, header):
    m, drift = build_model(a), build_drift(a)
    rows = energy_curve(m, drift, a.t, a.u, a.x, a.y_grid, n_grid=a.n_grid, cross_check=a.cross_check,
                        workers=a.workers)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        log.error("y=%s: solver failure: %s", fmt(r.y), r.error)
    return m, drift, rows, failed


def cmd_energy(a):
    _, _, rows, failed = _energy_rows(a, None)
    text = _csv(["y", "E", "half_d2", "method", "residual"], ((r.y, r.E, r.half_d2, r.method, r.residual) for r in rows))
    summary = {"rows": len(rows), "failed": len(failed)}
    if failed:
        return text, summary, EXIT_NUMERIC
    return text, summary


def cmd_fig2(a):
    a.cross_check = True
    m, drift, rows, failed = _energy_rows(a, None)
    bounds = NsBounds.from_model(m, drift)
    outside, disagree = [], []
    for r in rows:
        if not r.ok:
            continue
        chk = ns_bounds_check(EnergyProblem(a.t, a.u, a.x, r.y, m, drift), bounds, r.E)
        if not (chk.strictly_inside or (chk.inside and chk.lower == chk.upper)):
            outside.append(r.y)
        if r.rel_diff > a.agree_tol:
            disagree.append(r.y)
    print(f"fig2: {len(rows)} rows, {len(failed)} solver failures, {len(outside)} outside NS bounds, "
          f"{len(disagree)} shooting/direct disagreements above {a.agree_tol:g}; "
          f"lambda={bounds.lambda_cap:.6g}, Lambda={bounds.Lambda_cap:.6g}", file=sys.stderr)
    text = _csv(["y", "E", "half_d2"], ((r.y, r.E, r.half_d2) for r in rows))
    summary = {"rows": len(rows), "failed": len(failed), "outside_bounds": len(outside),
               "disagreements": len(disagree), "lambda": bounds.lambda_cap, "Lambda": bounds.Lambda_cap,
               "max_rel_diff": max((r.rel_diff for r in rows if r.ok), default=math.nan)}
    if failed or outside or disagree:
        return text, summary, EXIT_NUMERIC
    return text, summary


def cmd_cev_tail(a):
    p = _cev(a)
    xs = np.asarray(a.x_grid, dtype=float)
    ld = np.atleast_1d(cev_log_density(p, xs))
    asym = np.atleast_1d(cev_tail_asymptote(p, xs))
    rows = [(x, l, s, -l / s) for x, l, s in zip(xs, ld, asym)]
    return _csv(["x", "log_density", "asymptote", "ratio"], rows), {"rows": len(rows)}


def cmd_wing(a):
    ks = np.asarray(a.k_grid, dtype=float)
    if a.kind == "cev":
        vals = np.atleast_1d(cev_wing_asymptote(_cev(a), ks))
    else:
        m, drift = build_model(a), build_drift(a)
        rows = energy_curve(m, drift, a.t, a.u, a.x0, [a.x0 + k for k in ks], n_grid=a.n_grid)
        bad = [r for r in rows if not r.ok]
        if bad:
            raise NumericalFailure(f"energy solver failed at {len(bad)} points")
        vals = np.array([locvol_wing_asymptote(k, r.E) for k, r in zip(ks, rows)])
    return _csv(["k", "i2_over_k"], zip(ks, vals)), {"rows": len(ks)}


def cmd_critical_lambda(a):
    cm = critical_lambda(_cir(a), a.T)
    finite = cm.finite
    out = {
        "lambda_star": cm.lambda_star,
        "bracket_lo": cm.bracket[0],
        "bracket_hi": cm.bracket[1],
        "slope": digital_tail_slope(cm) if finite else math.inf,
        "feasibility": subexponential_feasibility(clock_tail_slope(cm.lambda_star)).verdict,
    }
    return _csv(list(out), [list(out.values())]), out


def _read_samples(path: str) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read samples: {exc.strerror}", source=path) from exc
    if not lines:
        raise ConfigError("empty samples file", source=path)
    try:
        return np.array([float(v.split(",")[0]) for v in lines[1:]])
    except ValueError as exc:
        raise ConfigError(f"bad sample value ({exc})", source=path) from exc


def cmd_carrlee(a):
    c = EigenContract(a.lam, a.kind, _cev(a) if a.kind == "cev" else None, anchor=a.anchor)
    samples = _read_samples(a.samples)
    s0 = a.s0 if a.s0 is not None else (a.x0 if a.kind == "cev" else a.anchor)
    est = recover_clock_laplace(c, s0, samples)
    out = {"lambda": a.lam, "estimate": est.value, "half_width_95": est.half_width_95, "n": est.n_effective,
           "heavy_tail": est.heavy_tail_flag}
    return _csv(list(out), [list(out.values())]), out


def cmd_replicate(a):
    tree = parse_expr(a.payoff)
    if tree.depends_on("t"):
        raise ConfigError("payoff may only use x (the underlying level)")
    w = replication_weights(lambda s: tree.evaluate(s), a.forward, a.grid, tolerance=a.tolerance)
    return _csv(["type", "strike", "weight"], w.rows()), {"puts": len(w.put_strikes), "calls": len(w.call_strikes)}


def cmd_mc(a):
    cfg = McConfig(a.n_paths, a.n_steps, a.seed)
    summary: Dict[str, object] = {"process": a.process, "n_paths": a.n_paths, "n_steps": a.n_steps}
    if a.process == "log-stock":
        x = simulate_log_stock(build_model(a), build_drift(a), a.x0, a.T, cfg)
        name = "x"
    elif a.process == "cev":
        res = simulate_cev(_cev(a), cfg)
        x, name = res.terminal, "s"
        summary["absorbed_fraction"] = res.absorbed_fraction
    elif a.process == "cir":
        _, x = simulate_cir_and_integral(_cir(a), a.T, cfg)
        name = "tau"
    else:
        if a.clock:
            tau = _read_samples(a.clock)
            cfg = McConfig(len(tau), a.n_steps, a.seed)
        else:
            _, tau = simulate_cir_and_integral(_cir(a), a.T, cfg)
        x, name = compose_time_change(_cev(a), tau, cfg), "s"
        summary["absorbed_fraction"] = float(np.mean(x == 0))
    summary["mean"] = float(np.mean(x))
    print(" ".join(f"{k}={fmt(v)}" for k, v in summary.items()), file=sys.stderr)
    return _csv([name], ((v,) for v in x)), summary


def cmd_doss_check(a):
    m = build_model(a)
    c1 = a.c1 if a.c1 is not None else (-0.5 * m.sigma0 ** 2 if m.kind == "constant" else None)
    c2 = a.c2 if a.c2 is not None else c1
    if c1 is None:
        raise ConfigError("doss-check needs --c1/--c2 unless --model constant")
    bounds = DossBounds(c1, c2)
    mc = None
    if a.mc_paths:
        mc = simulate_log_stock(m, build_drift(a), a.x0, a.t, McConfig(a.mc_paths, a.n_steps, a.seed))
    header = ["x", "d", "asymptote", "log_lower", "log_upper"] + (["log_mc", "mc_half_width"] if mc is not None else [])
    rows = []
    for x in a.x_grid:
        d2 = doss_tail_asymptote(m, a.x0, x, a.t)
        lo, hi = doss_sandwich_log_tail(m, bounds, a.x0, x, a.t)
        row = [x, math.sqrt(2 * a.t * d2), d2, lo, hi]
        if mc is not None:
            est = tail_prob(mc, x)
            row += [math.log(est.value) if est.value > 0 else -math.inf, est.half_width_95]
        rows.append(row)
    return _csv(header, rows), {"rows": len(rows)}


COMMANDS = {
    "geodesic": cmd_geodesic, "energy": cmd_energy, "fig2": cmd_fig2, "cev-tail": cmd_cev_tail,
    "wing": cmd_wing, "critical-lambda": cmd_critical_lambda, "carrlee": cmd_carrlee,
    "replicate": cmd_replicate, "mc": cmd_mc, "doss-check": cmd_doss_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file; flags override it")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=20240101)
    common.add_argument("--report", help="write a JSON run report here")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="voltail", description="Tail asymptotics for diffusion and CEV models.")
    parser.add_argument("--version", action="version", version=f"voltail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geodesic", parents=[common], help="geodesic distance d(y, u)")
    _model_args(p)
    p.add_argument("--from", dest="frm", type=float, default=0.0)
    p.add_argument("--to", type=float, default=None)
    p.add_argument("--u-grid", type=parse_grid, default=None)

    for name, helptext in (("energy", "energy curve E(t, x; u, y)"), ("fig2", "energy vs half squared distance, y in [-3, 3]")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        _model_args(p)
        _drift_args(p)
        p.add_argument("--x", type=float, default=0.0)
        p.add_argument("--t", type=float, default=0.0)
        p.add_argument("--u", type=float, default=1.0)
        p.add_argument("--y-grid", type=parse_grid, default=parse_grid("-3:3:0.05"))
        p.add_argument("--n-grid", type=int, default=256 if name == "fig2" else 512)
        p.add_argument("--workers", type=int, default=1)
        if name == "energy":
            p.add_argument("--cross-check", action="store_true")
        else:
            p.add_argument("--agree-tol", type=float, default=1e-4)

    p = sub.add_parser("cev-tail", parents=[common], help="CEV log-density against its tail asymptote")
    _cev_args(p)
    p.add_argument("--x-grid", type=parse_grid, default=parse_grid("10,100,1000,10000"))

    p = sub.add_parser("wing", parents=[common], help="large-strike implied variance slope I^2(k)/k")
    p.add_argument("--kind", choices=("cev", "locvol"), default="cev")
    _model_args(p)
    _drift_args(p)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--u", type=float, default=1.0)
    p.add_argument("--n-grid", type=int, default=256)
    p.add_argument("--k-grid", type=parse_grid, default=parse_grid("1:10:1"))

    p = sub.add_parser("critical-lambda", parents=[common], help="critical exponential moment of the CIR clock")
    _cir_args(p)

    p = sub.add_parser("carrlee", parents=[common], help="clock Laplace transform from terminal samples")
    p.add_argument("--kind", choices=("brownian", "cev"), default="brownian")
    p.add_argument("--lambda", dest="lam", type=float, required=False, default=0.5)
    p.add_argument("--samples", required=True, help="single-column CSV with a header line")
    p.add_argument("--s0", type=float, default=None)
    p.add_argument("--anchor", type=float, default=1.0)
    _cev_args(p)

    p = sub.add_parser("replicate", parents=[common], help="Carr-Madan static replication weights")
    p.add_argument("--payoff", required=True, help="payoff expression in x")
    p.add_argument("--forward", type=float, default=1.0)
    p.add_argument("--grid", type=parse_grid, default=parse_grid("0.05:3:0.05"))
    p.add_argument("--tolerance", type=float, default=None)

    p = sub.add_parser("mc", parents=[common], help="simulate terminal samples")
    p.add_argument("process", choices=("log-stock", "cev", "cir", "compose"))
    _mc_args(p)
    _model_args(p)
    _drift_args(p)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--theta", type=float, default=0.04)
    p.add_argument("--sigma-v", type=float, default=0.5)
    p.add_argument("--v0", type=float, default=0.04)
    p.add_argument("--clock", default=None, help="clock samples CSV for compose")

    p = sub.add_parser("doss-check", parents=[common], help="Doss sandwich bounds against the tail exponent")
    _model_args(p, default="constant")
    _drift_args(p)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x-grid", type=parse_grid, default=parse_grid("0.5:2.5:0.5"))
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--mc-paths", type=int, default=0)
    p.add_argument("--n-steps", type=int, default=100)

    p = sub.add_parser("replay", help="re-run a JSON report and verify its output")
    p.add_argument("report_file")
    return parser


def _apply_config(parser, sub_parser, argv, ns):
    """Fill options from the config file unless they appear on the command line."""
    cfg = load_config(ns.config)
    actions = {a.dest: a for a in sub_parser._actions}
    given = {a.dest for a in sub_parser._actions for s in a.option_strings if any(
        arg == s or arg.startswith(s + "=") for arg in argv)}
    for key, raw in cfg.flat().items():
        line, col = cfg.origin[key]
        act = actions.get(key) or actions.get({"from": "frm", "lambda": "lam"}.get(key, ""))
        if act is None or key in ("config", "report", "help"):
            raise ConfigError(f"unknown key {key!r} for command {ns.command}", line, col, cfg.source)
        if act.dest in given:
            continue
        try:
            if isinstance(act, (argparse._StoreTrueAction,)):
                val = _bool(raw)
            elif act.type is not None:
                val = act.type(raw)
            else:
                val = raw
            if act.choices is not None and val not in act.choices:
                raise ValueError(f"must be one of {list(act.choices)}")
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad value {raw!r} for {key!r}: {exc}", line, col, cfg.source) from None
        setattr(ns, act.dest, val)


def _subparser(parser, name):
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[name]
    raise KeyError(name)


def _versions():
    import scipy
    return {"voltail": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _jsonable(v.item())
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _glue_negative_values(argv: Sequence[str]) -> List[str]:
    """Turn ``--opt -3:3:0.05`` into ``--opt=-3:3:0.05`` so argparse does not read a flag."""
    out: List[str] = []
    for arg in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and re.match(r"^-[\d.]", arg):
            out[-1] = f"{out[-1]}={arg}"
        else:
            out.append(arg)
    return out


def _run(argv: Sequence[str]):
    """Parse and execute; returns (exit code, output text, summary, namespace)."""
    argv = _glue_negative_values(argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "replay":
        return _replay(ns.report_file)
    if ns.config:
        _apply_config(parser, _subparser(parser, ns.command), list(argv), ns)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="voltail: %(message)s")
    res = COMMANDS[ns.command](ns)
    text, summary = res[0], res[1]
    code = res[2] if len(res) > 2 else EXIT_OK
    if ns.format == "json":
        lines = text.strip().splitlines()
        header = lines[0].split(",")
        text = json.dumps({"columns": header, "rows": [ln.split(",") for ln in lines[1:]],
                           "summary": _jsonable(summary)}, indent=2) + "\n"
    return code, text, summary, ns


def _replay(path: str):
    try:
        with open(path) as fh:
            rep = json.load(fh)
        argv = rep["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable report: {exc}", source=path) from exc
    code, text, summary, ns = _run(argv)
    digest = hashlib.sha256(text.encode()).hexdigest()
    match = digest == rep.get("output_sha256")
    out = {"report": path, "command": rep.get("command"), "seed": rep.get("seed"), "reproduced": match}
    print(f"replay: {'output reproduced' if match else 'OUTPUT DIFFERS'}", file=sys.stderr)
    return (EXIT_OK if match and code == EXIT_OK else EXIT_NUMERIC), _csv(list(out), [list(out.values())]), out, None


def _strip_report(argv: Sequence[str]) -> List[str]:
    out, skip = [], False
    for arg in argv:
        if skip:
            skip = False
            continue
        if arg == "--report":
            skip = True
            continue
        if arg.startswith("--report="):
            continue
        out.append(arg)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        code, text, summary, ns = _run(argv)
        if ns is not None and ns.out:
            with open(ns.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if ns is not None and ns.report:
            clean = _strip_report(argv)
            rep = {"command": ns.command, "argv": clean, "seed": ns.seed,
                   "inputs": _jsonable({k: v for k, v in vars(ns).items() if k not in ("report",)}),
                   "outputs": _jsonable(summary), "exit_code": code,
                   "tolerances": {"quad_abs": 1e-10, "root_xtol": 1e-12, "lambda_rtol": 1e-6, "ns_agree": 1e-4},
                   "versions": _versions(),
                   "output_sha256": hashlib.sha256(text.encode()).hexdigest()}
            with open(ns.report, "w") as fh:
                json.dump(rep, fh, indent=2)
        return code
    except (ConfigError, ExpressionError, BoundsError, DomainError) as exc:
        print(f"voltail: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError,) as exc:
        print(f"voltail: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS + (NumericalFailure,) as exc:
        print(f"voltail: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
