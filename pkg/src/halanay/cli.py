"""Command-line front end: config ingestion, pipelines, reports, plots.

Subcommands: certify (run the configured analysis and write a JSON
report), simulate (integrate the system and write a CSV trajectory plus
a gnuplot script), verify (certify, simulate, and check the trajectory
against the certified envelope), and mlf (print one Mittag-Leffler
value). Exit codes: 0 pass/feasible, 2 infeasible or envelope
violation, 1 input error.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    ExprEvalError,
    ExprSyntaxError,
    HalanayError,
    InfeasiblePointError,
    MlfDomainError,
    MlfOverflowError,
    StepSizeError,
    StructureError,
    VerdictNoneError,
)
from .expr import parse
from .fdde import SolverConfig, check_envelope, solve, write_csv
from .halanay import (
    NONE,
    HalanayInput,
    ScanGrid,
    certify,
    classify_conditions,
    envelope as decay_envelope,
)
from .lmi import LmiInput, certify_lmi
from .mlf import ml
from .positivity import DelaySystem, certify_positive, initial_amplitude

__all__ = [
    "RunConfig",
    "load_config",
    "config_to_dict",
    "run",
    "emit_plot_script",
    "main",
]

ANALYSES = ("positive", "lmi", "halanay-scalar")
GRID_NOTE = (
    "certificate is grid-relative: conditions were checked on the scan "
    "grid only, not beyond t_max"
)

_TOP_KEYS = {
    "alpha", "dim", "tau", "analysis", "A", "B", "q", "phi",
    "gamma", "sigma", "a_bounded", "scan", "solver", "output",
}


@dataclass(frozen=True)
class RunConfig:
    alpha: float
    dim: int
    tau: float
    analysis: str
    A: tuple  # rows of TimeExpr
    B: tuple
    q: tuple  # one TimeExpr per delay term
    q_single: bool  # config spelled q as a plain string
    phi: tuple
    gamma: object  # TimeExpr or None
    sigma: object
    a_bounded: object  # bool or None
    scan: ScanGrid
    solver: object  # SolverConfig or None
    tolerance: float
    csv_path: str
    report_path: str


def _want(errors, data, key, types, path=None):
    path = path or key
    if key not in data:
        errors.append((path, "missing required field"))
        return None
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, types):
        errors.append((path, f"expected {types[0].__name__}, got {val!r}"))
        return None
    return val


def _expr(errors, raw, path, var):
    if not isinstance(raw, str):
        errors.append((path, f"expected an expression string, got {raw!r}"))
        return None
    try:
        return parse(raw, var)
    except ExprSyntaxError as exc:
        errors.append((path, str(exc)))
        return None


def _matrix(errors, data, key, rows, cols):
    raw = data.get(key)
    if raw is None:
        errors.append((key, "missing required field"))
        return None
    if not isinstance(raw, list) or len(raw) != rows or any(
        not isinstance(r, list) or len(r) != cols for r in raw
    ):
        errors.append((key, f"expected a {rows}x{cols} matrix of strings"))
        return None
    out = []
    for i, row in enumerate(raw):
        out.append(tuple(_expr(errors, e, f"{key}[{i}][{j}]", "t")
                         for j, e in enumerate(row)))
    if any(e is None for row in out for e in row):
        return None
    return tuple(out)


def load_config(path):
    """Read and fully parse a JSON run configuration.

    Every expression is parsed eagerly; all problems are aggregated into
    one ConfigError listing the offending field paths.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError([("(file)", str(exc))])
    except json.JSONDecodeError as exc:
        raise ConfigError([("(file)", f"invalid JSON: {exc}")])
    if not isinstance(data, dict):
        raise ConfigError([("(file)", "top level must be a JSON object")])

    errors = []
    for key in sorted(set(data) - _TOP_KEYS):
        errors.append((key, "unknown field"))

    alpha = _want(errors, data, "alpha", (int, float))
    if alpha is not None and not 0.0 < alpha <= 1.0:
        errors.append(("alpha", f"must lie in (0, 1], got {alpha}"))
        alpha = None
    dim = _want(errors, data, "dim", (int,))
    if dim is not None and dim < 1:
        errors.append(("dim", f"must be >= 1, got {dim}"))
        dim = None
    tau = _want(errors, data, "tau", (int, float))
    if tau is not None and not (math.isfinite(tau) and tau > 0):
        errors.append(("tau", f"must be positive, got {tau}"))
        tau = None
    analysis = _want(errors, data, "analysis", (str,))
    if analysis is not None and analysis not in ANALYSES:
        errors.append(("analysis", f"must be one of {ANALYSES}, got {analysis!r}"))
        analysis = None

    raw_q = data.get("q")
    q_single = isinstance(raw_q, str)
    q = None
    if raw_q is None:
        errors.append(("q", "missing required field"))
    elif q_single:
        e = _expr(errors, raw_q, "q", "t")
        q = (e,) if e is not None else None
    elif isinstance(raw_q, list) and raw_q:
        if analysis is not None and analysis != "halanay-scalar":
            errors.append(("q", "a list of delays needs analysis = halanay-scalar"))
        parsed = tuple(_expr(errors, e, f"q[{i}]", "t") for i, e in enumerate(raw_q))
        q = parsed if all(e is not None for e in parsed) else None
    else:
        errors.append(("q", f"expected an expression string or list, got {raw_q!r}"))

    A = B = None
    if dim is not None:
        if analysis == "halanay-scalar":
            if dim != 1:
                errors.append(("dim", "halanay-scalar analysis requires dim = 1"))
            else:
                A = _matrix(errors, data, "A", 1, 1)
                if q is not None:
                    B = _matrix(errors, data, "B", 1, len(q))
        else:
            A = _matrix(errors, data, "A", dim, dim)
            B = _matrix(errors, data, "B", dim, dim)

    phi = None
    raw_phi = data.get("phi")
    if not isinstance(raw_phi, list) or (dim is not None and len(raw_phi) != dim):
        errors.append(("phi", f"expected a list of {dim} expression strings"))
    else:
        parsed = tuple(_expr(errors, e, f"phi[{i}]", "s") for i, e in enumerate(raw_phi))
        phi = parsed if all(e is not None for e in parsed) else None

    gamma = sigma = None
    for key in ("gamma", "sigma"):
        if key in data:
            val = _expr(errors, data[key], key, "t")
            if key == "gamma":
                gamma = val
            else:
                sigma = val
        elif analysis == "lmi":
            errors.append((key, "required when analysis = lmi"))

    a_bounded = data.get("a_bounded")
    if a_bounded is not None and not isinstance(a_bounded, bool):
        errors.append(("a_bounded", f"expected true/false, got {a_bounded!r}"))
        a_bounded = None

    scan = None
    raw_scan = data.get("scan")
    if not isinstance(raw_scan, dict):
        errors.append(("scan", "missing required object {t_max, n_points}"))
    else:
        t_max = _want(errors, raw_scan, "t_max", (int, float), "scan.t_max")
        n_points = _want(errors, raw_scan, "n_points", (int,), "scan.n_points")
        if t_max is not None and n_points is not None:
            try:
                scan = ScanGrid(float(t_max), n_points)
            except ValueError as exc:
                errors.append(("scan", str(exc)))

    solver = None
    tolerance = 0.02
    raw_solver = data.get("solver")
    if raw_solver is not None:
        if not isinstance(raw_solver, dict):
            errors.append(("solver", "expected an object {t_end, h, ...}"))
        else:
            t_end = _want(errors, raw_solver, "t_end", (int, float), "solver.t_end")
            h = _want(errors, raw_solver, "h", (int, float), "solver.h")
            iters = raw_solver.get("corrector_iters", 1)
            tol = raw_solver.get("tolerance", 0.02)
            if isinstance(tol, (int, float)) and not isinstance(tol, bool) and tol >= 0:
                tolerance = float(tol)
            else:
                errors.append(("solver.tolerance", f"must be >= 0, got {tol!r}"))
            if t_end is not None and h is not None:
                try:
                    solver = SolverConfig(float(t_end), float(h), iters)
                except (TypeError, ValueError) as exc:
                    errors.append(("solver", str(exc)))

    output = data.get("output") or {}
    if not isinstance(output, dict):
        errors.append(("output", "expected an object {csv_path, report_path}"))
        output = {}
    csv_path = output.get("csv_path", "trajectory.csv")
    report_path = output.get("report_path", "report.json")
    for name, val in (("csv_path", csv_path), ("report_path", report_path)):
        if not isinstance(val, str) or not val:
            errors.append((f"output.{name}", f"expected a file name, got {val!r}"))

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        alpha=float(alpha),
        dim=dim,
        tau=float(tau),
        analysis=analysis,
        A=A,
        B=B,
        q=q,
        q_single=q_single,
        phi=phi,
        gamma=gamma,
        sigma=sigma,
        a_bounded=a_bounded,
        scan=scan,
        solver=solver,
        tolerance=tolerance,
        csv_path=csv_path,
        report_path=report_path,
    )


def config_to_dict(cfg):
    """Inverse of load_config up to formatting: sources are kept verbatim."""
    out = {
        "alpha": cfg.alpha,
        "dim": cfg.dim,
        "tau": cfg.tau,
        "analysis": cfg.analysis,
        "A": [[e.source for e in row] for row in cfg.A],
        "B": [[e.source for e in row] for row in cfg.B],
        "q": cfg.q[0].source if cfg.q_single else [e.source for e in cfg.q],
        "phi": [e.source for e in cfg.phi],
        "scan": {"t_max": cfg.scan.t_max, "n_points": cfg.scan.n_points},
        "output": {"csv_path": cfg.csv_path, "report_path": cfg.report_path},
    }
    if cfg.gamma is not None:
        out["gamma"] = cfg.gamma.source
    if cfg.sigma is not None:
        out["sigma"] = cfg.sigma.source
    if cfg.a_bounded is not None:
        out["a_bounded"] = cfg.a_bounded
    if cfg.solver is not None:
        out["solver"] = {
            "t_end": cfg.solver.t_end,
            "h": cfg.solver.h,
            "corrector_iters": cfg.solver.corrector_iters,
            "tolerance": cfg.tolerance,
        }
    return out


def _build_system(cfg):
    return DelaySystem(
        alpha=cfg.alpha,
        dim=cfg.dim,
        A=[list(row) for row in cfg.A],
        B=[list(row) for row in cfg.B],
        q=cfg.q[0],
        tau=cfg.tau,
        phi=list(cfg.phi),
    )


def _scalar_input(cfg):
    # decay coefficient is the negated self-interaction term
    return HalanayInput(
        alpha=cfg.alpha,
        a=parse(f"-({cfg.A[0][0].source})", "t"),
        b=list(cfg.B[0]),
        q=list(cfg.q),
        c=parse("0", "t"),
        tau=cfg.tau,
        scan=cfg.scan,
        a_bounded=cfg.a_bounded,
    )


def _cert_json(cert):
    if cert is None:
        return None
    return {
        "lambda_star": cert.lambda_star,
        "w0": cert.w0,
        "M": cert.M,
        "residual_max": cert.residual_max,
        "grid_argmin": cert.grid_argmin,
        "case_tag": cert.case_tag,
        "t_max": cert.t_max,
        "n_points": cert.n_points,
    }


def _certify(cfg):
    """Run the configured analysis; returns (verdict_json, certificate, norm_tag)."""
    if cfg.analysis == "positive":
        sys_ = _build_system(cfg)
        verdict, cert = certify_positive(sys_, cfg.scan, a_bounded=cfg.a_bounded)
        vjson = {
            "metzler_ok": verdict.metzler_ok,
            "nonneg_ok": verdict.nonneg_ok,
            "a0": verdict.a0,
            "p": verdict.p,
            "sigma": verdict.sigma,
            "theorem_33_ok": verdict.theorem_33_ok,
            "remark_34_ok": verdict.remark_34_ok,
        }
        return vjson, cert, "l1"
    if cfg.analysis == "lmi":
        sys_ = _build_system(cfg)
        report = certify_lmi(
            LmiInput(sys=sys_, gamma=cfg.gamma, sigma=cfg.sigma, grid=cfg.scan),
            initial_amplitude(sys_, "sq"),
        )
        vjson = {
            "feasible": report.feasible,
            "worst_eigen": report.worst_eigen,
            "worst_t": report.worst_t,
            "a0": report.a0,
            "p": report.p,
        }
        return vjson, report.certificate, "l2"
    input_ = _scalar_input(cfg)
    verdict = classify_conditions(input_)
    vjson = {
        "case_tag": verdict.case_tag,
        "sigma": verdict.sigma,
        "a0": verdict.a0,
        "p": verdict.p,
        "c_star": verdict.c_star,
        "a_bounded": verdict.a_bounded,
    }
    cert = None
    if verdict.case_tag != NONE:
        ss = np.linspace(-cfg.tau, 0.0, 10_000)
        m_val = float(np.max(np.abs(cfg.phi[0].eval_array(ss))))
        cert = certify(input_, M=m_val)
    return vjson, cert, "l1"


def _envelope_fn(cfg, cert, norm_tag):
    if norm_tag == "l2":
        return lambda t: math.sqrt(decay_envelope(cert, cfg.alpha, t))
    return lambda t: decay_envelope(cert, cfg.alpha, t)


def emit_plot_script(traj_csv, envelope=True):
    """Write a gnuplot script next to the CSV; returns the script path.

    The script plots every state component against t, plus the envelope
    column when requested.
    """
    with open(traj_csv, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        has_data = bool(fh.readline().strip())
    if not header or not has_data:
        raise ValueError(f"{traj_csv} holds no trajectory rows")
    cols = header.split(",")
    d = len(cols) - 5
    if d < 1 or cols[0] != "t":
        raise ValueError(f"{traj_csv} does not look like a trajectory CSV")
    path = os.path.splitext(traj_csv)[0] + ".gp"
    base = os.path.basename(traj_csv)
    curves = [
        f"'{base}' using 1:{i + 2} with lines title 'x{i + 1}'" for i in range(d)
    ]
    if envelope:
        curves.append(
            f"'{base}' using 1:{d + 4} with lines lw 2 dashtype 2 title 'envelope'"
        )
    lines = [
        "set datafile separator ','",
        f"set title '{base}'",
        "set xlabel 't'",
        "set grid",
        "plot \\",
        ", \\\n".join("    " + c for c in curves),
        "pause -1",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _simulate(cfg, cert, norm_tag, out_dir):
    if cfg.solver is None:
        raise ConfigError([("solver", "required for simulate/verify")])
    if cfg.analysis == "halanay-scalar" and len(cfg.q) != 1:
        raise ConfigError(
            [("q", "simulation supports a single delay; certify handles lists")]
        )
    traj = solve(_build_system(cfg), cfg.solver)
    env_vals = None
    if cert is not None:
        fn = _envelope_fn(cfg, cert, norm_tag)
        env_vals = np.fromiter(
            (fn(t) for t in traj.grid), dtype=float, count=len(traj.grid)
        )
    csv_path = os.path.join(out_dir, cfg.csv_path)
    write_csv(traj, csv_path, envelope_values=env_vals, norm_tag=norm_tag)
    plot_path = emit_plot_script(csv_path, envelope=cert is not None)
    sim_json = {
        "t_end": cfg.solver.t_end,
        "h": cfg.solver.h,
        "nodes": len(traj.grid),
        "clamped_nodes": list(traj.clamped),
        "csv_path": csv_path,
        "plot_script": plot_path,
    }
    return traj, env_vals, sim_json


def run(command, cfg, out_dir="."):
    """Execute one subcommand; returns (report dict, exit code)."""
    os.makedirs(out_dir, exist_ok=True)
    report = {
        "tool": {"name": "halanay", "version": __version__},
        "command": command,
        "analysis": cfg.analysis,
        "scan": {"t_max": cfg.scan.t_max, "n_points": cfg.scan.n_points},
        "note": GRID_NOTE,
    }
    verdict, cert, norm_tag = _certify(cfg)
    report["verdict"] = verdict
    report["certificate"] = _cert_json(cert)
    report["norm"] = norm_tag
    code = 0 if cert is not None else 2
    if command == "certify":
        return report, code
    if command == "simulate":
        _, _, sim_json = _simulate(cfg, cert, norm_tag, out_dir)
        report["simulation"] = sim_json
        return report, 0
    if command != "verify":
        raise ValueError(f"unknown command {command!r}")
    if cert is None:
        return report, 2
    traj, _, sim_json = _simulate(cfg, cert, norm_tag, out_dir)
    report["simulation"] = sim_json
    chk = check_envelope(
        traj, norm_tag, _envelope_fn(cfg, cert, norm_tag), cfg.tolerance
    )
    report["envelope_check"] = {
        "max_ratio": chk.max_ratio,
        "first_violation_t": chk.first_violation_t,
        "tolerance": chk.tolerance,
        "passed": chk.passed,
    }
    return report, 0 if chk.passed else 2


def _summary_lines(report):
    lines = []
    verdict = report.get("verdict", {})
    tag = verdict.get("case_tag")
    if "feasible" in verdict:
        lines.append(f"lmi feasibility: {verdict['feasible']} "
                     f"(worst eigenvalue {verdict['worst_eigen']:.6g} "
                     f"at t={verdict['worst_t']:.6g})")
    elif tag is not None:
        lines.append(f"condition class: {tag}")
    else:
        lines.append(
            f"column-sum conditions: ratio={verdict.get('theorem_33_ok')} "
            f"gap={verdict.get('remark_34_ok')}"
        )
    cert = report.get("certificate")
    if cert:
        lines.append(
            f"certificate: lambda*={cert['lambda_star']:.8g} "
            f"w0={cert['w0']:.8g} M={cert['M']:.8g} ({cert['case_tag']})"
        )
    else:
        lines.append("no certificate")
    chk = report.get("envelope_check")
    if chk:
        lines.append(
            f"envelope check: max_ratio={chk['max_ratio']:.6g} "
            f"passed={chk['passed']}"
        )
    sim = report.get("simulation")
    if sim:
        lines.append(f"trajectory: {sim['csv_path']} ({sim['nodes']} nodes)")
    return lines


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="halanay-certify",
        description=(
            "Decay certificates and direct simulation for fractional-order "
            "delay systems. Set HALANAY_THREADS to parallelize grid scans."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("certify", "run the configured analysis and write a JSON report"),
        ("simulate", "integrate the system and write a CSV trajectory"),
        ("verify", "certify, simulate, and check the envelope"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
    p_mlf = sub.add_parser("mlf", help="evaluate E_{alpha,beta}(x)")
    p_mlf.add_argument("alpha", type=float)
    p_mlf.add_argument("beta", type=float)
    p_mlf.add_argument("x", type=float)
    args = parser.parse_args(argv)

    try:
        if args.command == "mlf":
            print(repr(ml(args.x, args.alpha, args.beta)))
            return 0
        cfg = load_config(args.config)
        report, code = run(args.command, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (StructureError, VerdictNoneError, InfeasiblePointError) as exc:
        print(f"not certifiable: {exc}", file=sys.stderr)
        return 2
    except (
        ExprEvalError,
        StepSizeError,
        MlfDomainError,
        MlfOverflowError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HalanayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report_path = os.path.join(args.out, cfg.report_path)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    for line in _summary_lines(report):
        print(line)
    print(f"note: {GRID_NOTE}", file=sys.stderr)
    print(f"report: {report_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
