"""Command-line entry point: ``validate``, ``run``, ``audit``, ``weak`` and ``sweep``.

Exit status: 0 when every check passes, 1 when a check fails or a run
aborts, 2 for unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, emit, load
from .diagnostics import (
    GronwallInputs,
    as_series,
    audit_inequality,
    bisect_constant,
    boundedness_monitor,
    check_mass_conservation,
    check_w_bound,
    gronwall_check,
    windowed,
)
from .model import validate_initial_data, validate_resupply
from .stepper import run as run_trajectory
from .weakform import (
    EpsLadder,
    calibrated_slack_tol,
    eps_refinement,
    random_bumps,
    uniform_oracle,
    v_mass_inequality,
    weak_terms_u,
    weak_terms_v,
    weak_terms_w,
)

log = logging.getLogger("cascadetaxis")

OK, FAILED, BAD_INPUT = 0, 1, 2


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    d = Path(override or cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load(path: str) -> RunConfig | None:
    try:
        return load(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


# -- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return BAD_INPUT
    grid = cfg.grid()
    rep = validate_initial_data(cfg.initial_data(grid))
    res = validate_resupply(cfg.resupply_spec(grid), grid, window=1.0, t_end=cfg.time.t_final)
    print(f"grid: {grid.nx} x {grid.ny}, h = {grid.h:.6g}")
    m = cfg.model
    print(f"model: beta = {m.beta:g}, epsilon = {m.epsilon:g}")
    for name, s in rep.summary.items():
        print(f"{name}: min {s.min:.6g}  max {s.max:.6g}  integral {s.integral:.6g}")
    print(f"resupply: r_star {res.r_star:.6g}  windowed gradroot sup {res.windowed_gradroot_sup:.6g}")
    for msg in rep.violations + res.messages:
        print(f"violation: {msg}")
    ok = rep.ok and res.admissible
    print("admissible" if ok else "NOT admissible")
    return OK if ok else FAILED


# -- run ----------------------------------------------------------------------


def _write_snapshots(run_dir: Path, snapshots) -> list[dict]:
    snap_dir = run_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    entries = []
    for k, s in enumerate(snapshots):
        for name in ("u", "v", "w"):
            fname = f"snap_{k:05d}_{name}.bin"
            io.write_snapshot(snap_dir / fname, name, getattr(s, name), s.t)
            entries.append({"file": f"snapshots/{fname}", "field": name, "index": k, "t": s.t})
    return entries


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return BAD_INPUT
    run_dir = _out_dir(cfg, args.out)
    grid = cfg.grid()
    mcfg = cfg.model_config()
    data = cfg.initial_data(grid)
    spec = cfg.resupply_spec(grid)
    stride = cfg.output.snapshot_stride or None
    traj = run_trajectory(data, mcfg, spec, snapshot_stride=stride)

    (run_dir / "config.ini").write_text(emit(cfg))
    if "csv" in cfg.output.formats:
        io.write_diagnostics(run_dir / io.DIAGNOSTICS, traj.records)
    if "snapshots" in cfg.output.formats:
        io.write_manifest(run_dir, _write_snapshots(run_dir, traj.snapshots))

    series = as_series(traj.records)
    w0_sup = float(np.max(data.w0))
    report = {
        "status": "aborted" if traj.aborted else "completed",
        "t_final": cfg.time.t_final,
        "t_reached": traj.final.t,
        "steps": len(traj.reports),
        "clipped_cells": int(sum(r.clipped_cells for r in traj.reports)),
        "max_clip": max((r.max_clip for r in traj.reports), default=0.0),
        "w0_sup": w0_sup,
        "r_star": spec.r_star,
        "lambda": mcfg.combined_weight,
        "beta": mcfg.beta,
        "epsilon": mcfg.epsilon,
        "area": grid.area,
        "mass": check_mass_conservation(series, cfg.audit.mass_tol),
        "w_bound": check_w_bound(series, w0_sup, spec.r_star, cfg.audit.w_tol),
    }
    if traj.aborted is not None:
        report["abort"] = {"invariant": traj.aborted.invariant, "t": traj.aborted.t, "message": str(traj.aborted)}
    if len(series["t"]) >= 2:
        report["monitor"] = boundedness_monitor(series)
    io.write_json(run_dir / "run_report.json", report)

    print(f"{report['status']}: t = {traj.final.t:.6g} after {report['steps']} steps; outputs in {run_dir}")
    if traj.aborted is not None:
        print(f"abort ({traj.aborted.invariant}): {traj.aborted}", file=sys.stderr)
        return FAILED
    return OK


# -- audit --------------------------------------------------------------------

AUDIT_COLUMNS = ("t", "mass_u", "sup_w", "grad_w_sq", "lap_w_sq", "dirichlet_u", "entropy_u", "combined_y", "v_sq", "gradroot_r")


def cmd_audit(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        series = io.read_diagnostics(run_dir / io.DIAGNOSTICS)
        io.require_columns(series, AUDIT_COLUMNS)
        meta = io.read_json(run_dir / "run_report.json")
        cfg = load(run_dir / "config.ini")
    except (OSError, io.FormatError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT

    a = cfg.audit
    C = a.C if args.C is None else args.C
    delta = a.delta if args.delta is None else args.delta
    lam = meta["lambda"] if args.lam is None else args.lam
    M_default = a.M if a.M is not None else meta["w0_sup"] + meta["r_star"]
    M = M_default if args.M is None else args.M

    report: dict = {"constants": {"C": C, "M": M, "delta": delta, "lambda": lam}}
    report["mass"] = check_mass_conservation(series, a.mass_tol)
    # M plays the role of the sup bound on w
    report["w_bound"] = check_w_bound(series, M, 0.0, a.w_tol)

    passed = report["mass"].passed and report["w_bound"].passed
    n = len(series["t"])
    if n >= 3:
        for which in ("lemma31", "lemma32"):
            kw = {"M": M, "delta": delta, "lam": lam}
            rep = audit_inequality(series, which, C, **kw)
            entry = {
                "fraction_ok": rep.fraction_ok,
                "worst": rep.worst,
                "t_worst": rep.t_worst,
                "passed": rep.fraction_ok >= a.fraction,
            }
            if args.bisect_C:
                entry["bisected_C"] = bisect_constant(series, which, fraction=a.fraction, **kw)
                entry["bisect_found"] = entry["bisected_C"] is not None
                passed = passed and entry["bisect_found"]
            else:
                passed = passed and entry["passed"]
            report[which] = entry

        t = series["t"]
        y = series["combined_y"]
        z = C * series["v_sq"] + 2.0 * series["gradroot_r"] + C
        T = t[-1] - t[0]
        theta = min(1.0, T / 2.0)
        b = float(windowed(t, y, theta).values.max())
        c = float(windowed(t, z, theta).values.max())
        g = gronwall_check(GronwallInputs(t, y, z, a.gronwall_a, b, c), slack=a.gronwall_slack)
        report["gronwall"] = {**asdict(g), "a": a.gronwall_a, "b": b, "c": c}
        passed = passed and (g.conclusion_holds or not g.hypotheses_hold)
    else:
        report["note"] = "fewer than three samples; inequality audits skipped"
    report["passed"] = passed
    io.write_json(run_dir / "audit_report.json", report)

    print(f"mass conservation: {'pass' if report['mass'].passed else 'FAIL'} (drift {report['mass'].worst:.3e})")
    wb = report["w_bound"]
    print(f"w bound (M = {M:.6g}): {'pass' if wb.passed else 'FAIL'} (sup w {wb.worst:.10g})")
    for which in ("lemma31", "lemma32"):
        if which in report:
            e = report[which]
            extra = f", bisected C = {e['bisected_C']}" if "bisected_C" in e else ""
            print(f"{which}: fraction ok {e['fraction_ok']:.4f}, worst residual {e['worst']:.3e}{extra}")
    if "gronwall" in report:
        gr = report["gronwall"]
        print(f"gronwall: hypotheses {gr['hypotheses_hold']}, conclusion {gr['conclusion_holds']}")
    print("audit passed" if passed else "audit FAILED")
    return OK if passed else FAILED


# -- weak ---------------------------------------------------------------------


def weak_study(cfg: RunConfig, n: int, seed: int) -> dict:
    """Weak-form residuals and slacks over ``n`` seeded bumps plus the v-mass check."""
    grid = cfg.grid()
    mcfg = cfg.model_config()
    data = cfg.initial_data(grid)
    spec = cfg.resupply_spec(grid)
    traj = run_trajectory(data, mcfg, spec, snapshot_stride=1)
    if traj.aborted is not None:
        raise RuntimeError(f"run aborted: {traj.aborted}")
    vm = v_mass_inequality(as_series(traj.records))
    out = {"n": n, "seed": seed, "v_mass": {"passed": vm.passed, "worst": vm.worst, "t_worst": vm.t_worst}}
    bumps = random_bumps(grid, mcfg.t_final, n, seed)
    if not bumps:
        out["bumps"] = []
        out["passed"] = vm.passed
        return out
    uniform = run_trajectory(uniform_oracle(data), mcfg, spec, snapshot_stride=1, record=False)
    tol = calibrated_slack_tol(uniform, bumps, mcfg, cfg.audit.slack_factor)
    rows = []
    for b in bumps:
        tu, tw, tv = weak_terms_u(traj, b, mcfg), weak_terms_w(traj, b, mcfg, spec), weak_terms_v(traj, b, mcfg)
        rows.append(
            {
                "center": b.center,
                "radii": b.radii,
                "amplitude": b.amplitude,
                "residual_u": tu.residual,
                "relative_u": tu.relative,
                "residual_w": tw.residual,
                "relative_w": tw.relative,
                "slack_v": tv.residual,
                "u_ok": tu.relative <= cfg.audit.weak_rel_tol,
                "w_ok": tw.relative <= cfg.audit.weak_rel_tol,
                "slack_ok": tv.residual >= -tol,
            }
        )
    out["slack_tol"] = tol
    out["bumps"] = rows
    out["passed"] = vm.passed and all(r["u_ok"] and r["w_ok"] and r["slack_ok"] for r in rows)
    return out


def cmd_weak(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return BAD_INPUT
    if cfg.model.beta != 2:
        print("error: the weak-solution criteria apply to beta = 2", file=sys.stderr)
        return BAD_INPUT
    if args.n < 0:
        print("error: --n must be nonnegative", file=sys.stderr)
        return BAD_INPUT
    try:
        report = weak_study(cfg, args.n, args.seed)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    io.write_json(_out_dir(cfg, args.out) / "weak_report.json", report)
    print(f"v-mass inequality: {'pass' if report['v_mass']['passed'] else 'FAIL'}")
    for k, r in enumerate(report["bumps"]):
        print(
            f"bump {k}: res_u {r['residual_u']:+.3e}  res_w {r['residual_w']:+.3e}  "
            f"slack_v {r['slack_v']:+.3e}  {'ok' if r['u_ok'] and r['w_ok'] and r['slack_ok'] else 'FAIL'}"
        )
    if report["bumps"]:
        print(f"slack tolerance {report['slack_tol']:.3e}")
    print("weak criteria passed" if report["passed"] else "weak criteria FAILED")
    return OK if report["passed"] else FAILED


# -- sweep --------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return BAD_INPUT
    try:
        eps = [float(x) for x in args.eps.split(",") if x.strip()]
    except ValueError:
        print(f"error: cannot parse --eps {args.eps!r}", file=sys.stderr)
        return BAD_INPUT
    if not eps:
        print("error: --eps needs at least one value", file=sys.stderr)
        return BAD_INPUT
    try:
        mcfg = replace(cfg.model_config(), epsilon=eps[0])
        grid = cfg.grid()
        ladder = EpsLadder(eps, cfg.initial_data(grid), cfg.resupply_spec(grid), mcfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    res = eps_refinement(ladder)
    out = _out_dir(cfg, args.out)
    with open(out / "sweep.csv", "w") as fh:
        fh.write("eps_a,eps_b,u,v,w\n")
        for r in res.distances:
            fh.write(",".join(repr(float(r[k])) for k in ("eps_a", "eps_b", "u", "v", "w")) + "\n")
    io.write_json(out / "sweep_report.json", {"eps": res.eps, "cauchy": res.cauchy, "failures": res.failures, "distances": res.distances})
    for r in res.distances:
        print(f"{r['eps_a']:g} -> {r['eps_b']:g}: u {r['u']:.4e}  v {r['v']:.4e}  w {r['w']:.4e}")
    for e, msg in res.failures.items():
        print(f"epsilon {e:g} failed: {msg}", file=sys.stderr)
    print(f"non-increasing distances: {res.cauchy}")
    return OK if res.cauchy and not res.failures else FAILED


# -- entry --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cascadetaxis", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a config and its initial and resupply data")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("run", help="integrate a config and write diagnostics, snapshots and a report")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides [output] directory)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("audit", help="audit a completed run directory")
    s.add_argument("run_dir")
    s.add_argument("--bisect-C", action="store_true", help="search for the smallest feasible C")
    s.add_argument("--C", type=float)
    s.add_argument("--M", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--lambda", dest="lam", type=float)
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("weak", help="weak-solution criteria over random bumps (beta = 2)")
    s.add_argument("config")
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_weak)

    s = sub.add_parser("sweep", help="epsilon-refinement study (beta = 2)")
    s.add_argument("config")
    s.add_argument("--eps", required=True, help="comma-separated non-increasing epsilon values")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
