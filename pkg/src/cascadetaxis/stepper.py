"""First-order IMEX time stepping for the regularised cascaded-taxis system.

Per step: explicit upwind taxis, implicit (backward Euler) diffusion, then a
pointwise Patankar-type reaction update that keeps every field nonnegative.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import FluxField, Grid
from .model import InitialData, ModelConfig, ResupplySpec, f_eval, f_prime, resupply_field

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The linear solver failed to reach its tolerance."""


class StepAbort(RuntimeError):
    """A step violated an invariant; ``invariant`` names which one."""

    def __init__(self, message: str, invariant: str, t: float):
        super().__init__(message)
        self.invariant = invariant
        self.t = t


@dataclass(frozen=True)
class SimState:
    grid: Grid
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def from_data(cls, data: InitialData, t: float = 0.0) -> SimState:
        g = data.grid
        return cls(g, t, g.field(data.u0, "u0"), g.field(data.v0, "v0"), g.field(data.w0, "w0"))


@dataclass
class StepReport:
    t: float
    dt_used: float
    solver_iters_u: int
    solver_iters_v: int
    solver_iters_w: int
    min_u: float
    min_v: float
    min_w: float
    clipped_cells: int
    max_clip: float


# -- linear algebra ---------------------------------------------------------


def conjugate_gradient(matvec, b, x0, tol, max_iter):
    """Plain CG for a symmetric positive definite operator.

    Stops when ``||b - A x|| <= tol * ||b||``.  Returns ``(x, iterations, relres)``.
    """
    x = x0.copy()
    r = b - matvec(x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    rr = r @ r
    target = (tol * bnorm) ** 2
    if rr <= target:
        return x, 0, np.sqrt(rr) / bnorm
    p = r.copy()
    for k in range(1, max_iter + 1):
        ap = matvec(p)
        alpha = rr / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        rr_new = r @ r
        if rr_new <= target:
            return x, k, np.sqrt(rr_new) / bnorm
        p *= rr_new / rr
        p += r
        rr = rr_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations (relative residual {np.sqrt(rr) / bnorm:.3e})"
    )


def solve_helmholtz(
    grid: Grid, rhs: np.ndarray, coeff: float, tol: float = 1e-10, max_iter: int = 2000
) -> tuple[np.ndarray, int]:
    """Solve ``(I - coeff * laplacian_neumann) x = rhs`` by conjugate gradients.

    The iteration starts from ``rhs`` so the initial residual has zero mean
    and every Krylov update keeps ``integrate(x) == integrate(rhs)``; a final
    constant shift removes the rounding drift.
    """
    if not coeff > 0:
        raise ValueError("coeff must be positive")
    b = rhs.ravel()
    lap = grid.laplacian_matrix

    def matvec(x):
        return x - coeff * (lap @ x)

    x, iters, _ = conjugate_gradient(matvec, b, b, tol, max_iter)
    x += b.mean() - x.mean()
    return x.reshape(grid.shape), iters


# -- stepping ---------------------------------------------------------------


def _taxis_velocities(state: SimState, cfg: ModelConfig) -> tuple[FluxField, FluxField]:
    grid = state.grid
    vel_u = grid.face_average(f_prime(state.u, cfg)) * grid.face_gradient(state.w) * cfg.chi_u
    vel_v = grid.face_gradient(state.u) * cfg.chi_v
    return vel_u, vel_v


def adapt_dt(state: SimState, cfg: ModelConfig) -> float:
    """Largest admissible step: ``dt_init`` capped by advective and reaction limits."""
    vel_u, vel_v = _taxis_velocities(state, cfg)
    speed = max(vel_u.abs_max(), vel_v.abs_max())
    dt = cfg.dt_init
    if speed > 0:
        dt = min(dt, cfg.cfl_advect * state.grid.h / speed)
    if cfg.kinetics > 0:
        vmax = float(np.max(state.v))
        dt = min(dt, cfg.cfl_react / (cfg.kinetics * max(1.0, vmax ** (cfg.beta - 1))))
    if not dt >= cfg.dt_min:
        raise StepAbort(
            f"time step {dt:.3e} fell below the floor {cfg.dt_min:.1e} at t={state.t:.6g}",
            "dt_floor",
            state.t,
        )
    return dt


def _clip(name: str, f: np.ndarray, cfg: ModelConfig, t: float) -> tuple[np.ndarray, int, float, float]:
    if not np.all(np.isfinite(f)):
        raise StepAbort(f"{name} became non-finite at t={t:.6g}", "finite", t)
    fmin = float(f.min())
    if fmin >= 0:
        return f, 0, 0.0, fmin
    scale = max(float(np.abs(f).max()), np.finfo(float).tiny)
    rel = -fmin / scale
    if rel > cfg.clip_tol:
        raise StepAbort(
            f"{name} undershoot {fmin:.3e} (relative {rel:.1e}) exceeds the clip tolerance at t={t:.6g}",
            "nonnegativity",
            t,
        )
    neg = f < 0
    return np.where(neg, 0.0, f), int(neg.sum()), rel, fmin


def step(
    state: SimState, cfg: ModelConfig, spec: ResupplySpec, dt: float | None = None
) -> tuple[SimState, StepReport]:
    """Advance ``state`` by one IMEX step of size ``dt`` (chosen by :func:`adapt_dt` if omitted)."""
    if dt is None:
        dt = adapt_dt(state, cfg)
    grid = state.grid
    t_new = state.t + dt
    u, v, w = state.u, state.v, state.w
    vel_u, vel_v = _taxis_velocities(state, cfg)
    tol, maxit = cfg.solver_tol, cfg.solver_max_iter

    def diffuse(f):
        try:
            return solve_helmholtz(grid, f, dt, tol, maxit)
        except SolverError as exc:
            raise StepAbort(str(exc), "solver", state.t) from exc

    # forager: taxis up the nutrient gradient, then diffusion; mass is conserved
    u_star = u - dt * grid.flux_divergence(grid.upwind_advective_flux(u, vel_u))
    u_new, it_u = diffuse(u_star)
    u_new, nu, cu, _ = _clip("u", u_new, cfg, t_new)

    # scrounger: taxis up the forager gradient, diffusion, logistic source
    v_star = v - dt * grid.flux_divergence(grid.upwind_advective_flux(v, vel_v))
    v_diff, it_v = diffuse(v_star)
    v_diff, nv, cv, _ = _clip("v", v_diff, cfg, t_new)
    k = cfg.kinetics
    v_new = (v_diff + dt * k * v_diff) / (1.0 + dt * k * v_diff ** (cfg.beta - 1))

    # nutrient: diffusion, then semi-implicit uptake/decay with resupply
    w_diff, it_w = diffuse(w)
    w_diff, nw, cw, _ = _clip("w", w_diff, cfg, t_new)
    r = resupply_field(spec, grid, t_new)
    sink = f_eval(u_new, cfg) + f_eval(v_new, cfg) + 1.0
    w_new = (w_diff + dt * k * r) / (1.0 + dt * k * sink)

    for name, f in (("v", v_new), ("w", w_new)):
        if not np.all(np.isfinite(f)):
            raise StepAbort(f"{name} became non-finite at t={t_new:.6g}", "finite", t_new)

    new = SimState(grid, t_new, u_new, v_new, w_new)
    report = StepReport(
        t=t_new,
        dt_used=dt,
        solver_iters_u=it_u,
        solver_iters_v=it_v,
        solver_iters_w=it_w,
        min_u=float(u_new.min()),
        min_v=float(v_new.min()),
        min_w=float(w_new.min()),
        clipped_cells=nu + nv + nw,
        max_clip=max(cu, cv, cw),
    )
    return new, report


# -- driver -----------------------------------------------------------------


@dataclass
class Trajectory:
    snapshots: list[SimState] = field(default_factory=list)
    records: list = field(default_factory=list)
    reports: list[StepReport] = field(default_factory=list)
    final: SimState | None = None
    aborted: StepAbort | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def initial(self) -> SimState:
        return self.snapshots[0]


def run(
    data: InitialData | SimState,
    cfg: ModelConfig,
    spec: ResupplySpec,
    snapshot_stride: int | None = 1,
    snapshot_times: Sequence[float] | None = None,
    record: bool = True,
    on_step=None,
) -> Trajectory:
    """Integrate from ``t = 0`` to ``cfg.t_final``.

    Snapshots are taken every ``snapshot_stride`` steps (``None`` disables)
    and at each of ``snapshot_times``, which the step size is adjusted to hit
    exactly.  The initial and final states are always kept.  A step abort
    stops the run; the partial trajectory carries the exception in
    ``aborted``.
    """
    from .diagnostics import record as make_record

    state = data if isinstance(data, SimState) else SimState.from_data(data)
    t_final = cfg.t_final
    stops = sorted({float(t) for t in (snapshot_times or ()) if state.t < t < t_final} | {t_final})
    traj = Trajectory(snapshots=[state])
    if record:
        traj.records.append(make_record(state, cfg, spec, dt_used=0.0))

    n = 0
    stop_idx = 0
    eps_t = 1e-12 * max(1.0, t_final)
    while state.t < t_final - eps_t:
        target = stops[stop_idx]
        try:
            dt = adapt_dt(state, cfg)
            remaining = target - state.t
            hit = False
            if dt >= remaining - eps_t:
                dt, hit = remaining, True
            elif remaining - dt < 0.5 * dt:
                dt = 0.5 * remaining
            state, rep = step(state, cfg, spec, dt)
        except StepAbort as exc:
            log.warning("run aborted: %s", exc)
            traj.aborted = exc
            break
        if hit:
            state = replace(state, t=target)
            rep.t = target
            stop_idx += 1
        n += 1
        traj.reports.append(rep)
        if record:
            traj.records.append(make_record(state, cfg, spec, dt_used=rep.dt_used))
        if hit or (snapshot_stride and n % snapshot_stride == 0):
            traj.snapshots.append(state)
        if on_step is not None:
            on_step(state, rep)
    if traj.snapshots[-1] is not state:
        traj.snapshots.append(state)
    traj.final = state
    return traj
