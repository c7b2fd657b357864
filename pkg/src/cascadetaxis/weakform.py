"""Weak-solution criteria evaluated on computed trajectories, and the epsilon ladder.

All space-time integrals use cell-centre quadrature in space and the
trapezoid rule over the snapshot times.  Spatial gradients of the discrete
fields are face differences averaged back to cell centres; gradients of test
functions are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import Grid
from .model import InitialData, ModelConfig, ModelError, ResupplySpec, f_eval, f_prime, resupply_field
from .stepper import Trajectory, run


def bump(s):
    """``exp(-1 / (1 - s^2))`` on ``|s| < 1``, zero outside; returns value and derivative."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    val = np.zeros_like(s)
    der = np.zeros_like(s)
    q = 1.0 - s[inside] ** 2
    val[inside] = np.exp(-1.0 / q)
    der[inside] = val[inside] * (-2.0 * s[inside] / q**2)
    return val, der


@dataclass(frozen=True)
class TestFunction:
    """Tensor-product bump ``A b((x-cx)/rx) b((y-cy)/ry) b((t-ct)/rt)``."""

    __test__ = False  # not a pytest class

    center: tuple[float, float, float]
    radii: tuple[float, float, float]
    amplitude: float = 1.0

    def __post_init__(self):
        if min(self.radii) <= 0:
            raise ValueError("radii must be positive")

    @property
    def nonneg(self) -> bool:
        return self.amplitude >= 0

    @property
    def t_support(self) -> tuple[float, float]:
        ct, rt = self.center[2], self.radii[2]
        return ct - rt, ct + rt

    def scaled(self, alpha: float) -> TestFunction:
        return replace(self, amplitude=self.amplitude * alpha)

    def evaluate(self, grid: Grid, t: float):
        """Return ``(phi, phi_t, phi_x, phi_y)`` at the cell centres and time ``t``."""
        X, Y = grid.centers
        (cx, cy, ct), (rx, ry, rt) = self.center, self.radii
        bx, dbx = bump((X - cx) / rx)
        by, dby = bump((Y - cy) / ry)
        bt, dbt = bump(np.array((t - ct) / rt))
        a = self.amplitude
        space = bx * by
        phi = a * space * bt
        return phi, a * space * dbt / rt, a * dbx / rx * by * bt, a * bx * dby / ry * bt


class TestSum:
    """Linear combination of test functions, evaluated termwise."""

    __test__ = False

    def __init__(self, terms: Sequence[tuple[float, TestFunction]]):
        self.terms = list(terms)

    @property
    def t_support(self):
        sup = [p.t_support for _, p in self.terms]
        return min(s[0] for s in sup), max(s[1] for s in sup)

    def evaluate(self, grid, t):
        parts = [np.asarray(p.evaluate(grid, t)) * c for c, p in self.terms]
        return tuple(sum(x[i] for x in parts) for i in range(4))


def random_bumps(grid: Grid, t_final: float, n: int, seed: int, amplitude: float = 1.0) -> list[TestFunction]:
    """Seeded nonnegative bumps inside the domain; about half reach back to ``t = 0``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        rx = rng.uniform(0.15, 0.35) * grid.lx
        ry = rng.uniform(0.15, 0.35) * grid.ly
        cx = rng.uniform(rx, grid.lx - rx)
        cy = rng.uniform(ry, grid.ly - ry)
        rt = rng.uniform(0.2, 0.45) * t_final
        ct = rng.uniform(-0.5 * rt, t_final - rt)
        out.append(TestFunction((cx, cy, ct), (rx, ry, rt), amplitude * rng.uniform(0.5, 1.5)))
    return out


def _check_support(traj: Trajectory, phi) -> None:
    t_end = traj.snapshots[-1].t
    if phi.t_support[1] > t_end * (1 + 1e-12):
        raise ValueError(
            f"test function support ends at t={phi.t_support[1]:.6g}, beyond the trajectory end {t_end:.6g}"
        )


def _dot(ax, ay, bx, by):
    return ax * bx + ay * by


@dataclass
class WeakTerms:
    """Individual integrals of one weak identity; ``residual`` is LHS - RHS."""

    lhs: float
    rhs: float
    terms: dict = field(default_factory=dict)
    # sum of the integrals of |integrand|; robust to cancellation inside a term
    magnitude: float = 0.0

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.magnitude if self.magnitude > 0 else 0.0


def _integrals(integ, integrands) -> np.ndarray:
    """Signed and absolute spatial integrals, shape ``(2, k)``."""
    return np.array([[integ(f) for f in integrands], [integ(np.abs(f)) for f in integrands]])


def _time_integrals(traj: Trajectory, parts, k: int) -> tuple[np.ndarray, np.ndarray]:
    vals = np.array([parts(s) for s in traj.snapshots])
    if len(vals) < 2:
        return np.zeros(k), np.zeros(k)
    acc = np.trapezoid(vals, traj.times, axis=0)
    return acc[0], acc[1]


def weak_terms_u(traj: Trajectory, phi, cfg: ModelConfig) -> WeakTerms:
    _check_support(traj, phi)
    s0 = traj.initial
    grid = s0.grid
    integ = grid.integrate

    def parts(s):
        p, pt, px, py = phi.evaluate(grid, s.t)
        ux, uy = grid.center_gradient(s.u)
        wx, wy = grid.center_gradient(s.w)
        mob = cfg.chi_u * s.u * f_prime(s.u, cfg)
        return _integrals(integ, [s.u * pt, _dot(ux, uy, px, py), mob * _dot(wx, wy, px, py)])

    acc, mag = _time_integrals(traj, parts, 3)
    p0 = phi.evaluate(grid, s0.t)[0]
    init = integ(s0.u * p0)
    T = {"u_phi_t": -acc[0], "u0_phi0": -init, "grad_u_grad_phi": -acc[1], "taxis": acc[2]}
    return WeakTerms(lhs=-acc[0] - init, rhs=-acc[1] + acc[2], terms=T, magnitude=mag.sum() + integ(np.abs(s0.u * p0)))


def weak_residual_u(traj: Trajectory, phi, cfg: ModelConfig) -> float:
    """LHS - RHS of the forager identity tested against ``phi``."""
    return weak_terms_u(traj, phi, cfg).residual


def weak_terms_w(traj: Trajectory, phi, cfg: ModelConfig, spec: ResupplySpec) -> WeakTerms:
    _check_support(traj, phi)
    s0 = traj.initial
    grid = s0.grid
    integ = grid.integrate
    k = cfg.kinetics

    def parts(s):
        p, pt, px, py = phi.evaluate(grid, s.t)
        wx, wy = grid.center_gradient(s.w)
        uptake = (f_eval(s.u, cfg) + f_eval(s.v, cfg)) * s.w
        r = resupply_field(spec, grid, s.t)
        return _integrals(integ, [s.w * pt, _dot(wx, wy, px, py), -k * uptake * p, -k * s.w * p, k * r * p])

    acc, mag = _time_integrals(traj, parts, 5)
    p0 = phi.evaluate(grid, s0.t)[0]
    init = integ(s0.w * p0)
    T = {
        "w_phi_t": -acc[0],
        "w0_phi0": -init,
        "grad_w_grad_phi": -acc[1],
        "uptake": acc[2],
        "decay": acc[3],
        "resupply": acc[4],
    }
    return WeakTerms(
        lhs=-acc[0] - init, rhs=-acc[1] + acc[2] + acc[3] + acc[4], terms=T, magnitude=mag.sum() + integ(np.abs(s0.w * p0))
    )


def weak_residual_w(traj: Trajectory, phi, cfg: ModelConfig, spec: ResupplySpec) -> float:
    """LHS - RHS of the nutrient identity tested against ``phi``."""
    return weak_terms_w(traj, phi, cfg, spec).residual


def weak_terms_v(traj: Trajectory, psi, cfg: ModelConfig) -> WeakTerms:
    _check_support(traj, psi)
    if not getattr(psi, "nonneg", True):
        raise ValueError("the scrounger inequality needs a nonnegative test function")
    s0 = traj.initial
    grid = s0.grid
    integ = grid.integrate
    k = cfg.kinetics

    def parts(s):
        p, pt, px, py = psi.evaluate(grid, s.t)
        if np.any(p < 0):
            raise ValueError("test function has negative samples")
        L = np.log1p(s.v)
        lx, ly = grid.center_gradient(L)
        ux, uy = grid.center_gradient(s.u)
        frac = cfg.chi_v * s.v / (s.v + 1.0)
        return _integrals(
            integ,
            [
                L * pt,
                _dot(lx, ly, lx, ly) * p,
                _dot(lx, ly, px, py),
                frac * _dot(ux, uy, lx, ly) * p,
                frac * _dot(ux, uy, px, py),
                k * (s.v - s.v**cfg.beta) / (s.v + 1.0) * p,
            ],
        )

    acc, mag = _time_integrals(traj, parts, 6)
    p0 = psi.evaluate(grid, s0.t)[0]
    init = integ(np.log1p(s0.v) * p0)
    T = {
        "L_psi_t": -acc[0],
        "L0_psi0": -init,
        "grad_L_sq": acc[1],
        "grad_L_grad_psi": -acc[2],
        "taxis_L": -acc[3],
        "taxis_psi": acc[4],
        "logistic": acc[5],
    }
    return WeakTerms(
        lhs=-acc[0] - init,
        rhs=acc[1] - acc[2] - acc[3] + acc[4] + acc[5],
        terms=T,
        magnitude=mag.sum() + integ(np.abs(np.log1p(s0.v) * p0)),
    )


def weak_slack_v(traj: Trajectory, psi, cfg: ModelConfig) -> float:
    """LHS - RHS of the scrounger entropy inequality; should be >= -allowance."""
    return weak_terms_v(traj, psi, cfg).residual


def uniform_oracle(data: InitialData) -> InitialData:
    """Spatially uniform data with the same means as ``data``."""
    g = data.grid
    return InitialData(g, *(g.constant(g.integrate(f) / g.area) for f in (data.u0, data.v0, data.w0)))


def calibrated_slack_tol(uniform_traj: Trajectory, bumps: Sequence, cfg: ModelConfig, factor: float = 3.0) -> float:
    """Allowance for the scrounger inequality: ``factor`` times the largest
    ``|slack|`` seen on the uniform-state trajectory, where the exact slack is 0.
    """
    if not bumps:
        return 0.0
    return factor * max(abs(weak_slack_v(uniform_traj, b, cfg)) for b in bumps)


@dataclass
class VMassReport:
    passed: bool
    worst: float
    t_worst: float
    margin: np.ndarray
    tol: float


def v_mass_inequality(series, tol: float = 0.0) -> VMassReport:
    """``int v(t) <= int v0 + int_0^t int (v - v^beta) + tol`` at every recorded time.

    ``series`` is a diagnostics column mapping (``t``, ``mass_v``, ``v_beta``).
    """
    t = np.asarray(series["t"], dtype=float)
    m = np.asarray(series["mass_v"], dtype=float)
    src = m - np.asarray(series["v_beta"], dtype=float)
    cum = np.zeros_like(m)
    cum[1:] = np.cumsum(0.5 * (src[1:] + src[:-1]) * np.diff(t))
    margin = m[0] + cum + tol - m
    k = int(np.argmin(margin))
    return VMassReport(bool(margin[k] >= 0), float(margin[k] - tol), float(t[k]), margin, tol)


# -- epsilon ladder ---------------------------------------------------------------


@dataclass
class EpsLadder:
    eps_values: Sequence[float]
    data: InitialData
    spec: ResupplySpec
    cfg: ModelConfig
    snapshot_times: Sequence[float] | None = None

    def __post_init__(self):
        e = np.asarray(self.eps_values, dtype=float)
        if self.cfg.beta != 2:
            raise ModelError("the epsilon ladder is defined for beta = 2")
        if np.any(e <= 0):
            raise ModelError("ladder values must be positive")
        if np.any(np.diff(e) > 0):
            raise ModelError("ladder values must be non-increasing")
        if self.snapshot_times is None:
            n = max(1, int(round(self.cfg.t_final / 0.05)))
            self.snapshot_times = list(np.linspace(0.0, self.cfg.t_final, n + 1)[1:])


@dataclass
class EpsRefinement:
    eps: list[float]
    distances: list[dict]
    failures: dict
    cauchy: bool


def l2_distance(a: Trajectory, b: Trajectory, name: str) -> float:
    """Space-time L2 distance of one component over the shared snapshot times."""
    ta, tb = a.times, b.times
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("trajectories must share snapshot times")
    grid = a.initial.grid
    sq = np.array([grid.integrate((getattr(x, name) - getattr(y, name)) ** 2) for x, y in zip(a.snapshots, b.snapshots)])
    return float(np.sqrt(np.trapezoid(sq, ta)))


def eps_refinement(ladder: EpsLadder) -> EpsRefinement:
    """Run the regularised system for each epsilon and tabulate consecutive distances."""
    trajs = {}
    failures = {}
    for e in ladder.eps_values:
        cfg = replace(ladder.cfg, epsilon=float(e))
        tr = run(ladder.data, cfg, ladder.spec, snapshot_stride=None, snapshot_times=ladder.snapshot_times, record=False)
        if tr.aborted is not None:
            failures[float(e)] = str(tr.aborted)
        else:
            trajs[float(e)] = tr
    rows = []
    eps = [float(e) for e in ladder.eps_values]
    for e1, e2 in zip(eps, eps[1:]):
        if e1 in trajs and e2 in trajs:
            a, b = trajs[e1], trajs[e2]
            rows.append({"eps_a": e1, "eps_b": e2, **{n: l2_distance(a, b, n) for n in ("u", "v", "w")}})
    cauchy = all(
        all(r2[n] <= r1[n] * (1 + 1e-12) + 1e-300 for n in ("u", "v", "w")) for r1, r2 in zip(rows, rows[1:])
    )
    return EpsRefinement(eps, rows, failures, cauchy)


__all__ = [
    "EpsLadder",
    "EpsRefinement",
    "TestFunction",
    "TestSum",
    "WeakTerms",
    "calibrated_slack_tol",
    "eps_refinement",
    "l2_distance",
    "random_bumps",
    "uniform_oracle",
    "v_mass_inequality",
    "weak_residual_u",
    "weak_residual_w",
    "weak_slack_v",
    "weak_terms_u",
    "weak_terms_v",
    "weak_terms_w",
]
