"""Functionals, a-priori bound monitors, inequality audits and the Gronwall-type checker.

Time series are handled as mappings from column name to a 1-D array, so the
same functions work on in-memory records and on series read back from CSV.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .model import ModelConfig, ResupplySpec, gradroot, resupply_field

if TYPE_CHECKING:
    from .stepper import SimState

INV_E = math.exp(-1.0)

# Column order of diagnostics.csv.
CSV_COLUMNS = (
    "t",
    "mass_u",
    "mass_v",
    "sup_u",
    "sup_v",
    "sup_w",
    "grad_w_sq",
    "lap_w_sq",
    "dirichlet_u",
    "entropy_u",
    "energy_F",
    "combined_y",
    "v_beta",
    "v_sq",
    "gradroot_r",
    "dt_used",
)


@dataclass
class DiagnosticsRecord:
    t: float
    mass_u: float
    mass_v: float
    sup_u: float
    sup_v: float
    sup_w: float
    grad_w_sq: float
    lap_w_sq: float
    dirichlet_u: float
    entropy_u: float
    energy_F: float
    combined_y: float
    v_beta: float
    v_sq: float
    gradroot_r: float
    dt_used: float = 0.0
    # not written to CSV
    u_sq: float = float("nan")


def xlogx(u: np.ndarray) -> np.ndarray:
    """``u ln u`` with ``0 ln 0 = 0``."""
    out = np.zeros_like(u, dtype=float)
    pos = u > 0
    out[pos] = u[pos] * np.log(u[pos])
    return out


def record(state: SimState, cfg: ModelConfig, spec: ResupplySpec, dt_used: float = 0.0) -> DiagnosticsRecord:
    grid = state.grid
    u, v, w = state.u, state.v, state.w
    integ = grid.integrate
    ulogu = integ(xlogx(u))
    fisher_w = grid.dirichlet_quotient(w, w, cfg.w_floor)
    grad_w_sq = grid.dirichlet(w)
    entropy_u = ulogu + INV_E * grid.area
    rec = DiagnosticsRecord(
        t=state.t,
        mass_u=integ(u),
        mass_v=integ(v),
        sup_u=float(u.max()),
        sup_v=float(v.max()),
        sup_w=float(w.max()),
        grad_w_sq=grad_w_sq,
        lap_w_sq=integ(grid.laplacian_neumann(w) ** 2),
        dirichlet_u=grid.dirichlet_quotient(u, u, cfg.u_floor),
        entropy_u=entropy_u,
        energy_F=ulogu + 0.5 * fisher_w,
        combined_y=entropy_u + 0.5 * fisher_w + cfg.combined_weight * grad_w_sq,
        v_beta=integ(v**cfg.beta),
        v_sq=integ(v * v),
        gradroot_r=gradroot(grid, resupply_field(spec, grid, state.t)),
        dt_used=dt_used,
        u_sq=integ(u * u),
    )
    vals = asdict(rec)
    bad = [k for k, x in vals.items() if not math.isfinite(x)]
    if bad:
        raise FloatingPointError(f"non-finite diagnostics at t={state.t}: {', '.join(bad)}")
    return rec


def as_series(records: Sequence[DiagnosticsRecord]) -> dict[str, np.ndarray]:
    names = [f.name for f in fields(DiagnosticsRecord)]
    return {n: np.array([getattr(r, n) for r in records], dtype=float) for n in names}


# -- simple checks -------------------------------------------------------------


@dataclass
class CheckReport:
    passed: bool
    worst: float
    limit: float
    t_worst: float | None = None
    detail: str = ""


def check_mass_conservation(series: Mapping[str, np.ndarray], tol: float = 1e-10) -> CheckReport:
    m = np.asarray(series["mass_u"], dtype=float)
    t = np.asarray(series["t"], dtype=float)
    if m.size == 0:
        raise ValueError("empty series")
    dev = np.abs(m - m[0]) / abs(m[0])
    k = int(np.argmax(dev))
    ok = bool(dev[k] <= tol)
    detail = "" if ok else f"relative mass drift {dev[k]:.3e} at t={t[k]:.6g}"
    return CheckReport(ok, float(dev[k]), tol, float(t[k]), detail)


def check_w_bound(
    series: Mapping[str, np.ndarray], w0_sup: float, r_star: float, tol: float = 1e-8
) -> CheckReport:
    s = np.asarray(series["sup_w"], dtype=float)
    t = np.asarray(series["t"], dtype=float)
    if s.size == 0:
        raise ValueError("empty series")
    limit = w0_sup + r_star + tol
    k = int(np.argmax(s))
    ok = bool(s[k] <= limit)
    detail = "" if ok else f"sup w = {s[k]:.10g} exceeds {limit:.10g} at t={t[k]:.6g}"
    return CheckReport(ok, float(s[k]), limit, float(t[k]), detail)


# -- windowed integrals ----------------------------------------------------------


@dataclass
class WindowedSeries:
    t: np.ndarray
    values: np.ndarray
    tau: float


def _cumulative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    c = np.zeros_like(f)
    c[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return c


def _integral_to(t: np.ndarray, f: np.ndarray, cum: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Integral over ``[t[0], s]`` of the piecewise-linear interpolant of ``f``."""
    k = np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2)
    dt = t[k + 1] - t[k]
    x = s - t[k]
    slope = (f[k + 1] - f[k]) / dt
    return cum[k] + f[k] * x + 0.5 * slope * x * x


def windowed(t, base, tau: float) -> WindowedSeries:
    """``int_t^{t+tau} base`` for every sample time ``t <= T - tau``."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(base, dtype=float)
    if t.shape != f.shape or t.ndim != 1:
        raise ValueError("time and value arrays must be matching 1-D arrays")
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("need a strictly increasing time grid with at least two samples")
    span = t[-1] - t[0]
    if tau > span * (1 + 1e-12) or tau <= 0:
        raise ValueError(f"window {tau!r} not in (0, {span!r}]")
    cum = _cumulative(t, f)
    starts = t[t + tau <= t[-1] + 1e-12 * max(1.0, abs(t[-1]))]
    ends = np.minimum(starts + tau, t[-1])
    vals = _integral_to(t, f, cum, ends) - _integral_to(t, f, cum, starts)
    return WindowedSeries(starts, vals, tau)


# -- Gronwall-type comparison lemma ------------------------------------------------


@dataclass
class GronwallInputs:
    t: np.ndarray
    y: np.ndarray
    z: np.ndarray
    a: float
    b: float
    c: float

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if not (self.t.shape == self.y.shape == self.z.shape):
            raise ValueError("y and z must be sampled on the common time grid")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if min(self.a, self.b, self.c) <= 0:
            raise ValueError("a, b, c must be positive")

    @property
    def T(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def theta(self) -> float:
        return min(1.0, self.T / 2.0)


@dataclass
class GronwallReport:
    hypotheses_hold: bool
    bound: float
    conclusion_holds: bool
    derivative_ok: bool
    y_window_max: float
    z_window_max: float
    y_max: float
    failures: list[str]


def gronwall_check(inp: GronwallInputs, slack: float = 0.0) -> GronwallReport:
    """Discrete check of ``y' <= a y z`` plus windowed bounds, and of the bound
    ``y <= max(y(0), b) exp(2 a c)``.

    The derivative hypothesis compares each forward difference with ``a``
    times the larger endpoint values of ``y`` and ``z`` on the interval (exact
    for solutions with ``z`` piecewise constant between samples), plus
    ``slack * (1 + |y'|)``.  The conclusion is only asserted when every
    hypothesis holds.
    """
    t, y, z = inp.t, inp.y, inp.z
    failures = []
    if np.any(y < 0) or np.any(z < 0):
        failures.append("y and z must be nonnegative")
    dy = np.diff(y) / np.diff(t)
    ymax_pair = np.maximum(y[1:], y[:-1])
    zmax_pair = np.maximum(z[1:], z[:-1])
    excess = dy - inp.a * ymax_pair * zmax_pair - slack * (1.0 + np.abs(dy))
    derivative_ok = bool(np.all(excess <= 0))
    if not derivative_ok:
        k = int(np.argmax(excess))
        failures.append(f"y' exceeds a*y*z near t={t[k]:.6g}")
    theta = inp.theta
    wy = windowed(t, y, theta).values
    wz = windowed(t, z, theta).values
    # relative 1e-12 absorbs rounding in the window quadrature
    if wy.max() > inp.b * (1 + 1e-12):
        failures.append(f"windowed y reaches {wy.max():.6g} > b = {inp.b:.6g}")
    if wz.max() > inp.c * (1 + 1e-12):
        failures.append(f"windowed z reaches {wz.max():.6g} > c = {inp.c:.6g}")
    hyp = not failures
    bound = max(float(y[0]), inp.b) * math.exp(2.0 * inp.a * inp.c)
    ymax = float(np.max(y))
    concl = hyp and ymax <= bound * (1 + 1e-9)
    return GronwallReport(hyp, bound, concl, derivative_ok, float(wy.max()), float(wz.max()), ymax, failures)


# -- differential inequality audits ------------------------------------------------


@dataclass
class AuditReport:
    which: str
    t: np.ndarray
    residual: np.ndarray
    fraction_ok: float
    worst: float
    t_worst: float
    constants: dict


def half_fisher_w(series: Mapping[str, np.ndarray], lam: float) -> np.ndarray:
    """``(1/2) int |grad w|^2 / w`` recovered from the recorded functionals."""
    return np.asarray(series["combined_y"]) - np.asarray(series["entropy_u"]) - lam * np.asarray(series["grad_w_sq"])


def _centered(t, f):
    return (f[2:] - f[:-2]) / (t[2:] - t[:-2])


def audit_inequality(
    series: Mapping[str, np.ndarray],
    which: str,
    C: float,
    M: float = 1.0,
    delta: float = 1.0,
    lam: float = 1.0,
    tol: float = 0.0,
) -> AuditReport:
    """Residual ``RHS - LHS`` of one of the two energy inequalities at interior samples.

    ``lemma31``: ``(1/2) d/dt G + G + (1/4) L  <=  C D_u + M^2 V2 + C`` with
    ``G = int |grad w|^2``, ``L = int |lap w|^2``, ``D_u = int |grad u|^2/u``,
    ``V2 = int v^2``.

    ``lemma32``: ``d/dt E + E + (1/2) D_u  <=  delta L + V2 / (4 delta) + 2 R + C``
    with ``E = int (u ln u + 1/e) + (1/2) int |grad w|^2 / w`` and
    ``R = int |grad sqrt r|^2``.
    """
    t = np.asarray(series["t"], dtype=float)
    if len(t) < 3:
        raise ValueError("need at least three samples for centred differences")
    s = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    mid = slice(1, -1)
    if which == "lemma31":
        g = s["grad_w_sq"]
        lhs = 0.5 * _centered(t, g) + g[mid] + 0.25 * s["lap_w_sq"][mid]
        rhs = C * s["dirichlet_u"][mid] + M**2 * s["v_sq"][mid] + C
    elif which == "lemma32":
        e = s["entropy_u"] + half_fisher_w(s, lam)
        lhs = _centered(t, e) + e[mid] + 0.5 * s["dirichlet_u"][mid]
        rhs = delta * s["lap_w_sq"][mid] + s["v_sq"][mid] / (4 * delta) + 2 * s["gradroot_r"][mid] + C
    else:
        raise ValueError(f"unknown inequality {which!r}")
    res = rhs - lhs
    k = int(np.argmin(res))
    return AuditReport(
        which,
        t[mid],
        res,
        float(np.mean(res >= -tol)),
        float(res[k]),
        float(t[mid][k]),
        {"C": C, "M": M, "delta": delta},
    )


def bisect_constant(
    series: Mapping[str, np.ndarray],
    which: str,
    fraction: float = 0.99,
    C_max: float = 1e6,
    rel_tol: float = 1e-6,
    **kwargs,
) -> float | None:
    """Smallest ``C`` in ``[0, C_max]`` (to ``rel_tol``) making ``fraction`` of residuals nonnegative.

    Returns ``None`` when even ``C_max`` is not enough.  Feasibility is
    monotone in ``C`` because ``C`` enters the right-hand side with a positive
    coefficient.
    """

    def ok(C):
        return audit_inequality(series, which, C, **kwargs).fraction_ok >= fraction

    if not ok(C_max):
        return None
    if ok(0.0):
        return 0.0
    lo, hi = 0.0, C_max
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# -- long-run boundedness -----------------------------------------------------------


@dataclass
class SeriesVerdict:
    max_all: float
    max_final_half: float
    second_quarter_mean: float
    last_quarter_mean: float
    no_growth: bool


def growth_verdict(t, x, ratio: float = 1.05, noise: float = 1e-10) -> SeriesVerdict:
    """Trend test: the final-half max may not exceed the overall max and the
    last-quarter mean may not exceed ``ratio`` times the second-quarter mean.

    Quarter means below ``noise * max|x|`` are treated as equal, so a series
    that has decayed to solver noise is not flagged for wandering there.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t0, T = t[0], t[-1]
    span = T - t0

    def sel(a, b):
        m = (t >= t0 + a * span) & (t <= t0 + b * span)
        return x[m] if m.any() else x[-1:]

    full = float(np.max(x))
    half = float(np.max(sel(0.5, 1.0)))
    q2 = float(np.mean(sel(0.25, 0.5)))
    q4 = float(np.mean(sel(0.75, 1.0)))
    floor = noise * float(np.max(np.abs(x)))
    ok = half <= full and q4 <= ratio * q2 + floor
    return SeriesVerdict(full, half, q2, q4, bool(ok))


MONITORED = ("grad_w_sq", "combined_y", "mass_v", "sup_u", "sup_v", "sup_w")


def boundedness_monitor(series: Mapping[str, np.ndarray], tau: float | None = None) -> dict[str, SeriesVerdict]:
    """Growth verdicts for the bounded quantities plus windowed ``int v^beta`` and ``int u^2``."""
    t = np.asarray(series["t"], dtype=float)
    out = {name: growth_verdict(t, series[name]) for name in MONITORED}
    if tau is None:
        tau = min(1.0, (t[-1] - t[0]) / 2)
    for name, col in (("windowed_v_beta", "v_beta"), ("windowed_u_sq", "u_sq")):
        if col in series and np.all(np.isfinite(series[col])):
            ws = windowed(t, series[col], tau)
            out[name] = growth_verdict(ws.t, ws.values)
    return out
