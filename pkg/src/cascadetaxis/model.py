"""Model parameters, the taxis/uptake response ``F``, resupply and data checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Grid

ROOT_FLOOR = 1e-14


class ModelError(ValueError):
    """Raised for inadmissible model parameters or inputs."""


@dataclass(frozen=True)
class ModelConfig:
    """Parameters of one simulation.

    ``beta`` is the logistic exponent of the scrounger equation.  For
    ``beta == 2`` the response is regularised, ``F(s) = s / (1 + epsilon s)``,
    and ``epsilon`` must be positive; for ``beta > 2`` ``F`` is the identity
    and ``epsilon`` must be zero.

    ``chi_u``, ``chi_v`` scale the two taxis fluxes and ``kinetics`` scales all
    reaction terms (logistic growth, uptake, decay, resupply).  They default to
    1; setting them to 0 leaves three decoupled heat equations.
    """

    beta: float = 3.0
    epsilon: float = 0.0
    t_final: float = 10.0
    dt_init: float = 1e-2
    cfl_advect: float = 0.25
    cfl_react: float = 0.5
    w_floor: float = 1e-10
    u_floor: float = 1e-10
    solver_tol: float = 1e-10
    solver_max_iter: int = 2000
    combined_weight: float = 1.0
    chi_u: float = 1.0
    chi_v: float = 1.0
    kinetics: float = 1.0
    dt_min: float = 1e-12
    clip_tol: float = 1e-12

    def __post_init__(self):
        if not self.beta >= 2:
            raise ModelError(f"beta must be >= 2 (got {self.beta!r}); sub-quadratic logistic sources are not supported")
        if self.beta == 2 and not self.epsilon > 0:
            raise ModelError("beta = 2 requires a positive regularization parameter epsilon")
        if self.beta > 2 and self.epsilon != 0:
            raise ModelError("beta > 2 uses the unregularized response; epsilon must be 0")
        if not 0 < self.cfl_advect <= 1:
            raise ModelError("cfl_advect must lie in (0, 1]")
        if not self.cfl_react > 0:
            raise ModelError("cfl_react must be positive")
        if not self.dt_init > 0:
            raise ModelError("dt_init must be positive")
        if not self.t_final >= 0:
            raise ModelError("t_final must be nonnegative")
        if self.t_final > 0 and not self.t_final > self.dt_init:
            raise ModelError("t_final must exceed dt_init")
        if not (self.w_floor > 0 and self.u_floor > 0):
            raise ModelError("floors must be positive")
        if not self.solver_tol > 0 or self.solver_max_iter < 1:
            raise ModelError("solver_tol must be positive and solver_max_iter >= 1")
        if min(self.chi_u, self.chi_v, self.kinetics) < 0:
            raise ModelError("coupling coefficients must be nonnegative")

    @property
    def regularized(self) -> bool:
        return self.beta == 2


def _check_nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ModelError("response function evaluated at a negative argument")
    return s


def f_eval(s, cfg: ModelConfig):
    """Response ``F(s)``: identity for ``beta > 2``, ``s / (1 + eps s)`` for ``beta == 2``."""
    s = _check_nonneg(s)
    out = s / (1.0 + cfg.epsilon * s) if cfg.regularized else s.copy()
    return float(out) if out.ndim == 0 else out


def f_prime(s, cfg: ModelConfig):
    s = _check_nonneg(s)
    if cfg.regularized:
        out = 1.0 / (1.0 + cfg.epsilon * s) ** 2
    else:
        out = np.ones_like(s)
    return float(out) if out.ndim == 0 else out


# -- resupply ---------------------------------------------------------------


@dataclass(frozen=True)
class ResupplySpec:
    """External nutrient supply ``r(x, t)``.

    One of ``zero``, ``constant`` (value ``r0``) or ``separable``
    (``g(x) * s(t)`` with ``0 <= s <= s_max``).
    """

    kind: str
    r0: float = 0.0
    g: np.ndarray | None = field(default=None, repr=False)
    s: Callable[[float], float] | None = field(default=None, repr=False)
    s_max: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "separable"):
            raise ModelError(f"unknown resupply kind {self.kind!r}")
        if self.kind == "constant" and not (self.r0 >= 0 and math.isfinite(self.r0)):
            raise ModelError("constant resupply must be finite and nonnegative")
        if self.kind == "separable":
            if self.g is None or self.s is None:
                raise ModelError("separable resupply needs a profile g and a time factor s")
            if not np.all(np.isfinite(self.g)) or np.any(self.g < 0):
                raise ModelError("separable profile g must be finite and nonnegative")
            if not (self.s_max >= 0 and math.isfinite(self.s_max)):
                raise ModelError("s_max must be finite and nonnegative")

    @classmethod
    def zero(cls) -> ResupplySpec:
        return cls("zero")

    @classmethod
    def constant(cls, r0: float) -> ResupplySpec:
        return cls("constant", r0=float(r0))

    @classmethod
    def separable(cls, g: np.ndarray, s: Callable[[float], float], s_max: float) -> ResupplySpec:
        return cls("separable", g=np.asarray(g, dtype=float), s=s, s_max=float(s_max))

    @property
    def r_star(self) -> float:
        """Supremum bound on ``r`` over space and time."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.r0
        return float(np.max(self.g)) * self.s_max

    def raw(self, grid: Grid, t: float) -> np.ndarray:
        """``r(., t)`` without the sign check."""
        if self.kind == "zero":
            return grid.zeros()
        if self.kind == "constant":
            return grid.constant(self.r0)
        return grid.field(self.g, "g") * float(self.s(t))


def resupply_field(spec: ResupplySpec, grid: Grid, t: float) -> np.ndarray:
    if t < 0:
        raise ModelError("resupply evaluated at negative time")
    r = spec.raw(grid, t)
    if np.any(r < 0):
        raise ModelError(f"resupply is negative at t={t!r}")
    if spec.kind == "separable" and float(spec.s(t)) > spec.s_max * (1 + 1e-12):
        raise ModelError(f"time factor s({t!r}) exceeds the declared bound s_max")
    return r


def gradroot(grid: Grid, r: np.ndarray) -> float:
    """Discrete ``int |grad sqrt(r)|^2``, with a tiny floor under the root."""
    return grid.dirichlet(np.sqrt(np.maximum(r, 0.0) + ROOT_FLOOR))


@dataclass
class ResupplyReport:
    r_star: float
    windowed_gradroot_sup: float
    negative_samples: int
    admissible: bool
    messages: list[str]


def validate_resupply(
    spec: ResupplySpec, grid: Grid, window: float = 1.0, t_end: float = 10.0
) -> ResupplyReport:
    """Check boundedness of ``r`` and finiteness of the windowed ``|grad sqrt r|^2`` integral.

    The start times form a ladder of spacing ``window / 10`` on ``[0, t_end]``;
    each window integral is a trapezoid sum over the same spacing.
    """
    if not window > 0:
        raise ModelError("window must be positive")
    dt = window / 10.0
    n_start = int(math.floor(t_end / dt + 1e-9)) + 1
    times = dt * np.arange(n_start + 10)
    messages = []
    negatives = 0
    sup_r = 0.0
    g_series = np.empty(len(times))
    for k, t in enumerate(times):
        r = spec.raw(grid, float(t))
        bad = int(np.count_nonzero(r < 0))
        if bad:
            negatives += bad
            if not any(m.startswith("negative") for m in messages):
                messages.append(f"negative resupply sample at t={t:.6g}")
        sup_r = max(sup_r, float(np.max(r)))
        g_series[k] = gradroot(grid, r)
    windowed = np.array(
        [np.trapezoid(g_series[k : k + 11], dx=dt) for k in range(n_start)]
    )
    wsup = float(np.max(windowed)) if len(windowed) else 0.0
    r_star = spec.r_star
    if sup_r > r_star * (1 + 1e-12) + 1e-300:
        messages.append(f"sampled sup of r ({sup_r:.6g}) exceeds the declared bound r_star ({r_star:.6g})")
    ok = negatives == 0 and math.isfinite(r_star) and math.isfinite(wsup) and sup_r <= r_star * (1 + 1e-12) + 1e-300
    return ResupplyReport(r_star, wsup, negatives, ok, messages)


# -- initial data -----------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    grid: Grid
    u0: np.ndarray
    v0: np.ndarray
    w0: np.ndarray


@dataclass
class FieldSummary:
    min: float
    max: float
    integral: float


@dataclass
class InitialDataReport:
    ok: bool
    violations: list[str]
    summary: dict[str, FieldSummary]


def validate_initial_data(data: InitialData) -> InitialDataReport:
    """Check nonnegativity, nontriviality and strict positivity of ``w0``."""
    grid = data.grid
    violations = []
    summary = {}
    for name, f in (("u0", data.u0), ("v0", data.v0), ("w0", data.w0)):
        try:
            f = grid.field(f, name)
        except ValueError as exc:
            violations.append(str(exc))
            continue
        summary[name] = FieldSummary(float(f.min()), float(f.max()), grid.integrate(f))
        if name == "w0":
            if np.any(f <= 0):
                violations.append("w0 not strictly positive: the initial nutrient must be > 0 everywhere")
            continue
        if np.any(f < 0):
            violations.append(f"{name} has negative entries: initial densities must be nonnegative")
        if not np.any(f > 0):
            violations.append(f"{name} identically zero: initial densities must not vanish identically")
    return InitialDataReport(not violations, violations, summary)
