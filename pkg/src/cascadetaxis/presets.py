"""Initial-data presets and resupply profiles used by configs and tests."""

from __future__ import annotations

import math

import numpy as np

from .grid import Grid
from .model import InitialData, ResupplySpec

PRESETS = ("uniform", "gaussian_bump", "perturbed_uniform")


def gaussian(grid: Grid, cx: float, cy: float, width: float) -> np.ndarray:
    X, Y = grid.centers
    return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * width**2))


def smooth_noise(grid: Grid, rng: np.random.Generator, modes: int) -> np.ndarray:
    """Random combination of Neumann cosine modes, scaled so ``max |noise| <= 1``.

    The field is a continuous function sampled at cell centres, so the same
    seed gives the same underlying data on every resolution.
    """
    X, Y = grid.centers
    out = np.zeros(grid.shape)
    total = 0.0
    for k in range(modes + 1):
        for l in range(modes + 1):
            if k == 0 and l == 0:
                continue
            c = rng.uniform(-1.0, 1.0)
            if grid.ny == 1 and l > 0:
                continue
            out += c * np.cos(k * np.pi * X / grid.lx) * np.cos(l * np.pi * Y / grid.ly)
            total += abs(c)
    return out / total if total > 0 else out


def make_initial(
    grid: Grid,
    preset: str,
    u_level: float = 1.0,
    v_level: float = 0.5,
    w_level: float = 1.0,
    amplitude: float = 0.1,
    modes: int = 3,
    seed: int | None = None,
    center_x: float | None = None,
    center_y: float | None = None,
    width: float = 0.1,
) -> InitialData:
    """Build initial data.

    ``perturbed_uniform`` multiplies each level by ``1 + amplitude * noise``
    with independent seeded noise per field; ``gaussian_bump`` adds a bump of
    height ``amplitude`` to the forager level.
    """
    if preset == "uniform":
        u, v, w = (grid.constant(c) for c in (u_level, v_level, w_level))
    elif preset == "perturbed_uniform":
        if seed is None:
            raise ValueError("perturbed_uniform needs a seed")
        rng = np.random.default_rng(seed)
        u, v, w = (c * (1.0 + amplitude * smooth_noise(grid, rng, modes)) for c in (u_level, v_level, w_level))
    elif preset == "gaussian_bump":
        cx = 0.5 * grid.lx if center_x is None else center_x
        cy = 0.5 * grid.ly if center_y is None else center_y
        u = u_level + amplitude * gaussian(grid, cx, cy, width)
        v, w = grid.constant(v_level), grid.constant(w_level)
    else:
        raise ValueError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    return InitialData(grid, u, v, w)


TIME_PROFILES = ("constant", "exp_decay", "cosine")


def time_profile(name: str, rate: float = 1.0):
    """Bounded nonnegative time factor ``s(t)`` and its supremum."""
    if name == "constant":
        return (lambda t: 1.0), 1.0
    if name == "exp_decay":
        return (lambda t: math.exp(-rate * t)), 1.0
    if name == "cosine":
        return (lambda t: 0.5 * (1.0 + math.cos(rate * t))), 1.0
    raise ValueError(f"unknown time profile {name!r}; expected one of {', '.join(TIME_PROFILES)}")


def make_resupply(
    grid: Grid,
    kind: str,
    r0: float = 0.0,
    peak: float = 1.0,
    center_x: float | None = None,
    center_y: float | None = None,
    width: float = 0.15,
    time: str = "constant",
    rate: float = 1.0,
) -> ResupplySpec:
    if kind == "zero":
        return ResupplySpec.zero()
    if kind == "constant":
        return ResupplySpec.constant(r0)
    if kind == "separable":
        cx = 0.5 * grid.lx if center_x is None else center_x
        cy = 0.5 * grid.ly if center_y is None else center_y
        s, s_max = time_profile(time, rate)
        return ResupplySpec.separable(peak * gaussian(grid, cx, cy, width), s, s_max)
    raise ValueError(f"unknown resupply kind {kind!r}")
