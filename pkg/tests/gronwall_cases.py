"""Constructed series for the Gronwall-type checker (shared with the acceptance suite)."""

import numpy as np

from cascadetaxis.diagnostics import GronwallInputs, windowed


def _exact_step_window(t, z, theta, n_fine=4000):
    """Windowed integral of the piecewise-constant ``z`` (value ``z[k]`` on ``[t_k, t_k+1)``)."""
    tf = np.linspace(t[0], t[-1], n_fine + 1)
    idx = np.clip(np.searchsorted(t, tf, side="right") - 1, 0, len(z) - 1)
    return windowed(tf, z[idx], theta).values.max() * (1 + 1e-3)


def exact_case(rng) -> GronwallInputs:
    """Exact samples of ``y' = a y z`` with ``z`` piecewise constant; b, c admissible."""
    n = int(rng.integers(20, 200))
    T = float(rng.uniform(0.5, 6.0))
    t = np.sort(np.concatenate([[0.0, T], rng.uniform(0, T, n - 2)]))
    t = np.unique(t)
    a = float(rng.uniform(0.1, 3.0))
    z = rng.uniform(0, 2, len(t)) * (rng.random(len(t)) < 0.7)
    y = np.empty(len(t))
    y[0] = rng.uniform(0.1, 5.0)
    for k in range(len(t) - 1):
        y[k + 1] = y[k] * np.exp(a * z[k] * (t[k + 1] - t[k]))
    inp = GronwallInputs(t, y, z, a, 1.0, 1.0)
    theta = inp.theta
    b = windowed(t, y, theta).values.max()
    c = max(windowed(t, z, theta).values.max(), _exact_step_window(t, z, theta))
    return GronwallInputs(t, y, z, a, b, c)


def violating_case(rng, kind: int) -> GronwallInputs:
    """Series breaking one hypothesis: derivative, windowed y, or windowed z."""
    base = exact_case(rng)
    t, y, z = base.t, base.y.copy(), base.z.copy()
    if kind == 0:
        # growth with no driving term
        z = np.zeros_like(z)
        y = y[0] * np.exp(t)
        return GronwallInputs(t, y, z, base.a, windowed(t, y, base.theta).values.max(), 1.0)
    if kind == 1:
        return GronwallInputs(t, y, z, base.a, 0.5 * windowed(t, y, base.theta).values.max(), base.c)
    z = z + 1.0
    return GronwallInputs(t, y, z, base.a, base.b, 0.5 * windowed(t, z, base.theta).values.max())
