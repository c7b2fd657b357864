"""Uniform cell-centred grid with homogeneous Neumann boundaries.

Fields are plain ``numpy`` arrays of shape ``(ny, nx)``; flattening them in C
order gives the row-major layout (x fastest) used on disk.  Face quantities
live in :class:`FluxField`, whose boundary faces are zero so that every
discrete divergence telescopes to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class FluxField:
    """Face-centred vector field.

    ``xflux`` has shape ``(ny, nx + 1)`` (vertical faces) and ``yflux`` has
    shape ``(ny + 1, nx)`` (horizontal faces).
    """

    xflux: np.ndarray
    yflux: np.ndarray

    def __neg__(self) -> FluxField:
        return FluxField(-self.xflux, -self.yflux)

    def __mul__(self, other) -> FluxField:
        if isinstance(other, FluxField):
            return FluxField(self.xflux * other.xflux, self.yflux * other.yflux)
        return FluxField(self.xflux * other, self.yflux * other)

    __rmul__ = __mul__

    def boundary_max(self) -> float:
        return float(
            max(
                np.abs(self.xflux[:, [0, -1]]).max(),
                np.abs(self.yflux[[0, -1], :]).max(),
            )
        )

    def abs_max(self) -> float:
        return float(max(np.abs(self.xflux).max(), np.abs(self.yflux).max()))


@dataclass(frozen=True)
class Grid:
    """Uniform square-cell grid on ``[0, lx] x [0, ly]``."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 2 or self.ny < 1:
            raise ValueError(f"need nx >= 2 and ny >= 1, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")
        hx, hy = self.lx / self.nx, self.ly / self.ny
        if not np.isclose(hx, hy, rtol=1e-12, atol=0.0):
            raise ValueError(f"cells must be square: lx/nx={hx!r} but ly/ny={hy!r}")

    @property
    def h(self) -> float:
        return self.lx / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @cached_property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        x = (np.arange(self.nx) + 0.5) * self.h
        y = (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y)

    # -- fields ---------------------------------------------------------

    def field(self, values, name: str = "field") -> np.ndarray:
        """Return ``values`` as a validated ``(ny, nx)`` float array."""
        a = np.asarray(values, dtype=float)
        if a.ndim == 0:
            a = np.full(self.shape, float(a))
        elif a.shape != self.shape:
            if a.size != self.size:
                raise ValueError(
                    f"{name}: expected {self.size} values for a {self.nx}x{self.ny} grid, got {a.size}"
                )
            a = a.reshape(self.shape)
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name}: contains non-finite values")
        return a

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def constant(self, c: float) -> np.ndarray:
        return np.full(self.shape, float(c))

    def zero_flux(self) -> FluxField:
        return FluxField(np.zeros((self.ny, self.nx + 1)), np.zeros((self.ny + 1, self.nx)))

    # -- discrete operators ----------------------------------------------

    def laplacian_neumann(self, f: np.ndarray) -> np.ndarray:
        """Five-point Laplacian with mirrored ghost cells."""
        g = np.pad(f, 1, mode="edge")
        c = g[1:-1, 1:-1]
        return (g[1:-1, 2:] + g[1:-1, :-2] + g[2:, 1:-1] + g[:-2, 1:-1] - 4.0 * c) / self.h**2

    def face_gradient(self, f: np.ndarray) -> FluxField:
        flux = self.zero_flux()
        flux.xflux[:, 1:-1] = np.diff(f, axis=1) / self.h
        flux.yflux[1:-1, :] = np.diff(f, axis=0) / self.h
        return flux

    def face_average(self, f: np.ndarray) -> FluxField:
        """Arithmetic mean of the two cells adjacent to each interior face."""
        avg = self.zero_flux()
        avg.xflux[:, 1:-1] = 0.5 * (f[:, 1:] + f[:, :-1])
        avg.yflux[1:-1, :] = 0.5 * (f[1:, :] + f[:-1, :])
        return avg

    def upwind_advective_flux(self, density: np.ndarray, velocity: FluxField) -> FluxField:
        """Donor-cell flux: ``velocity`` times the density of the upwind cell."""
        if np.any(density < 0):
            raise ValueError("upwind flux requires a nonnegative density")
        flux = self.zero_flux()
        vx = velocity.xflux[:, 1:-1]
        flux.xflux[:, 1:-1] = vx * np.where(vx > 0, density[:, :-1], density[:, 1:])
        vy = velocity.yflux[1:-1, :]
        flux.yflux[1:-1, :] = vy * np.where(vy > 0, density[:-1, :], density[1:, :])
        return flux

    def flux_divergence(self, flux: FluxField) -> np.ndarray:
        if flux.boundary_max() != 0.0:
            raise ValueError("flux field has nonzero boundary faces (no-flux condition violated)")
        return (np.diff(flux.xflux, axis=1) + np.diff(flux.yflux, axis=0)) / self.h

    def integrate(self, f: np.ndarray) -> float:
        return float(self.h**2 * np.sum(f))

    def dirichlet(self, f: np.ndarray) -> float:
        """Face-based approximation of the integral of ``|grad f|**2``."""
        dx = np.diff(f, axis=1)
        dy = np.diff(f, axis=0)
        # h**2 * (diff/h)**2 = diff**2
        return float(np.sum(dx * dx) + np.sum(dy * dy))

    def dirichlet_quotient(self, f: np.ndarray, weight: np.ndarray, floor: float) -> float:
        """Weighted Dirichlet integral ``sum_faces h^2 (df/h)^2 / max(avg weight, floor)``."""
        if floor <= 0:
            raise ValueError("floor must be positive")
        dx = np.diff(f, axis=1)
        dy = np.diff(f, axis=0)
        wx = np.maximum(0.5 * (weight[:, 1:] + weight[:, :-1]), floor)
        wy = np.maximum(0.5 * (weight[1:, :] + weight[:-1, :]), floor)
        return float(np.sum(dx * dx / wx) + np.sum(dy * dy / wy))

    def center_gradient(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Face differences averaged back to cell centres (boundary faces count as zero)."""
        g = self.face_gradient(f)
        gx = 0.5 * (g.xflux[:, 1:] + g.xflux[:, :-1])
        gy = 0.5 * (g.yflux[1:, :] + g.yflux[:-1, :])
        return gx, gy

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of :meth:`laplacian_neumann` acting on C-order flattened fields."""

        def neumann_1d(n):
            main = -2.0 * np.ones(n)
            main[0] = main[-1] = -1.0
            if n == 1:
                main[0] = 0.0
            off = np.ones(n - 1)
            return sp.diags([off, main, off], [-1, 0, 1])

        lap = sp.kronsum(neumann_1d(self.nx), neumann_1d(self.ny), format="csr")
        return (lap / self.h**2).tocsr()

    def cos_mode(self, kx: int, ky: int = 0) -> np.ndarray:
        """Neumann eigenmode ``cos(kx pi x / lx) cos(ky pi y / ly)``."""
        X, Y = self.centers
        return np.cos(kx * np.pi * X / self.lx) * np.cos(ky * np.pi * Y / self.ly)

    def mode_eigenvalue(self, kx: int, ky: int = 0) -> float:
        """Positive eigenvalue ``lam`` with ``laplacian_neumann(cos_mode) = -lam * cos_mode``."""
        h = self.h
        return (2.0 / h**2) * (1.0 - np.cos(kx * np.pi * h / self.lx)) + (2.0 / h**2) * (
            1.0 - np.cos(ky * np.pi * h / self.ly)
        )
