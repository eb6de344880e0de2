"""Spectral solvers for the discrete Poisson and Helmholtz problems.

The stencil Laplacian of the grid module is a (block-)circulant operator on
periodic grids and a DCT-II-diagonal operator on cell-centered Neumann
grids, so both -Delta_h phi = r (with zero-mean gauge) and
(alpha*I - Delta_h) u = r are solved exactly by dividing in the transform
basis.  Eigenvalues of -Delta_h per mode k:

    periodic axis:  (4/h^2) sin^2(pi k / N),      k = 0..N-1
    Neumann axis:   (4/h^2) sin^2(pi k / (2N)),   k = 0..N-1

summed over axes; only the constant mode (all k = 0) is zero.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn, irfftn, rfftn

from .grid import BoundaryType, Field, Grid, _check_same_grid


class PoissonSolver:
    """Reusable spectral solver bound to one grid.

    Immutable after construction; concurrent solve calls are safe because
    every call works on its own transform buffers.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        if grid.bc is BoundaryType.PERIODIC:
            # rfftn layout: full spectrum except the last axis, which is
            # halved to N//2 + 1 real-input modes
            per_axis = []
            for a in range(grid.dim):
                n, h = grid.n[a], grid.h[a]
                k = np.arange(n, dtype=float)
                if a == grid.dim - 1:
                    k = k[: n // 2 + 1]
                per_axis.append((4.0 / h**2) * np.sin(np.pi * k / n) ** 2)
            self._lam = _outer_sum(per_axis)
        else:
            per_axis = []
            for a in range(grid.dim):
                n, h = grid.n[a], grid.h[a]
                k = np.arange(n, dtype=float)
                per_axis.append((4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2)
            self._lam = _outer_sum(per_axis)
        self._lam_gauged = self._lam.copy()
        self._lam_gauged.flat[0] = 1.0  # constant mode is fixed by the gauge

    def _forward(self, vals: np.ndarray) -> np.ndarray:
        if self.grid.bc is BoundaryType.PERIODIC:
            return rfftn(vals)
        return dctn(vals, type=2)

    def _backward(self, coeffs: np.ndarray) -> np.ndarray:
        if self.grid.bc is BoundaryType.PERIODIC:
            return irfftn(coeffs, s=self.grid.n)
        return idctn(coeffs, type=2)

    def solve(self, r: Field):
        """Solve -Delta_h phi = r - mean(r) with mean(phi) = 0.

        Returns
        -------
        phi : Field
            The zero-mean potential.
        defect : float
            mean(r), the compatibility defect of the right-hand side;
            zero for a neutral charge density.
        """
        _check_same_grid(r.grid, self.grid)
        defect = float(np.mean(r.values))
        coeffs = self._forward(r.values - defect)
        coeffs /= self._lam_gauged
        coeffs.flat[0] = 0.0
        phi = self._backward(coeffs)
        phi -= phi.mean()
        return Field._wrap(self.grid, phi), defect

    def solve_helmholtz(self, alpha: float, r: Field) -> Field:
        """Solve (alpha*I - Delta_h) u = r; alpha > 0 makes this invertible."""
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        _check_same_grid(r.grid, self.grid)
        coeffs = self._forward(r.values)
        coeffs /= alpha + self._lam
        return Field._wrap(self.grid, self._backward(coeffs))


def _outer_sum(per_axis):
    """Broadcast 1D eigenvalue arrays into the full mode array."""
    dim = len(per_axis)
    total = np.zeros([len(v) for v in per_axis])
    for a, vals in enumerate(per_axis):
        shape = [1] * dim
        shape[a] = len(vals)
        total = total + vals.reshape(shape)
    return total
