"""Projection of a grid function onto {u >= 0, <u,1> = M}.

Two inner products are supported.  In L2 the projection has the closed
form u = (u_tilde - xi)+ with the positivity multiplier lam = (u_tilde - xi)-
and a single scalar unknown: the root of

    F(xi) = h^dim * sum((u_tilde - xi)+) - M = 0,

a convex, nonincreasing, piecewise-linear function.  The root is found by a
semi-smooth Newton iteration (finitely terminating) or a secant iteration,
and independently by an exact sort-based evaluation used as the oracle.

In H1 the optimality system couples the corrected field and the mass
multiplier.  Writing U = corrected - multiplier (so U+ is the corrected
field and U- the multiplier), the system is

    F1(U, xi) = -Delta_h U+ + U + xi - (I - Delta_h) u_tilde = 0
    F2(U)     = h^dim * sum(U+) - M = 0,

solved by a generalized-Jacobian Newton iteration whose linear piece
(I - Delta_h S) V = b, with S = diag(sgn(U+)), is reduced exactly to the
symmetric positive definite system (I - S Delta_h S) W = S b on the active
set (V = b + Delta_h W afterwards) and solved by preconditioned CG with the
constant-coefficient Helmholtz inverse as the preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import Field, Grid, laplacian_array, norm_l2
from .poisson import PoissonSolver

# values this close to zero count as zero when classifying active nodes
SIGN_TOL = 1e-14


class ProjectionError(RuntimeError):
    """Raised when a projection solver exhausts its iteration cap."""


@dataclass(frozen=True)
class L2Projection:
    """Config for the L2 correction; root_method is 'newton' or 'secant'."""

    root_method: str = "newton"
    max_iter: int = 100

    def __post_init__(self):
        if self.root_method not in ("newton", "secant"):
            raise ValueError(f"unknown root method {self.root_method!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class H1Projection:
    """Config for the H1 correction (outer Newton plus inner PCG)."""

    newton_tol: float = 1e-9
    max_newton: int = 30
    inner_tol: float = 1e-10
    max_inner: int = 500

    def __post_init__(self):
        if self.newton_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_newton < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be at least 1")


ProjectionVariant = Union[L2Projection, H1Projection]


@dataclass(frozen=True)
class ProjectionResult:
    corrected: Field
    multiplier_scalar: float
    multiplier_field: Field
    iterations: int
    kkt_residual: float


def _mass_excess(vals: np.ndarray, xi: float, hvol: float, mass: float) -> float:
    return hvol * float(np.sum(np.maximum(vals - xi, 0.0))) - mass


def _finish_l2(grid: Grid, vals: np.ndarray, xi: float, mass: float,
               iterations: int) -> ProjectionResult:
    corrected = np.maximum(vals - xi, 0.0)
    lam = np.maximum(xi - vals, 0.0)
    res = _kkt_max(grid, vals, corrected, lam, xi, mass, h1=False)
    return ProjectionResult(
        corrected=Field._wrap(grid, corrected),
        multiplier_scalar=xi,
        multiplier_field=Field._wrap(grid, lam),
        iterations=iterations,
        kkt_residual=res,
    )


def _l2_tolerance(vals: np.ndarray, hvol: float, mass: float) -> float:
    scale = max(1.0, mass, hvol * float(np.sum(np.abs(vals))))
    return 1e-13 * scale


def _bisect_left(vals, hvol, mass, xi):
    """One bisection step toward smaller xi; used when the Newton slope
    degenerates (no active nodes means F = -mass < 0 on a flat segment)."""
    step = max(1.0, abs(xi))
    lo = xi - step
    while _mass_excess(vals, lo, hvol, mass) < 0:
        step *= 2.0
        lo = xi - step
    return 0.5 * (lo + xi)


def project_l2(u_tilde: Field, mass: float,
               cfg: L2Projection = L2Projection()) -> ProjectionResult:
    """L2-project onto the nonnegative, mass-M constraint set.

    The reported iteration count is the number of multiplier updates,
    floored at 1 so an already-feasible input reports a single check.
    """
    if mass <= 0:
        raise ValueError("mass target must be positive")
    grid = u_tilde.grid
    vals = u_tilde.values
    hvol = grid.cell_volume
    atol = _l2_tolerance(vals, hvol, mass)

    if cfg.root_method == "newton":
        xi, updates = _root_newton(vals, hvol, mass, atol, cfg.max_iter)
    else:
        xi, updates = _root_secant(vals, hvol, mass, atol, cfg.max_iter)
    return _finish_l2(grid, vals, xi, mass, max(1, updates))


def _root_newton(vals, hvol, mass, atol, max_iter):
    xi = 0.0
    updates = 0
    for _ in range(max_iter):
        excess = _mass_excess(vals, xi, hvol, mass)
        if abs(excess) <= atol:
            return xi, updates
        active = int(np.count_nonzero(vals - xi > SIGN_TOL))
        if active == 0:
            # flat segment cannot contain the root; bisect on a bracket
            xi = _bisect_left(vals, hvol, mass, xi)
        else:
            xi += excess / (hvol * active)
        updates += 1
    raise ProjectionError(
        f"L2 Newton did not converge in {max_iter} iterations; "
        f"residual {_mass_excess(vals, xi, hvol, mass):.3e}"
    )


def _root_secant(vals, hvol, mass, atol, max_iter):
    xi0 = 0.0
    f0 = _mass_excess(vals, xi0, hvol, mass)
    if abs(f0) <= atol:
        return xi0, 0
    npos = max(1, int(np.count_nonzero(vals > SIGN_TOL)))
    xi1 = -f0 / (hvol * npos)
    updates = 1
    f1 = _mass_excess(vals, xi1, hvol, mass)
    for _ in range(max_iter):
        if abs(f1) <= atol:
            return xi1, updates
        if f1 == f0:
            # both points on a flat segment; jump left of it
            xi2 = _bisect_left(vals, hvol, mass, min(xi0, xi1))
        else:
            xi2 = xi1 - f1 * (xi1 - xi0) / (f1 - f0)
        xi0, f0 = xi1, f1
        xi1 = xi2
        f1 = _mass_excess(vals, xi1, hvol, mass)
        updates += 1
    raise ProjectionError(
        f"L2 secant did not converge in {max_iter} iterations; residual {f1:.3e}"
    )


def project_l2_oracle(u_tilde: Field, mass: float) -> ProjectionResult:
    """Exact L2 projection via sorted breakpoints (test oracle).

    Sort the values in decreasing order; for the candidate active count k
    the multiplier is xi_k = (sum of k largest - M/h^dim)/k, and the
    correct k is the first whose xi_k dominates the next sorted value.
    """
    if mass <= 0:
        raise ValueError("mass target must be positive")
    grid = u_tilde.grid
    vals = u_tilde.values
    target = mass / grid.cell_volume
    w = np.sort(vals.ravel())[::-1]
    csum = np.cumsum(w)
    counts = np.arange(1, w.size + 1, dtype=float)
    cand = (csum - target) / counts
    keep = cand[:-1] >= w[1:]
    idx = int(np.argmax(keep)) if keep.any() else w.size - 1
    xi = float(cand[idx])
    return _finish_l2(grid, vals, xi, mass, 0)


def project_h1(u_tilde: Field, mass: float, cfg: H1Projection,
               helmholtz: PoissonSolver) -> ProjectionResult:
    """H1-project via generalized-Jacobian Newton on the split system."""
    if mass <= 0:
        raise ValueError("mass target must be positive")
    grid = u_tilde.grid
    if helmholtz.grid != grid:
        raise ValueError("helmholtz solver bound to a different grid")
    vals = u_tilde.values
    hvol = grid.cell_volume
    sqrt_hvol = np.sqrt(hvol)
    rhs = vals - laplacian_array(grid, vals)  # (I - Delta_h) u_tilde
    mass_atol = 1e-12 * max(1.0, mass)
    ones = np.ones(grid.n)

    u_split = vals.copy()
    xi = 0.0
    iterations = 0
    v1 = v2 = None
    for step in range(cfg.max_newton + 1):
        u_pos = np.maximum(u_split, 0.0)
        f1 = -laplacian_array(grid, u_pos) + u_split + xi - rhs
        f2 = hvol * float(np.sum(u_pos)) - mass
        stat = sqrt_hvol * float(np.linalg.norm(f1.ravel()))
        if stat <= cfg.newton_tol and abs(f2) <= mass_atol:
            iterations = step
            break
        if step == cfg.max_newton:
            raise ProjectionError(
                f"H1 Newton did not converge in {cfg.max_newton} iterations; "
                f"stationarity {stat:.3e}, mass defect {f2:.3e}"
            )
        active = u_pos > SIGN_TOL
        if not active.any():
            # degenerate start (entirely nonpositive split): shift by the
            # exact L2 multiplier so the active set becomes nonempty
            shift = project_l2_oracle(
                Field._wrap(grid, u_split.copy()), mass
            ).multiplier_scalar
            u_split = u_split - shift
            continue
        v1 = _solve_inner(grid, helmholtz, active, -f1, cfg, v1)
        v2 = _solve_inner(grid, helmholtz, active, ones, cfg, v2)
        den = hvol * float(np.sum(v2[active]))
        dxi = (f2 + hvol * float(np.sum(v1[active]))) / den
        xi += dxi
        u_split = u_split + v1 - dxi * v2

    u_pos = np.maximum(u_split, 0.0)
    u_neg = np.maximum(-u_split, 0.0)
    res = _kkt_max(grid, vals, u_pos, u_neg, xi, mass, h1=True)
    return ProjectionResult(
        corrected=Field._wrap(grid, u_pos),
        multiplier_scalar=xi,
        multiplier_field=Field._wrap(grid, u_neg),
        iterations=iterations,
        kkt_residual=res,
    )


def _solve_inner(grid: Grid, helmholtz: PoissonSolver, active: np.ndarray,
                 b: np.ndarray, cfg: H1Projection,
                 v0: np.ndarray | None = None) -> np.ndarray:
    """Solve (I - Delta_h S) v = b with S = diag(active indicator).

    Reduced exactly to the SPD system (I - S Delta_h S) w = S b supported on
    the active set; v = b + Delta_h w recovers the full solution.  A few
    refinement passes absorb the Delta_h amplification of the CG residual.
    v0 warm-starts the defect iteration (any field is admissible).
    """
    norm_b = float(np.linalg.norm(b.ravel()))
    if norm_b == 0.0:
        return np.zeros(grid.n)
    v = np.zeros(grid.n) if v0 is None else v0.copy()
    for _ in range(6):
        residual = b - v + laplacian_array(grid, np.where(active, v, 0.0))
        res_norm = float(np.linalg.norm(residual.ravel()))
        if res_norm <= cfg.inner_tol * norm_b:
            break
        w = _pcg_active(grid, helmholtz, active, residual, cfg)
        # correction for defect r is r + Delta_h (I - S Delta_h S)^-1 S r
        v = v + residual + laplacian_array(grid, w)
    return v


def _pcg_active(grid: Grid, helmholtz: PoissonSolver, active: np.ndarray,
                rhs: np.ndarray, cfg: H1Projection) -> np.ndarray:
    """PCG for (I - S Delta_h S) w = S rhs on the active subspace."""

    def operator(wv):
        return wv - np.where(
            active, laplacian_array(grid, np.where(active, wv, 0.0)), 0.0
        )

    def precondition(rv):
        masked = Field._wrap(grid, np.where(active, rv, 0.0))
        return np.where(active, helmholtz.solve_helmholtz(1.0, masked).values, 0.0)

    b = np.where(active, rhs, 0.0)
    norm_b = float(np.linalg.norm(b.ravel()))
    x = np.zeros(grid.n)
    if norm_b == 0.0:
        return x
    r = b.copy()
    z = precondition(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    for _ in range(cfg.max_inner):
        ap = operator(p)
        alpha = rz / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        if float(np.linalg.norm(r.ravel())) <= cfg.inner_tol * norm_b:
            return x
        z = precondition(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ProjectionError(
        f"inner CG stalled above tolerance after {cfg.max_inner} iterations"
    )


def _kkt_max(grid: Grid, tilde: np.ndarray, u: np.ndarray, lam: np.ndarray,
             xi: float, mass: float | None, h1: bool) -> float:
    diff = u - tilde
    if h1:
        stat_field = diff - laplacian_array(grid, diff) + xi - lam
    else:
        stat_field = diff + xi - lam
    stat = np.sqrt(grid.cell_volume) * float(np.linalg.norm(stat_field.ravel()))
    pieces = [
        stat,
        max(0.0, -float(np.min(u))),
        max(0.0, -float(np.min(lam))),
        float(np.max(np.abs(u * lam))),
    ]
    if mass is not None:
        pieces.append(abs(grid.cell_volume * float(np.sum(u)) - mass))
    return max(pieces)


def kkt_residual(u_tilde: Field, result: ProjectionResult,
                 variant: ProjectionVariant, mass: float | None = None) -> float:
    """Max violation over the four KKT blocks of the projection.

    Stationarity is measured in the grid L2 norm; feasibility, dual
    feasibility and complementarity pointwise.  Pass the mass target to
    include the mass-defect block; without it only the other blocks enter.
    """
    return _kkt_max(
        u_tilde.grid,
        u_tilde.values,
        result.corrected.values,
        result.multiplier_field.values,
        result.multiplier_scalar,
        mass,
        isinstance(variant, H1Projection),
    )
