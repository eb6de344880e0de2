"""Time integration of the two-species drift-diffusion system.

One run is: compatible initialization (masses of both species scaled to a
common target M0, potential from the discrete Poisson solve), one backward
Euler step for startup, then Crank-Nicolson steps whose drift coefficients
are frozen at the half-step extrapolation (3/2)u^k - (1/2)u^{k-1}.  Every
predictor output is corrected by the configured projection, which restores
nonnegativity and the exact mass target; the potential is then recomputed
from the corrected densities (plus any fixed background charge).

The two implicit solves per step are constant-coefficient Helmholtz
problems handled spectrally:

    backward Euler:  (1/tau - Delta_h) p~ = p^k/tau + drift + source
    Crank-Nicolson:  (2/tau - Delta_h) p~ = 2 p^k/tau + Delta_h p^k
                                            + 2*(drift + source)

with the drift sign flipped between the two species.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np

from . import diagnostics
from .grid import Field, Grid, div_avg_grad, laplacian_array
from .poisson import PoissonSolver
from .projection import (
    H1Projection,
    L2Projection,
    ProjectionResult,
    ProjectionVariant,
    project_h1,
    project_l2,
)

SourceFn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class SchemeConfig:
    """Time step, horizon, projection variant and optional model hooks.

    Sources are callables f(t, *coords) evaluated on the node coordinate
    arrays; fixed_charge is a static Field added to the Poisson right-hand
    side.  The time horizon must be an integer number of steps (reproducible
    tables; no shortened final step).
    """

    tau: float
    t_final: float
    variant: ProjectionVariant = dataclass_field(default_factory=L2Projection)
    source_p: Optional[SourceFn] = None
    source_n: Optional[SourceFn] = None
    fixed_charge: Optional[Field] = None
    cfl_ratio_warn: float = 1.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.t_final < self.tau:
            raise ValueError("t_final must be at least one step")
        steps = round(self.t_final / self.tau)
        if abs(steps * self.tau - self.t_final) > 1e-9 * max(self.tau, self.t_final):
            raise ValueError(
                f"t_final {self.t_final} is not an integer multiple of tau {self.tau}"
            )

    @property
    def num_steps(self) -> int:
        return round(self.t_final / self.tau)


@dataclass
class SimulationState:
    k: int
    p: Field
    n: Field
    phi: Field
    p_prev: Field
    n_prev: Field
    phi_prev: Field
    mass_p: float
    mass_n: float
    stats_p: Optional[ProjectionResult] = None
    stats_n: Optional[ProjectionResult] = None
    rhs_defect: float = 0.0


def initialize(grid: Grid, p0, n0, cfg: SchemeConfig,
               solver: Optional[PoissonSolver] = None) -> SimulationState:
    """Build the compatible step-0 state.

    Initial data may be given as space functions f(*coords) or Fields; both
    species are rescaled so their discrete masses equal the common target
    M0 = max of the two sampled masses, and the potential solves the
    discrete Poisson problem for the resulting charge density.
    """
    solver = solver or PoissonSolver(grid)
    p_vals = _sample_initial(grid, p0, "p")
    n_vals = _sample_initial(grid, n0, "n")
    mass_p_raw = grid.cell_volume * float(np.sum(p_vals))
    mass_n_raw = grid.cell_volume * float(np.sum(n_vals))
    if mass_p_raw <= 0 or mass_n_raw <= 0:
        raise ValueError(
            f"initial discrete masses must be positive, got "
            f"{mass_p_raw:.3e} and {mass_n_raw:.3e}"
        )
    mass0 = max(mass_p_raw, mass_n_raw)
    p_init = Field._wrap(grid, (mass0 / mass_p_raw) * p_vals)
    n_init = Field._wrap(grid, (mass0 / mass_n_raw) * n_vals)
    phi, defect = _potential(p_init, n_init, cfg.fixed_charge, solver)
    return SimulationState(
        k=0,
        p=p_init, n=n_init, phi=phi,
        p_prev=p_init, n_prev=n_init, phi_prev=phi,
        mass_p=mass0, mass_n=mass0,
        rhs_defect=defect,
    )


def _sample_initial(grid: Grid, data, name: str) -> np.ndarray:
    if isinstance(data, Field):
        vals = data.values.copy()
    else:
        vals = np.asarray(data(*grid.meshgrid()), dtype=float)
        vals = np.broadcast_to(vals, grid.n).astype(float)
    low = float(np.min(vals))
    if low < -1e-14:
        raise ValueError(f"initial {name} data is negative (min {low:.3e})")
    return np.maximum(vals, 0.0)


def _potential(p: Field, n: Field, fixed_charge: Optional[Field],
               solver: PoissonSolver):
    rhs = p.values - n.values
    if fixed_charge is not None:
        rhs = rhs + fixed_charge.values
    return solver.solve(Field._wrap(p.grid, rhs))


def _sample_source(grid: Grid, fn: Optional[SourceFn], t: float, coords):
    if fn is None:
        return None
    return np.asarray(fn(t, *coords), dtype=float)


def first_step(state: SimulationState, cfg: SchemeConfig,
               solver: PoissonSolver) -> SimulationState:
    """Backward Euler startup step (k: 0 -> 1)."""
    if state.k != 0:
        raise ValueError("first_step requires a freshly initialized state")
    grid = state.p.grid
    coords = grid.meshgrid()
    t1 = cfg.tau
    inv_tau = 1.0 / cfg.tau

    drift_p = div_avg_grad(state.p, state.phi).values
    drift_n = div_avg_grad(state.n, state.phi).values
    rhs_p = inv_tau * state.p.values + drift_p
    rhs_n = inv_tau * state.n.values - drift_n
    fp = _sample_source(grid, cfg.source_p, t1, coords)
    fn_ = _sample_source(grid, cfg.source_n, t1, coords)
    if fp is not None:
        rhs_p = rhs_p + fp
    if fn_ is not None:
        rhs_n = rhs_n + fn_
    p_tilde = solver.solve_helmholtz(inv_tau, Field._wrap(grid, rhs_p))
    n_tilde = solver.solve_helmholtz(inv_tau, Field._wrap(grid, rhs_n))
    return _accept(state, cfg, solver, p_tilde, n_tilde)


def cn_ab_step(state: SimulationState, cfg: SchemeConfig,
               solver: PoissonSolver) -> SimulationState:
    """Crank-Nicolson step with extrapolated drift (k -> k+1, k >= 1)."""
    if state.k < 1:
        raise ValueError("cn_ab_step requires at least one completed step")
    grid = state.p.grid
    coords = grid.meshgrid()
    t_k = state.k * cfg.tau
    t_next = t_k + cfg.tau
    two_over_tau = 2.0 / cfg.tau

    p_star = Field._wrap(grid, 1.5 * state.p.values - 0.5 * state.p_prev.values)
    n_star = Field._wrap(grid, 1.5 * state.n.values - 0.5 * state.n_prev.values)
    phi_star = Field._wrap(
        grid, 1.5 * state.phi.values - 0.5 * state.phi_prev.values
    )

    drift_p = div_avg_grad(p_star, phi_star).values
    drift_n = div_avg_grad(n_star, phi_star).values
    rhs_p = (
        two_over_tau * state.p.values
        + laplacian_array(grid, state.p.values)
        + 2.0 * drift_p
    )
    rhs_n = (
        two_over_tau * state.n.values
        + laplacian_array(grid, state.n.values)
        - 2.0 * drift_n
    )
    t_half = t_k + 0.5 * cfg.tau
    fp_h = _sample_source(grid, cfg.source_p, t_half, coords)
    if fp_h is not None:
        rhs_p = rhs_p + 2.0 * fp_h
    fn_h = _sample_source(grid, cfg.source_n, t_half, coords)
    if fn_h is not None:
        rhs_n = rhs_n + 2.0 * fn_h
    p_tilde = solver.solve_helmholtz(two_over_tau, Field._wrap(grid, rhs_p))
    n_tilde = solver.solve_helmholtz(two_over_tau, Field._wrap(grid, rhs_n))
    return _accept(state, cfg, solver, p_tilde, n_tilde)


def correct(p_tilde: Field, n_tilde: Field, mass_p: float, mass_n: float,
            variant: ProjectionVariant, solver: PoissonSolver):
    """Project both predictor fields onto their constraint sets."""
    if isinstance(variant, H1Projection):
        stats_p = project_h1(p_tilde, mass_p, variant, solver)
        stats_n = project_h1(n_tilde, mass_n, variant, solver)
    else:
        stats_p = project_l2(p_tilde, mass_p, variant)
        stats_n = project_l2(n_tilde, mass_n, variant)
    return stats_p, stats_n


def update_potential(state: SimulationState, cfg: SchemeConfig,
                     solver: PoissonSolver) -> SimulationState:
    """Recompute the zero-mean potential from the corrected densities."""
    phi, defect = _potential(state.p, state.n, cfg.fixed_charge, solver)
    state.phi = phi
    state.rhs_defect = defect
    return state


def _accept(state: SimulationState, cfg: SchemeConfig, solver: PoissonSolver,
            p_tilde: Field, n_tilde: Field) -> SimulationState:
    stats_p, stats_n = correct(
        p_tilde, n_tilde, state.mass_p, state.mass_n, cfg.variant, solver
    )
    state.p_prev, state.n_prev, state.phi_prev = state.p, state.n, state.phi
    state.p, state.n = stats_p.corrected, stats_n.corrected
    state.stats_p, state.stats_n = stats_p, stats_n
    state.k += 1
    return update_potential(state, cfg, solver)


def run(grid: Grid, p0, n0, cfg: SchemeConfig, observers=(),
        solver: Optional[PoissonSolver] = None):
    """Advance from t = 0 to t_final; returns the final state and records.

    The record list starts with a step-0 entry; observers are invoked once
    per accepted step with (t, state, record).
    """
    solver = solver or PoissonSolver(grid)
    min_h = min(grid.h)
    if cfg.tau > cfg.cfl_ratio_warn * min_h:
        warnings.warn(
            f"tau = {cfg.tau:.3e} exceeds {cfg.cfl_ratio_warn:g} * h = "
            f"{cfg.cfl_ratio_warn * min_h:.3e}; the scheme's step-size "
            "condition is violated",
            stacklevel=2,
        )
    state = initialize(grid, p0, n0, cfg, solver)
    records = [diagnostics.record_from_state(0.0, state)]
    for k in range(cfg.num_steps):
        if k == 0:
            state = first_step(state, cfg, solver)
        else:
            state = cn_ab_step(state, cfg, solver)
        t = state.k * cfg.tau
        record = diagnostics.record_from_state(t, state)
        records.append(record)
        for obs in observers:
            obs(t, state, record)
    return state, records
