"""Per-step observables, error norms against exact solutions, and tables.

Quantities tracked per step: species masses (conserved exactly by the
projection), pointwise bounds, the discrete free energy

    E = <p ln p + n ln n, 1> + (1/2) |grad phi|^2,

its electric part, the two mass multipliers, projection iteration counts,
and the Poisson right-hand-side mean defect.  The entropy integrand uses
the continuous extension 0 ln 0 = 0 (values at or below 1e-300 contribute
nothing).

CSV emission uses repr-formatted floats, so identical runs produce
byte-identical files and parsing them back is lossless.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from .grid import (
    Field,
    integral,
    norm_h1,
    norm_l2,
    norm_linf,
    seminorm_h1,
    shift_to_zero_mean,
)

DIAGNOSTICS_COLUMNS = (
    "t", "mass_p", "mass_n", "min_p", "max_p", "min_n", "max_n",
    "energy_total", "energy_electric", "xi", "gamma",
    "newton_iters_p", "newton_iters_n", "rhs_mean_defect",
)

RATE_TABLE_COLUMNS = (
    "param", "error_p", "rate_p", "error_n", "rate_n", "error_phi", "rate_phi",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_p: float
    mass_n: float
    min_p: float
    max_p: float
    min_n: float
    max_n: float
    energy_total: float
    energy_electric: float
    xi: float
    gamma: float
    newton_iters_p: int
    newton_iters_n: int
    rhs_mean_defect: float


@dataclass(frozen=True)
class ErrorReport:
    l2_p: float
    l2_n: float
    l2_phi: float
    h1_p: float
    h1_n: float
    h1_phi: float
    linf_phi: float
    h1semi_phi: float


def _entropy(u: Field) -> float:
    vals = u.values
    safe = np.clip(vals, 1e-300, None)
    integrand = np.where(vals > 1e-300, vals * np.log(safe), 0.0)
    return u.grid.cell_volume * float(np.sum(integrand))


def energies(state):
    """Total free energy and its electric part for a simulation state."""
    electric = 0.5 * seminorm_h1(state.phi) ** 2
    total = _entropy(state.p) + _entropy(state.n) + electric
    return total, electric


def record_from_state(t: float, state) -> DiagnosticsRecord:
    total, electric = energies(state)
    xi = state.stats_p.multiplier_scalar if state.stats_p else 0.0
    gamma = state.stats_n.multiplier_scalar if state.stats_n else 0.0
    iters_p = state.stats_p.iterations if state.stats_p else 0
    iters_n = state.stats_n.iterations if state.stats_n else 0
    return DiagnosticsRecord(
        t=t,
        mass_p=integral(state.p),
        mass_n=integral(state.n),
        min_p=float(np.min(state.p.values)),
        max_p=float(np.max(state.p.values)),
        min_n=float(np.min(state.n.values)),
        max_n=float(np.max(state.n.values)),
        energy_total=total,
        energy_electric=electric,
        xi=xi,
        gamma=gamma,
        newton_iters_p=iters_p,
        newton_iters_n=iters_n,
        rhs_mean_defect=state.rhs_defect,
    )


def error_vs_exact(state, exact, t: float) -> ErrorReport:
    """Norms of (numerical - nodal interpolant of exact) at time t.

    exact is a triple of callables (p_e, n_e, phi_e) taking (t, *coords).
    The potential reference is shifted to zero discrete mean before
    comparison so both sides live in the gauge space.
    """
    p_e, n_e, phi_e = exact
    grid = state.p.grid
    coords = grid.meshgrid()
    pe = Field._wrap(grid, np.asarray(p_e(t, *coords), dtype=float))
    ne = Field._wrap(grid, np.asarray(n_e(t, *coords), dtype=float))
    fe = shift_to_zero_mean(
        Field._wrap(grid, np.asarray(phi_e(t, *coords), dtype=float))
    )
    diff_p = Field._wrap(grid, state.p.values - pe.values)
    diff_n = Field._wrap(grid, state.n.values - ne.values)
    diff_f = Field._wrap(grid, state.phi.values - fe.values)
    return ErrorReport(
        l2_p=norm_l2(diff_p),
        l2_n=norm_l2(diff_n),
        l2_phi=norm_l2(diff_f),
        h1_p=norm_h1(diff_p),
        h1_n=norm_h1(diff_n),
        h1_phi=norm_h1(diff_f),
        linf_phi=norm_linf(diff_f),
        h1semi_phi=seminorm_h1(diff_f),
    )


def convergence_rates(errors, ratios) -> list:
    """Observed orders: rate_i = ln(e_i/e_{i+1}) / ln(r_i).

    ratios may be a single refinement factor or one factor per interval.
    """
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two error values")
    if any(e <= 0 for e in errors):
        raise ValueError("errors must be positive")
    if np.isscalar(ratios):
        ratios = [float(ratios)] * (len(errors) - 1)
    else:
        ratios = [float(r) for r in ratios]
        if len(ratios) != len(errors) - 1:
            raise ValueError("need one ratio per consecutive error pair")
    if any(r <= 0 or r == 1.0 for r in ratios):
        raise ValueError("refinement ratios must be positive and not 1")
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(ratios[i])
        for i in range(len(errors) - 1)
    ]


def _format(value):
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_diagnostics_csv(records, path):
    """One row per record, columns in DIAGNOSTICS_COLUMNS order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTICS_COLUMNS)
        for rec in records:
            writer.writerow(
                _format(getattr(rec, name)) for name in DIAGNOSTICS_COLUMNS
            )


def read_diagnostics_csv(path):
    """Inverse of write_diagnostics_csv."""
    out = []
    types = {f.name: f.type for f in fields(DiagnosticsRecord)}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kwargs = {}
            for name in DIAGNOSTICS_COLUMNS:
                caster = int if types[name] == "int" else float
                kwargs[name] = caster(row[name])
            out.append(DiagnosticsRecord(**kwargs))
    return out


def write_rate_table_csv(path, params, errors_p, errors_n, errors_phi, ratios=None):
    """Error/rate table mirroring the convergence-study layout.

    params label the rows (step sizes or mesh sizes).  Rates are computed
    between consecutive rows when at least two are present; the first rate
    cell of each column is left empty.  ratios defaults to the successive
    ratios of params (refinement by halving gives 2).
    """
    m = len(params)
    if not (len(errors_p) == len(errors_n) == len(errors_phi) == m):
        raise ValueError("all error columns must match the number of params")
    if m >= 2:
        if ratios is None:
            ratios = [params[i] / params[i + 1] for i in range(m - 1)]
        rate_p = convergence_rates(errors_p, ratios)
        rate_n = convergence_rates(errors_n, ratios)
        rate_phi = convergence_rates(errors_phi, ratios)
    else:
        rate_p = rate_n = rate_phi = []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATE_TABLE_COLUMNS)
        for i in range(m):
            row = [
                _format(float(params[i])),
                _format(float(errors_p[i])),
                "" if i == 0 else _format(rate_p[i - 1]),
                _format(float(errors_n[i])),
                "" if i == 0 else _format(rate_n[i - 1]),
                _format(float(errors_phi[i])),
                "" if i == 0 else _format(rate_phi[i - 1]),
            ]
            writer.writerow(row)
