"""Preset experiment setups and their runtime construction.

Four presets reproduce the published experiments:

* ``example1_cnfdp`` / ``example1_cnfdp2``: manufactured smooth solution on
  the periodic unit square with source terms, corrected in L2 or H1; the
  default step/mesh match the figure run (tau = 5/300, 128^2 nodes, T = 5).
* ``example2_neumann``: two discontinuous charge blobs on [-2,2]^2 with
  homogeneous Neumann walls (tau = 4/200, 128^2 cells, run to the last
  snapshot time t = 1).
* ``example3_fixed_charge_3d``: neutral constant densities on the periodic
  cube [-1,1]^3 pulled apart by eight alternating fixed Gaussian charges
  at the corners of [-0.5, 0.5]^3 (tau = 2/100, 64^3 nodes, T = 2).

``custom`` runs constant initial data on a user-supplied grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import manufactured
from .grid import BoundaryType, Grid
from .stepper import SchemeConfig


@dataclass(frozen=True)
class RuntimeSetup:
    grid: Grid
    scheme: SchemeConfig
    initial_p: object
    initial_n: object
    exact: Optional[tuple]


def _variant_defaults(kind: str) -> dict:
    if kind == "h1":
        return {
            "kind": "h1",
            "newton_tol": 1e-9,
            "max_newton": 30,
            "inner_tol": 1e-10,
            "max_inner": 500,
        }
    return {"kind": "l2", "root_method": "newton", "max_iter": 100}


def defaults_for(preset: str) -> dict:
    """Document-shaped defaults merged beneath the user configuration."""
    common = {"output_dir": "out", "snapshot_times": [], "scheme": {"cfl_ratio_warn": 1.0}}
    if preset in ("example1_cnfdp", "example1_cnfdp2"):
        kind = "h1" if preset.endswith("2") else "l2"
        doc = {
            "grid": {
                "lower": [0.0, 0.0],
                "upper": [1.0, 1.0],
                "n": [128, 128],
                "bc": "periodic",
            },
            "scheme": {
                "tau": 5.0 / 300.0,
                "t_final": 5.0,
                "variant": _variant_defaults(kind),
            },
        }
    elif preset == "example2_neumann":
        doc = {
            "grid": {
                "lower": [-2.0, -2.0],
                "upper": [2.0, 2.0],
                "n": [128, 128],
                "bc": "neumann",
            },
            "scheme": {
                "tau": 4.0 / 200.0,
                "t_final": 1.0,
                "variant": _variant_defaults("l2"),
            },
            "snapshot_times": [0.0, 0.04, 0.2, 1.0],
        }
    elif preset == "example3_fixed_charge_3d":
        doc = {
            "grid": {
                "lower": [-1.0, -1.0, -1.0],
                "upper": [1.0, 1.0, 1.0],
                "n": [64, 64, 64],
                "bc": "periodic",
            },
            "scheme": {
                "tau": 2.0 / 100.0,
                "t_final": 2.0,
                "variant": _variant_defaults("l2"),
            },
            "snapshot_times": [0.0, 0.01, 0.05, 2.0],
        }
    elif preset == "custom":
        doc = {"scheme": {"variant": _variant_defaults("l2")}}
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return _merge(common, doc)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def blob_initial_p(x, y):
    """Discontinuous initial positive-ion density of the Neumann example."""
    first = (x - 0.5) ** 2 + (y - 0.5) ** 2 <= 0.25
    second = (x + 0.5) ** 2 + (y + 0.5) ** 2 <= 0.25
    return np.where(first, 1.0, np.where(second, 0.5, 0.0))


def blob_initial_n(x, y):
    first = (x - 0.5) ** 2 + (y - 0.5) ** 2 <= 0.25
    second = (x + 0.5) ** 2 + (y + 0.5) ** 2 <= 0.25
    return np.where(first, 0.5, np.where(second, 1.0, 0.0))


def fixed_charge_density(x, y, z):
    """Eight alternating Gaussian charges at the corners of [-0.5, 0.5]^3."""
    total = np.zeros(np.broadcast(x, y, z).shape)
    for ex in (-1.0, 1.0):
        for ey in (-1.0, 1.0):
            for ez in (-1.0, 1.0):
                bump = np.exp(
                    -100.0 * (
                        (x + 0.5 * ex) ** 2
                        + (y + 0.5 * ey) ** 2
                        + (z + 0.5 * ez) ** 2
                    )
                )
                total += ex * ey * ez * bump
    return 200.0 * total


def build_runtime(cfg, tau_override: float | None = None,
                  n_override: int | None = None) -> RuntimeSetup:
    """Materialize grid, scheme and initial data from a parsed config."""
    n = cfg.grid.n if n_override is None else (n_override,) * len(cfg.grid.n)
    grid = Grid(
        lower=cfg.grid.lower,
        upper=cfg.grid.upper,
        n=n,
        bc=BoundaryType(cfg.grid.bc),
    )
    tau = cfg.tau if tau_override is None else tau_override

    source_p = source_n = None
    fixed_charge = None
    exact = None
    if cfg.preset in ("example1_cnfdp", "example1_cnfdp2"):
        source_p = manufactured.source_p
        source_n = manufactured.source_n
        exact = manufactured.exact_triple()
        initial_p = lambda x, y: manufactured.exact_p(0.0, x, y)
        initial_n = lambda x, y: manufactured.exact_n(0.0, x, y)
    elif cfg.preset == "example2_neumann":
        initial_p = blob_initial_p
        initial_n = blob_initial_n
    elif cfg.preset == "example3_fixed_charge_3d":
        fixed_charge = grid.sample(fixed_charge_density)
        initial_p = lambda x, y, z: np.full(np.shape(x), 0.1)
        initial_n = lambda x, y, z: np.full(np.shape(x), 0.1)
    else:  # custom
        p_const = cfg.initial_p_constant
        n_const = cfg.initial_n_constant
        initial_p = lambda *coords: np.full(np.shape(coords[0]), p_const)
        initial_n = lambda *coords: np.full(np.shape(coords[0]), n_const)

    scheme = SchemeConfig(
        tau=tau,
        t_final=cfg.t_final,
        variant=cfg.variant,
        source_p=source_p,
        source_n=source_n,
        fixed_charge=fixed_charge,
        cfl_ratio_warn=cfg.cfl_ratio_warn,
    )
    return RuntimeSetup(
        grid=grid,
        scheme=scheme,
        initial_p=initial_p,
        initial_n=initial_n,
        exact=exact,
    )
