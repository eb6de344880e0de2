"""Experiment execution: single runs, convergence studies, artifact files.

A run writes diagnostics.csv (one row per step), optional field snapshots,
and summary.json.  A study executes one run per refinement level (levels
may run in parallel worker threads; the heavy kernels release the
interpreter lock) and writes rate_table.csv in the published column order.
All files are written atomically (temp file, then rename) and contain no
wall-clock data except the summary's wall_time_s entry, so reruns are
byte-identical apart from that one field.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import diagnostics, stepper
from .config import ExperimentConfig, config_to_document
from .grid import save_field
from .poisson import PoissonSolver
from .presets import build_runtime
from .projection import H1Projection


def _atomic_write(path: Path, writer):
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _atomic_text(path: Path, text: str):
    _atomic_write(path, lambda tmp: tmp.write_text(text))


class SnapshotWriter:
    """Dump p, n, phi at the first accepted step at or past each time."""

    def __init__(self, times, out_dir: Path):
        self.pending = sorted(t for t in times if t > 0.0)
        self.out_dir = out_dir
        self.written = []

    def __call__(self, t, state, record):
        due = False
        while self.pending and self.pending[0] <= t + 1e-12:
            self.pending.pop(0)
            due = True
        if due:
            self.dump(t, state)

    def dump(self, t, state):
        label = f"{t:.6g}"
        for name, field in (("p", state.p), ("n", state.n), ("phi", state.phi)):
            path = self.out_dir / f"snapshot_{name}_t{label}.csv"
            _atomic_write(path, lambda tmp, f=field: save_field(f, tmp))
            self.written.append(path.name)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Execute one configured run; returns the summary dictionary."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    setup = build_runtime(cfg)
    solver = PoissonSolver(setup.grid)

    started = time.perf_counter()
    snapshots = SnapshotWriter(cfg.snapshot_times, out)
    if any(t <= 1e-12 for t in cfg.snapshot_times):
        initial = stepper.initialize(
            setup.grid, setup.initial_p, setup.initial_n, setup.scheme, solver
        )
        snapshots.dump(0.0, initial)
    state, records = stepper.run(
        setup.grid,
        setup.initial_p,
        setup.initial_n,
        setup.scheme,
        observers=(snapshots,),
        solver=solver,
    )
    wall = time.perf_counter() - started

    _atomic_write(
        out / "diagnostics.csv",
        lambda tmp: diagnostics.write_diagnostics_csv(records, tmp),
    )

    summary = {
        "preset": cfg.preset,
        "config": config_to_document(cfg),
        "overrides": list(cfg.overrides),
        "steps": setup.scheme.num_steps,
        "mass_target": state.mass_p,
        "final_time": setup.scheme.t_final,
        "min_p_over_run": min(r.min_p for r in records),
        "min_n_over_run": min(r.min_n for r in records),
        "max_mass_drift_p": max(abs(r.mass_p - state.mass_p) for r in records),
        "max_mass_drift_n": max(abs(r.mass_n - state.mass_n) for r in records),
        "max_rhs_mean_defect": max(abs(r.rhs_mean_defect) for r in records),
        "peak_newton_iters_p": max(r.newton_iters_p for r in records),
        "peak_newton_iters_n": max(r.newton_iters_n for r in records),
        "energy_initial": records[0].energy_total,
        "energy_final": records[-1].energy_total,
        "snapshots": snapshots.written,
        "wall_time_s": wall,
    }
    if setup.exact is not None:
        report = diagnostics.error_vs_exact(state, setup.exact, setup.scheme.t_final)
        summary["final_errors"] = dataclasses.asdict(report)
    _atomic_text(
        out / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    return summary


def _run_level(cfg: ExperimentConfig, level):
    if cfg.study.refine == "temporal":
        setup = build_runtime(cfg, tau_override=float(level))
        param = float(level)
    else:
        setup = build_runtime(cfg, n_override=int(level))
        param = setup.grid.h[0]
    state, records = stepper.run(
        setup.grid, setup.initial_p, setup.initial_n, setup.scheme
    )
    report = diagnostics.error_vs_exact(state, setup.exact, setup.scheme.t_final)
    return param, report


def _rates(errors, params):
    if len(params) < 2:
        return []
    ratios = [params[i] / params[i + 1] for i in range(len(params) - 1)]
    return diagnostics.convergence_rates(errors, ratios)


def run_convergence_study(cfg: ExperimentConfig, workers: int = 1,
                          out_dir=None) -> dict:
    """Run every study level and write the error/rate table."""
    if cfg.study is None:
        raise ValueError("configuration has no study section")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = list(cfg.study.levels)

    started = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda lev: _run_level(cfg, lev), levels))
    else:
        results = [_run_level(cfg, lev) for lev in levels]
    wall = time.perf_counter() - started

    params = [param for param, _ in results]
    reports = [report for _, report in results]
    h1_variant = isinstance(cfg.variant, H1Projection)
    if h1_variant:
        errs_p = [r.h1_p for r in reports]
        errs_n = [r.h1_n for r in reports]
        errs_phi = [r.h1_phi for r in reports]
    else:
        errs_p = [r.l2_p for r in reports]
        errs_n = [r.l2_n for r in reports]
        errs_phi = [r.l2_phi for r in reports]

    _atomic_write(
        out / "rate_table.csv",
        lambda tmp: diagnostics.write_rate_table_csv(
            tmp, params, errs_p, errs_n, errs_phi
        ),
    )
    summary = {
        "preset": cfg.preset,
        "refine": cfg.study.refine,
        "error_norm": "h1" if h1_variant else "l2",
        "params": params,
        "levels": levels,
        "errors": [dataclasses.asdict(r) for r in reports],
        "rates_p": _rates(errs_p, params),
        "rates_n": _rates(errs_n, params),
        "rates_phi": _rates(errs_phi, params),
        "overrides": list(cfg.overrides),
        "wall_time_s": wall,
    }
    _atomic_text(
        out / "study_summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    return summary
