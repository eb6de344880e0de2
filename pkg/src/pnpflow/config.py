"""Experiment configuration: JSON parsing, validation, canonical output.

A configuration document selects a preset, optionally overrides its grid
and scheme parameters, and may attach a convergence study, snapshot times
and an output directory.  Validation is exhaustive: every violation in the
document is collected and reported at once, each message naming the
offending key and values.  The canonical serialized form spells out every
field, so serialize(parse(text)) is idempotent and byte-stable.

The published JSON Schema for the document lives in schema/config.schema.json
at the repository root; the test suite keeps it in sync with this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .projection import H1Projection, L2Projection, ProjectionVariant

TOP_LEVEL_KEYS = {
    "preset", "grid", "scheme", "initial", "study",
    "output_dir", "snapshot_times",
}
GRID_KEYS = {"lower", "upper", "n", "bc"}
SCHEME_KEYS = {"tau", "t_final", "variant", "cfl_ratio_warn"}
VARIANT_KEYS_L2 = {"kind", "root_method", "max_iter"}
VARIANT_KEYS_H1 = {"kind", "newton_tol", "max_newton", "inner_tol", "max_inner"}
INITIAL_KEYS = {"p_constant", "n_constant"}
STUDY_KEYS = {"refine", "levels"}

PRESET_NAMES = (
    "example1_cnfdp",
    "example1_cnfdp2",
    "example2_neumann",
    "example3_fixed_charge_3d",
    "custom",
)
# presets carrying an exact solution, hence eligible for studies
PRESETS_WITH_EXACT = ("example1_cnfdp", "example1_cnfdp2")


class ConfigError(ValueError):
    """Invalid configuration; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class GridSpec:
    lower: tuple
    upper: tuple
    n: tuple
    bc: str


@dataclass(frozen=True)
class StudySpec:
    refine: str
    levels: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    grid: GridSpec
    tau: float
    t_final: float
    variant: ProjectionVariant
    cfl_ratio_warn: float
    initial_p_constant: Optional[float]
    initial_n_constant: Optional[float]
    study: Optional[StudySpec]
    output_dir: str
    snapshot_times: tuple
    overrides: tuple  # dotted keys that differ from the preset defaults


def _deep_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def _flat_map(doc: dict) -> dict:
    flat = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            for sub, subval in _flat_map(val).items():
                flat[f"{key}.{sub}"] = subval
        else:
            flat[key] = val
    return flat


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_number(doc, key, path, bag, *, required=False, positive=False):
    if key not in doc or doc[key] is None:
        if required:
            bag.append(f"{path}{key}: required value is missing")
        return None
    val = doc[key]
    if not _is_number(val):
        bag.append(f"{path}{key}: expected a number, got {val!r}")
        return None
    if positive and val <= 0:
        bag.append(f"{path}{key}: must be positive, got {val!r}")
        return None
    return float(val)


def _check_int(doc, key, path, bag, *, minimum=None):
    if key not in doc or doc[key] is None:
        return None
    val = doc[key]
    if not isinstance(val, int) or isinstance(val, bool):
        bag.append(f"{path}{key}: expected an integer, got {val!r}")
        return None
    if minimum is not None and val < minimum:
        bag.append(f"{path}{key}: must be at least {minimum}, got {val}")
        return None
    return val


def _unknown_keys(doc, allowed, path, bag):
    for key in sorted(set(doc) - allowed):
        bag.append(f"{path}{key}: unknown key")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON configuration document.

    Raises ConfigError carrying every violation found; returns the fully
    defaulted configuration otherwise.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["top level: expected a JSON object"])

    bag: list = []
    _unknown_keys(doc, TOP_LEVEL_KEYS, "", bag)

    preset = doc.get("preset")
    if preset is None:
        bag.append("preset: required value is missing")
    elif preset not in PRESET_NAMES:
        bag.append(
            f"preset: unknown preset {preset!r}; expected one of {PRESET_NAMES}"
        )
    if bag and (preset is None or preset not in PRESET_NAMES):
        raise ConfigError(bag)

    from .presets import defaults_for  # deferred; presets does not import us

    defaults = defaults_for(preset)
    merged = _deep_merge(defaults, {k: v for k, v in doc.items() if k != "preset"})

    grid_spec = _parse_grid(merged.get("grid"), preset, bag)
    tau, t_final, variant, cfl = _parse_scheme(merged.get("scheme"), bag)
    initial_p, initial_n = _parse_initial(merged.get("initial"), preset, bag)
    study = _parse_study(merged.get("study"), preset, tau, t_final, bag)
    snapshot_times = _parse_snapshots(merged.get("snapshot_times"), t_final, bag)

    output_dir = merged.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        bag.append(f"output_dir: expected a nonempty string, got {output_dir!r}")
        output_dir = "out"

    if tau is not None and t_final is not None:
        steps = round(t_final / tau)
        if steps < 1 or abs(steps * tau - t_final) > 1e-9 * max(tau, t_final):
            bag.append(
                f"scheme.t_final: {t_final} is not an integer multiple of "
                f"scheme.tau {tau}"
            )

    if bag:
        raise ConfigError(sorted(bag))

    overrides = _collect_overrides(defaults, doc)
    return ExperimentConfig(
        preset=preset,
        grid=grid_spec,
        tau=tau,
        t_final=t_final,
        variant=variant,
        cfl_ratio_warn=cfl,
        initial_p_constant=initial_p,
        initial_n_constant=initial_n,
        study=study,
        output_dir=output_dir,
        snapshot_times=snapshot_times,
        overrides=overrides,
    )


def _parse_grid(grid_doc, preset, bag) -> Optional[GridSpec]:
    if grid_doc is None:
        bag.append("grid: required for the custom preset")
        return None
    if not isinstance(grid_doc, dict):
        bag.append(f"grid: expected an object, got {grid_doc!r}")
        return None
    _unknown_keys(grid_doc, GRID_KEYS, "grid.", bag)
    ok = True

    def axis_list(key, caster, minval=None):
        nonlocal ok
        val = grid_doc.get(key)
        if not isinstance(val, list) or not val or len(val) > 3:
            bag.append(f"grid.{key}: expected a list of 1 to 3 values, got {val!r}")
            ok = False
            return None
        out = []
        for item in val:
            good = (
                isinstance(item, int)
                if caster is int
                else _is_number(item)
            ) and not isinstance(item, bool)
            if not good or (minval is not None and item < minval):
                bag.append(f"grid.{key}: bad entry {item!r}")
                ok = False
                return None
            out.append(caster(item))
        return tuple(out)

    lower = axis_list("lower", float)
    upper = axis_list("upper", float)
    n = axis_list("n", int, minval=2)
    bc = grid_doc.get("bc")
    if bc not in ("periodic", "neumann"):
        bag.append(f"grid.bc: expected 'periodic' or 'neumann', got {bc!r}")
        ok = False
    if not ok:
        return None
    if not (len(lower) == len(upper) == len(n)):
        bag.append(
            f"grid: lower/upper/n lengths differ ({len(lower)}, {len(upper)}, {len(n)})"
        )
        return None
    if any(b <= a for a, b in zip(lower, upper)):
        bag.append(f"grid: upper {list(upper)} must exceed lower {list(lower)}")
        return None
    if bc == "neumann" and len(n) != 2:
        bag.append("grid.bc: neumann boundaries require a 2D grid")
        return None
    return GridSpec(lower=lower, upper=upper, n=n, bc=bc)


def _parse_scheme(scheme_doc, bag):
    if not isinstance(scheme_doc, dict):
        bag.append(f"scheme: expected an object, got {scheme_doc!r}")
        return None, None, None, 1.0
    _unknown_keys(scheme_doc, SCHEME_KEYS, "scheme.", bag)
    tau = _check_number(scheme_doc, "tau", "scheme.", bag, required=True, positive=True)
    t_final = _check_number(
        scheme_doc, "t_final", "scheme.", bag, required=True, positive=True
    )
    cfl = _check_number(scheme_doc, "cfl_ratio_warn", "scheme.", bag, positive=True)
    if cfl is None:
        cfl = 1.0
    variant = _parse_variant(scheme_doc.get("variant"), bag)
    return tau, t_final, variant, cfl


def _parse_variant(vdoc, bag) -> Optional[ProjectionVariant]:
    if vdoc is None:
        return L2Projection()
    if not isinstance(vdoc, dict):
        bag.append(f"scheme.variant: expected an object, got {vdoc!r}")
        return None
    kind = vdoc.get("kind")
    if kind == "l2":
        _unknown_keys(vdoc, VARIANT_KEYS_L2, "scheme.variant.", bag)
        method = vdoc.get("root_method", "newton")
        if method not in ("newton", "secant"):
            bag.append(
                f"scheme.variant.root_method: expected 'newton' or 'secant', "
                f"got {method!r}"
            )
            return None
        max_iter = _check_int(vdoc, "max_iter", "scheme.variant.", bag, minimum=1)
        return L2Projection(root_method=method, max_iter=max_iter or 100)
    if kind == "h1":
        _unknown_keys(vdoc, VARIANT_KEYS_H1, "scheme.variant.", bag)
        newton_tol = _check_number(
            vdoc, "newton_tol", "scheme.variant.", bag, positive=True
        )
        inner_tol = _check_number(
            vdoc, "inner_tol", "scheme.variant.", bag, positive=True
        )
        max_newton = _check_int(vdoc, "max_newton", "scheme.variant.", bag, minimum=1)
        max_inner = _check_int(vdoc, "max_inner", "scheme.variant.", bag, minimum=1)
        return H1Projection(
            newton_tol=newton_tol if newton_tol is not None else 1e-9,
            max_newton=max_newton or 30,
            inner_tol=inner_tol if inner_tol is not None else 1e-10,
            max_inner=max_inner or 500,
        )
    bag.append(f"scheme.variant.kind: expected 'l2' or 'h1', got {kind!r}")
    return None


def _parse_initial(idoc, preset, bag):
    if idoc is None:
        if preset == "custom":
            bag.append("initial: required for the custom preset")
        return None, None
    if preset != "custom":
        bag.append(f"initial: preset {preset!r} fixes its own initial data")
        return None, None
    if not isinstance(idoc, dict):
        bag.append(f"initial: expected an object, got {idoc!r}")
        return None, None
    _unknown_keys(idoc, INITIAL_KEYS, "initial.", bag)
    p_const = _check_number(
        idoc, "p_constant", "initial.", bag, required=True, positive=True
    )
    n_const = _check_number(
        idoc, "n_constant", "initial.", bag, required=True, positive=True
    )
    return p_const, n_const


def _parse_study(sdoc, preset, tau, t_final, bag) -> Optional[StudySpec]:
    if sdoc is None:
        return None
    if not isinstance(sdoc, dict):
        bag.append(f"study: expected an object, got {sdoc!r}")
        return None
    if preset not in PRESETS_WITH_EXACT:
        bag.append(
            f"study: preset {preset!r} has no exact solution to measure against"
        )
        return None
    _unknown_keys(sdoc, STUDY_KEYS, "study.", bag)
    refine = sdoc.get("refine")
    if refine not in ("temporal", "spatial"):
        bag.append(f"study.refine: expected 'temporal' or 'spatial', got {refine!r}")
        return None
    levels = sdoc.get("levels")
    if not isinstance(levels, list) or not levels:
        bag.append(f"study.levels: expected a nonempty list, got {levels!r}")
        return None
    out = []
    for lev in levels:
        if refine == "temporal":
            if not _is_number(lev) or lev <= 0:
                bag.append(f"study.levels: bad step size {lev!r}")
                return None
            if t_final is not None:
                steps = round(t_final / lev)
                if steps < 1 or abs(steps * lev - t_final) > 1e-9 * max(lev, t_final):
                    bag.append(
                        f"study.levels: t_final {t_final} is not an integer "
                        f"multiple of level tau {lev}"
                    )
                    return None
            out.append(float(lev))
        else:
            if not isinstance(lev, int) or isinstance(lev, bool) or lev < 2:
                bag.append(f"study.levels: bad node count {lev!r}")
                return None
            out.append(int(lev))
    return StudySpec(refine=refine, levels=tuple(out))


def _parse_snapshots(times, t_final, bag) -> tuple:
    if times is None:
        return ()
    if not isinstance(times, list):
        bag.append(f"snapshot_times: expected a list, got {times!r}")
        return ()
    out = []
    for t in times:
        if not _is_number(t) or t < 0:
            bag.append(f"snapshot_times: bad time {t!r}")
            return ()
        if t_final is not None and t > t_final + 1e-12:
            bag.append(f"snapshot_times: time {t} is beyond t_final {t_final}")
            return ()
        out.append(float(t))
    return tuple(sorted(out))


def _collect_overrides(defaults: dict, doc: dict) -> tuple:
    """Dotted keys the user set to something other than the preset default."""
    flat_defaults = _flat_map(defaults)
    flat_doc = _flat_map({k: v for k, v in doc.items() if k != "preset"})
    out = []
    for key, val in sorted(flat_doc.items()):
        if key not in flat_defaults or flat_defaults[key] != val:
            out.append(f"{key}={json.dumps(val)}")
    return tuple(out)


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical JSON text with every field explicit and keys sorted."""
    return json.dumps(config_to_document(cfg), sort_keys=True, indent=2) + "\n"


def config_to_document(cfg: ExperimentConfig) -> dict:
    if isinstance(cfg.variant, H1Projection):
        variant = {
            "kind": "h1",
            "newton_tol": cfg.variant.newton_tol,
            "max_newton": cfg.variant.max_newton,
            "inner_tol": cfg.variant.inner_tol,
            "max_inner": cfg.variant.max_inner,
        }
    else:
        variant = {
            "kind": "l2",
            "root_method": cfg.variant.root_method,
            "max_iter": cfg.variant.max_iter,
        }
    doc = {
        "preset": cfg.preset,
        "grid": {
            "lower": list(cfg.grid.lower),
            "upper": list(cfg.grid.upper),
            "n": list(cfg.grid.n),
            "bc": cfg.grid.bc,
        },
        "scheme": {
            "tau": cfg.tau,
            "t_final": cfg.t_final,
            "variant": variant,
            "cfl_ratio_warn": cfg.cfl_ratio_warn,
        },
        "output_dir": cfg.output_dir,
        "snapshot_times": list(cfg.snapshot_times),
    }
    if cfg.initial_p_constant is not None:
        doc["initial"] = {
            "p_constant": cfg.initial_p_constant,
            "n_constant": cfg.initial_n_constant,
        }
    if cfg.study is not None:
        doc["study"] = {
            "refine": cfg.study.refine,
            "levels": list(cfg.study.levels),
        }
    return doc


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply CLI key=value assignments (dotted paths, JSON-parsed values)."""
    out = json.loads(json.dumps(doc))  # deep copy
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError([f"override {item!r}: expected key=value"])
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out
