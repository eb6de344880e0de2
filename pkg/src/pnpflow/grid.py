"""Uniform tensor-product grids and the discrete operators built on them.

Nodes, spaces and stencils
--------------------------
Periodic grids store one value per unique node, ``x_i = lower + i*h`` for
``i = 0..N-1``; the wrap node ``x_N`` is identified with ``x_0`` and never
stored.  Homogeneous-Neumann grids (2D only) place nodes at cell centers,
``x_i = lower + (i + 1/2)*h``, and close stencils with ghost values equal to
the adjacent interior value, which zeroes the boundary flux.

Two ghost rules coexist for the Neumann case and both are deliberate:

* scalar operators (``average``, ``diff_backward``, ``diff_forward``)
  replicate the edge value across the wall, so one-sided derivatives vanish
  there;
* conservation-form compositions (``divergence_plus``, ``laplacian``,
  ``div_avg_grad``) treat their argument as face-flux data and close the
  forward difference with a trailing zero flux.  This is what makes
  ``<laplacian(u), 1> = 0`` and the summation-by-parts identities exact
  rather than O(h) accurate.

Index layout: arrays are stored with shape ``n`` in C order; serialized
snapshots list values with axis 0 varying fastest (column-major flattening),
so dumps are reproducible byte for byte.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryType(enum.Enum):
    PERIODIC = "periodic"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product mesh in 1, 2 or 3 dimensions.

    Parameters
    ----------
    lower, upper : tuple of float
        Per-axis domain bounds.
    n : tuple of int
        Per-axis count of unique nodes (the periodic wrap node is not
        counted twice).
    bc : BoundaryType
        Boundary closure; NEUMANN is only supported in 2D.
    """

    lower: tuple
    upper: tuple
    n: tuple
    bc: BoundaryType = BoundaryType.PERIODIC

    def __post_init__(self):
        lower = tuple(float(a) for a in np.atleast_1d(self.lower))
        upper = tuple(float(b) for b in np.atleast_1d(self.upper))
        n = tuple(int(m) for m in np.atleast_1d(self.n))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "n", n)
        if not (len(lower) == len(upper) == len(n)):
            raise ValueError("lower, upper and n must have equal lengths")
        if len(n) not in (1, 2, 3):
            raise ValueError("only 1, 2 or 3 dimensions are supported")
        if any(m < 2 for m in n):
            raise ValueError("need at least 2 nodes per axis")
        if any(b <= a for a, b in zip(lower, upper)):
            raise ValueError("upper bounds must exceed lower bounds")
        if self.bc is BoundaryType.NEUMANN and len(n) != 2:
            raise ValueError("Neumann boundaries are only supported in 2D")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple:
        return tuple((b - a) / m for a, b, m in zip(self.lower, self.upper, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def measure(self) -> float:
        """Measure of the domain, |Omega|."""
        return float(np.prod([b - a for a, b in zip(self.lower, self.upper)]))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    def nodes(self, axis: int) -> np.ndarray:
        """Unique node coordinates along one axis."""
        a = self.lower[axis]
        h = self.h[axis]
        idx = np.arange(self.n[axis], dtype=float)
        if self.bc is BoundaryType.NEUMANN:
            return a + (idx + 0.5) * h
        return a + idx * h

    def meshgrid(self):
        """Coordinate arrays shaped like field values (ij indexing)."""
        axes = [self.nodes(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def sample(self, fn) -> "Field":
        """Nodal interpolant of a function of the space coordinates."""
        return Field(self, np.asarray(fn(*self.meshgrid()), dtype=float))


def _frozen(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


@dataclass(frozen=True)
class Field:
    """Grid function: one real value per unique node.

    The values array is copied on construction and frozen; all operations
    below return new Fields, so Fields behave as immutable values.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.n:
            if vals.size != self.grid.num_nodes:
                raise ValueError(
                    f"field size {vals.size} does not match grid {self.grid.n}"
                )
            vals = vals.reshape(self.grid.n)
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def _wrap(cls, grid: Grid, values: np.ndarray) -> "Field":
        # internal fast path: take ownership of a freshly built array
        obj = object.__new__(cls)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", _frozen(values))
        return obj

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls._wrap(grid, np.zeros(grid.n))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "Field":
        return cls._wrap(grid, np.full(grid.n, float(value)))


@dataclass(frozen=True)
class VectorField:
    """One Field per axis; the components of a discrete gradient."""

    grid: Grid
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise ValueError("component count must equal grid dimension")
        for c in self.components:
            _check_same_grid(c.grid, self.grid)


def _check_same_grid(a: Grid, b: Grid):
    if a is not b and a != b:
        raise ValueError("fields live on different grids")


def _check_axis(grid: Grid, axis: int):
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {grid.dim}")


def _shift_down(vals: np.ndarray, axis: int, bc: BoundaryType) -> np.ndarray:
    """Array of u_{i-1} values: leading ghost wraps or replicates the edge."""
    if bc is BoundaryType.PERIODIC:
        return np.roll(vals, 1, axis=axis)
    lead = [slice(None)] * vals.ndim
    body = [slice(None)] * vals.ndim
    lead[axis] = slice(0, 1)
    body[axis] = slice(0, -1)
    return np.concatenate([vals[tuple(lead)], vals[tuple(body)]], axis=axis)


def _shift_up(vals: np.ndarray, axis: int, bc: BoundaryType) -> np.ndarray:
    """Array of u_{i+1} values: trailing ghost wraps or replicates the edge."""
    if bc is BoundaryType.PERIODIC:
        return np.roll(vals, -1, axis=axis)
    tail = [slice(None)] * vals.ndim
    body = [slice(None)] * vals.ndim
    tail[axis] = slice(-1, None)
    body[axis] = slice(1, None)
    return np.concatenate([vals[tuple(body)], vals[tuple(tail)]], axis=axis)


def _div_plus_axis(flux: np.ndarray, axis: int, grid: Grid) -> np.ndarray:
    """(g_{i+1} - g_i)/h for face-flux data g_i living at face i-1/2.

    The trailing ghost is the wrap value (periodic) or zero (Neumann: the
    upper wall carries no flux).  This closure, not the scalar mirror, is
    what telescopes the divergence to zero over the domain.
    """
    if grid.bc is BoundaryType.PERIODIC:
        up = np.roll(flux, -1, axis=axis)
    else:
        body = [slice(None)] * flux.ndim
        body[axis] = slice(1, None)
        zeros_shape = list(flux.shape)
        zeros_shape[axis] = 1
        up = np.concatenate(
            [flux[tuple(body)], np.zeros(zeros_shape)], axis=axis
        )
    return (up - flux) / grid.h[axis]


def average(u: Field, axis: int) -> Field:
    """Backward averaging (A u)_i = (u_i + u_{i-1})/2 along one axis."""
    _check_axis(u.grid, axis)
    vals = u.values
    return Field._wrap(u.grid, 0.5 * (vals + _shift_down(vals, axis, u.grid.bc)))


def diff_backward(u: Field, axis: int) -> Field:
    """D- u = (u_i - u_{i-1})/h; zero at a Neumann wall."""
    _check_axis(u.grid, axis)
    vals = u.values
    h = u.grid.h[axis]
    return Field._wrap(u.grid, (vals - _shift_down(vals, axis, u.grid.bc)) / h)


def diff_forward(u: Field, axis: int) -> Field:
    """D+ u = (u_{i+1} - u_i)/h; zero at a Neumann wall."""
    _check_axis(u.grid, axis)
    vals = u.values
    h = u.grid.h[axis]
    return Field._wrap(u.grid, (_shift_up(vals, axis, u.grid.bc) - vals) / h)


def gradient_minus(u: Field) -> VectorField:
    """Backward-difference gradient; components are face fluxes."""
    comps = tuple(diff_backward(u, a) for a in range(u.grid.dim))
    return VectorField(u.grid, comps)


def divergence_plus(v: VectorField) -> Field:
    """Forward-difference divergence of face-flux components.

    Composed with gradient_minus this is exactly laplacian; under Neumann
    the trailing flux ghost is zero (see module docstring).
    """
    grid = v.grid
    out = np.zeros(grid.n)
    for axis, comp in enumerate(v.components):
        _check_same_grid(comp.grid, grid)
        out += _div_plus_axis(comp.values, axis, grid)
    return Field._wrap(grid, out)


def laplacian_array(grid: Grid, vals: np.ndarray) -> np.ndarray:
    """Discrete Laplacian on a raw values array (shape grid.n)."""
    out = np.zeros(grid.n)
    for axis in range(grid.dim):
        flux = (vals - _shift_down(vals, axis, grid.bc)) / grid.h[axis]
        out += _div_plus_axis(flux, axis, grid)
    return out


def laplacian(u: Field) -> Field:
    """Discrete Laplacian, the 2*dim+1 point stencil with bc closure."""
    return Field._wrap(u.grid, laplacian_array(u.grid, u.values))


def div_avg_grad(w: Field, u: Field) -> Field:
    """Variable-coefficient elliptic stencil: sum_a D+( A_a(w) * D- u ).

    The coefficient field is averaged onto faces so the flux A_a(w)*D-u is
    a proper face quantity; conservation then telescopes exactly.
    """
    _check_same_grid(w.grid, u.grid)
    grid = u.grid
    out = np.zeros(grid.n)
    for axis in range(grid.dim):
        wbar = 0.5 * (w.values + _shift_down(w.values, axis, grid.bc))
        du = (u.values - _shift_down(u.values, axis, grid.bc)) / grid.h[axis]
        out += _div_plus_axis(wbar * du, axis, grid)
    return Field._wrap(grid, out)


def inner(u: Field, v: Field) -> float:
    """Discrete L2 inner product h^dim * sum(u*v)."""
    _check_same_grid(u.grid, v.grid)
    return u.grid.cell_volume * float(np.sum(u.values * v.values))


def integral(u: Field) -> float:
    """<u, 1>, the discrete mass."""
    return u.grid.cell_volume * float(np.sum(u.values))


def norm_l2(u: Field) -> float:
    return float(np.sqrt(u.grid.cell_volume) * np.linalg.norm(u.values.ravel()))


def norm_lp(u: Field, p: float) -> float:
    if p < 1:
        raise ValueError("norm_lp requires p >= 1")
    return float(
        (u.grid.cell_volume * np.sum(np.abs(u.values) ** p)) ** (1.0 / p)
    )


def norm_linf(u: Field) -> float:
    return float(np.max(np.abs(u.values)))


def seminorm_h1(u: Field) -> float:
    """L2 norm of the backward-difference gradient."""
    grid = u.grid
    acc = 0.0
    for axis in range(grid.dim):
        du = (u.values - _shift_down(u.values, axis, grid.bc)) / grid.h[axis]
        acc += np.sum(du * du)
    return float(np.sqrt(grid.cell_volume * acc))


def norm_h1(u: Field) -> float:
    return float(np.sqrt(norm_l2(u) ** 2 + seminorm_h1(u) ** 2))


def mean(u: Field) -> float:
    """Mean value <u,1>/|Omega|; zero for members of the gauge space."""
    return float(np.mean(u.values))


def shift_to_zero_mean(u: Field) -> Field:
    return Field._wrap(u.grid, u.values - np.mean(u.values))


# -- snapshot serialization ---------------------------------------------------

def save_field(u: Field, path):
    """Write a snapshot: text header, then one value per line.

    Values are listed with axis 0 varying fastest; floats are formatted
    with repr so reruns are byte-identical and reloads are exact.
    """
    g = u.grid
    lines = [
        f"# dim {g.dim}",
        "# n " + " ".join(str(m) for m in g.n),
        "# lower " + " ".join(repr(a) for a in g.lower),
        "# upper " + " ".join(repr(b) for b in g.upper),
        f"# bc {g.bc.value}",
    ]
    flat = u.values.ravel(order="F")
    lines.extend(repr(float(x)) for x in flat)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> Field:
    """Read a snapshot written by save_field."""
    header = {}
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, rest = line[1:].strip().partition(" ")
                header[key] = rest.split()
            else:
                values.append(float(line))
    grid = Grid(
        lower=tuple(float(a) for a in header["lower"]),
        upper=tuple(float(b) for b in header["upper"]),
        n=tuple(int(m) for m in header["n"]),
        bc=BoundaryType(header["bc"][0]),
    )
    vals = np.asarray(values).reshape(grid.n, order="F")
    return Field(grid, vals)
