"""Model domains: uniform grids, discrete Laplacians, mean-value operations.

Three flat domains are supported: a circle of given circumference (periodic),
an interval with Dirichlet or Neumann ends, and a flat rectangular 2-torus.
All grids are uniform and carry a diagonal quadrature (weight h per node,
hx*hy in 2-D), so the node weights sum to the domain volume exactly and the
discrete L2 inner product  <a, b>_w = sum_x w_x a(x) b(x)  is diagonal.
Interval grids are cell-centered (nodes at midpoints (j+1/2)h): with the
ghost-node reflection closures this gives symmetric Laplacians with exact
closed-form spectra (4/h^2) sin^2(k*pi/(2n)) and, in the Neumann case, an
exactly preserved constant kernel.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DimensionError

MIN_NODES = 8


class BoundaryCondition(str, Enum):
    CLOSED = "closed"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class Circle:
    circumference: float = 2.0 * np.pi


@dataclass(frozen=True)
class Interval:
    length: float = float(np.pi)


@dataclass(frozen=True)
class Torus2D:
    length_x: float = 2.0 * np.pi
    length_y: float = 2.0 * np.pi


DomainKind = Circle | Interval | Torus2D


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Uniform discretization of a model domain.

    Treated as immutable after construction; safe to share read-only.
    ``laplacian`` holds the matrix of minus the discrete Laplacian, which is
    symmetric and positive semidefinite (positive definite under Dirichlet).
    """

    kind: DomainKind
    bc: BoundaryCondition
    n_nodes: int
    coords: np.ndarray        # (n,) in 1-D, (n, 2) on the torus
    spacing: tuple[float, ...]
    weights: np.ndarray       # (n,), uniform
    volume: float
    laplacian: np.ndarray     # (n, n)

    @property
    def ndim(self) -> int:
        return 1 if self.coords.ndim == 1 else self.coords.shape[1]

    def check_vector(self, u) -> np.ndarray:
        v = np.asarray(u, dtype=float)
        if v.shape != (self.n_nodes,):
            raise DimensionError(
                f"expected a vector of length {self.n_nodes}, got shape {v.shape}"
            )
        return v

    def inner(self, a, b) -> float:
        """Discrete L2(w) inner product sum_x w_x a(x) b(x)."""
        return float(np.dot(self.weights * np.asarray(a, dtype=float), np.asarray(b, dtype=float)))

    def norm(self, a) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))


def _circle_laplacian(n: int, h: float) -> np.ndarray:
    lap = np.zeros((n, n))
    idx = np.arange(n)
    lap[idx, idx] = 2.0
    lap[idx, (idx + 1) % n] = -1.0
    lap[idx, (idx - 1) % n] = -1.0
    return lap / h**2


def _interval_laplacian(n: int, h: float, bc: BoundaryCondition) -> np.ndarray:
    lap = np.zeros((n, n))
    idx = np.arange(n)
    lap[idx, idx] = 2.0
    lap[idx[:-1], idx[:-1] + 1] = -1.0
    lap[idx[1:], idx[1:] - 1] = -1.0
    # Ghost-node reflection at the cell-centered boundary: u_ghost = -u_0 for
    # Dirichlet (value 0 at the wall), u_ghost = u_0 for Neumann (zero flux).
    corner = 3.0 if bc is BoundaryCondition.DIRICHLET else 1.0
    lap[0, 0] = corner
    lap[n - 1, n - 1] = corner
    return lap / h**2


def build_grid(kind: DomainKind, n_nodes: int, bc: BoundaryCondition) -> DomainGrid:
    """Build a uniform grid with its quadrature weights and discrete Laplacian.

    ``n_nodes`` is the node count in 1-D and the per-axis node count on the
    torus. The boundary condition must match the domain: closed for circle
    and torus, Dirichlet or Neumann for the interval.
    """
    bc = BoundaryCondition(bc)
    if isinstance(kind, (Circle, Torus2D)) and bc is not BoundaryCondition.CLOSED:
        raise ConfigError(f"{type(kind).__name__} requires closed boundary, got {bc.value!r}")
    if isinstance(kind, Interval) and bc is BoundaryCondition.CLOSED:
        raise ConfigError("Interval requires dirichlet or neumann boundary conditions")
    if int(n_nodes) != n_nodes or n_nodes < MIN_NODES:
        raise ConfigError(f"n_nodes must be an integer >= {MIN_NODES}, got {n_nodes}")
    n = int(n_nodes)

    if isinstance(kind, Circle):
        ell = float(kind.circumference)
        if ell <= 0:
            raise ConfigError("circumference must be positive")
        h = ell / n
        coords = h * np.arange(n)
        lap = _circle_laplacian(n, h)
        return DomainGrid(kind, bc, n, coords, (h,), np.full(n, h), ell, lap)

    if isinstance(kind, Interval):
        ell = float(kind.length)
        if ell <= 0:
            raise ConfigError("length must be positive")
        h = ell / n
        coords = h * (np.arange(n) + 0.5)
        lap = _interval_laplacian(n, h, bc)
        return DomainGrid(kind, bc, n, coords, (h,), np.full(n, h), ell, lap)

    lx, ly = float(kind.length_x), float(kind.length_y)
    if lx <= 0 or ly <= 0:
        raise ConfigError("torus side lengths must be positive")
    hx, hy = lx / n, ly / n
    x = hx * np.arange(n)
    y = hy * np.arange(n)
    # Node index = j * n + i for node (x_i, y_j): x varies fastest.
    xx, yy = np.meshgrid(x, y)
    coords = np.column_stack([xx.ravel(), yy.ravel()])
    lap = np.kron(np.eye(n), _circle_laplacian(n, hx)) + np.kron(
        _circle_laplacian(n, hy), np.eye(n)
    )
    total = n * n
    return DomainGrid(kind, bc, total, coords, (hx, hy), np.full(total, hx * hy), lx * ly, lap)


def mean_value(grid: DomainGrid, u) -> float:
    """Mean (1/V) sum_x w_x u(x) of a node-sampled function."""
    v = grid.check_vector(u)
    return float(np.dot(grid.weights, v) / grid.volume)


def project_mean_zero(grid: DomainGrid, u) -> np.ndarray:
    """Remove the mean component: u - mean(u). Idempotent and linear."""
    v = grid.check_vector(u)
    return v - mean_value(grid, v)


@dataclass(frozen=True, eq=False)
class Potential:
    """Node-sampled potential with its cached mean value."""

    values: np.ndarray
    mean: float

    @classmethod
    def from_values(cls, grid: DomainGrid, values) -> "Potential":
        v = grid.check_vector(values).copy()
        if not np.all(np.isfinite(v)):
            raise ConfigError("potential values must be finite")
        return cls(v, mean_value(grid, v))

    @classmethod
    def zero(cls, grid: DomainGrid) -> "Potential":
        return cls(np.zeros(grid.n_nodes), 0.0)

    @classmethod
    def constant(cls, grid: DomainGrid, c: float) -> "Potential":
        return cls(np.full(grid.n_nodes, float(c)), float(c))

    @classmethod
    def fourier(cls, grid: DomainGrid, cos_coeffs=(), sin_coeffs=()) -> "Potential":
        """Low-order trigonometric potential from mode coefficients (1-D domains)."""
        values = np.zeros(grid.n_nodes)
        for k, a in enumerate(cos_coeffs, start=1):
            values += float(a) * fourier_mode(grid, k, "cos")
        for k, b in enumerate(sin_coeffs, start=1):
            values += float(b) * fourier_mode(grid, k, "sin")
        return cls.from_values(grid, values)


def fourier_mode(grid: DomainGrid, k: int, kind: str = "cos") -> np.ndarray:
    """k-th trigonometric mode on a 1-D grid: period ell on the circle,
    half-period cosines/sines k*pi*x/ell on the interval."""
    if grid.ndim != 1:
        raise ConfigError("fourier modes are only defined for 1-D domains here")
    if isinstance(grid.kind, Circle):
        theta = 2.0 * np.pi * k * grid.coords / grid.kind.circumference
    else:
        theta = np.pi * k * grid.coords / grid.kind.length
    return np.cos(theta) if kind == "cos" else np.sin(theta)


_GRID_KEYS = {"kind", "length", "nodes", "bc"}


def grid_from_mapping(mapping: dict[str, str]) -> DomainGrid:
    """Build a grid from string key/value pairs (kind, length, nodes, bc)."""
    unknown = sorted(set(mapping) - _GRID_KEYS)
    if unknown:
        raise ConfigError(f"unknown grid key {unknown[0]!r}")
    missing = sorted(_GRID_KEYS - set(mapping))
    if missing:
        raise ConfigError(f"missing grid key {missing[0]!r}")

    kind_name = mapping["kind"].strip().lower()
    lengths = [s.strip() for s in mapping["length"].split(",")]
    try:
        lengths = [float(s) for s in lengths]
    except ValueError as exc:
        raise ConfigError(f"bad length value {mapping['length']!r}") from exc
    try:
        nodes = int(mapping["nodes"])
    except ValueError as exc:
        raise ConfigError(f"bad nodes value {mapping['nodes']!r}") from exc
    try:
        bc = BoundaryCondition(mapping["bc"].strip().lower())
    except ValueError as exc:
        raise ConfigError(f"bad bc value {mapping['bc']!r}") from exc

    if kind_name == "circle":
        if len(lengths) != 1:
            raise ConfigError("circle takes a single length")
        kind: DomainKind = Circle(lengths[0])
    elif kind_name == "interval":
        if len(lengths) != 1:
            raise ConfigError("interval takes a single length")
        kind = Interval(lengths[0])
    elif kind_name == "torus":
        if len(lengths) == 1:
            kind = Torus2D(lengths[0], lengths[0])
        elif len(lengths) == 2:
            kind = Torus2D(lengths[0], lengths[1])
        else:
            raise ConfigError("torus takes one or two lengths")
    else:
        raise ConfigError(f"unknown domain kind {mapping['kind']!r}")
    return build_grid(kind, nodes, bc)


def parse_grid_spec(text: str) -> DomainGrid:
    """Parse a plain-text grid spec of key=value lines (kind, length, nodes, bc)."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return grid_from_mapping(mapping)


def export_nodes_csv(grid: DomainGrid, path) -> None:
    """Write node coordinates and quadrature weights as CSV columns (x[, y], w)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if grid.ndim == 1:
            writer.writerow(["x", "w"])
            for x, w in zip(grid.coords, grid.weights):
                writer.writerow([repr(float(x)), repr(float(w))])
        else:
            writer.writerow(["x", "y", "w"])
            for (x, y), w in zip(grid.coords, grid.weights):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(w))])
