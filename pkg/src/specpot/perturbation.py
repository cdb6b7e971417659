"""One-sided eigenvalue derivatives under mean-zero potential perturbations.

For a simple eigenvalue the derivative of t -> lambda_i(q + t*u) at t = 0 is
<u f_i, f_i>_w. For a degenerate eigenvalue of multiplicity m, the analytic
branches through lambda_i have slopes equal to the eigenvalues mu_1 <= ... <=
mu_m of the restricted multiplication matrix M_ab = <u f_a, f_b>_w on the
eigenspace basis. Sorting then selects the one-sided derivatives: if i sits at
0-based rank r inside its cluster,

    right derivative = mu_{r+1},    left derivative = mu_{m-r}.

For r = 0 this is (min, max) and for r = m-1 it is (max, min), the two cases
with an exact variational meaning; interior ranks use the same sorted rule,
which is validated against finite differences but is an extension flagged in
reports.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Circle, DomainGrid, Potential, Torus2D, fourier_mode, project_mean_zero
from .errors import DegenerateGapError, IncompleteClusterError, MultiplicityError
from .spectral import CLUSTER_TOL_REL, Cluster, SpectralData, detect_cluster, solve_spectrum

SIGN_PRODUCT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProbeDirection:
    """Mean-zero direction in potential space (tangent to the mean constraint)."""

    values: np.ndarray
    sup_norm: float


@dataclass(frozen=True)
class DirectionalDerivative:
    left: float
    right: float


@dataclass(frozen=True, eq=False)
class ClusterDerivativeMatrix:
    """Symmetric m x m matrix <u f_a, f_b>_w over a cluster's basis."""

    entries: np.ndarray
    cluster: Cluster
    direction: ProbeDirection

    def branch_slopes(self) -> np.ndarray:
        """Ascending derivative values of the analytic eigenvalue branches."""
        return np.linalg.eigvalsh(self.entries)

    def branches(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.entries)


def make_direction(grid: DomainGrid, values, normalize: bool = False) -> ProbeDirection:
    """Project node values onto the mean-zero tangent space; optionally rescale
    to sup-norm 1."""
    u = project_mean_zero(grid, values)
    sup = float(np.max(np.abs(u)))
    if normalize:
        if sup <= 0.0:
            raise ValueError("cannot normalize a zero direction")
        u = u / sup
        sup = 1.0
    return ProbeDirection(u, sup)


def simple_derivative(spec: SpectralData, i: int, u: ProbeDirection,
                      tol_rel: float = CLUSTER_TOL_REL) -> float:
    """Derivative <u f_i, f_i>_w of a simple eigenvalue."""
    cluster = detect_cluster(spec, i, tol_rel)
    if cluster.multiplicity != 1:
        raise MultiplicityError(
            f"eigenvalue {i} has multiplicity {cluster.multiplicity}; use the cluster path"
        )
    f = spec.eigenvector(i)
    return spec.grid.inner(u.values * f, f)


def cluster_matrix(spec: SpectralData, cluster: Cluster, u: ProbeDirection) -> ClusterDerivativeMatrix:
    """Restricted multiplication-by-u matrix on the cluster's eigenspace."""
    if cluster.truncated:
        raise IncompleteClusterError(
            f"cluster at {cluster.first_index} is truncated; re-solve with larger k"
        )
    F = spec.basis(cluster)
    weighted = F * (spec.grid.weights * u.values)[:, None]
    M = weighted.T @ F
    return ClusterDerivativeMatrix((M + M.T) / 2.0, cluster, u)


def one_sided_derivatives(spec: SpectralData, i: int, u: ProbeDirection,
                          tol_rel: float = CLUSTER_TOL_REL) -> DirectionalDerivative:
    """Left/right derivatives of t -> lambda_i(q + t*u) at t = 0."""
    cluster = detect_cluster(spec, i, tol_rel)
    if cluster.multiplicity == 1:
        f = spec.eigenvector(i)
        d = spec.grid.inner(u.values * f, f)
        return DirectionalDerivative(d, d)
    slopes = cluster_matrix(spec, cluster, u).branch_slopes()
    r = cluster.rank_of(i)
    m = cluster.multiplicity
    return DirectionalDerivative(left=float(slopes[m - 1 - r]), right=float(slopes[r]))


def is_critical_probe(spec: SpectralData, i: int, u: ProbeDirection,
                      tol_rel: float = CLUSTER_TOL_REL) -> bool:
    """True when the one-sided derivatives have opposite signs (or vanish)."""
    d = one_sided_derivatives(spec, i, u, tol_rel)
    scale = max(abs(d.left), abs(d.right), 1.0)
    return d.left * d.right <= SIGN_PRODUCT_TOL * scale**2


def gap_one_sided_derivatives(spec: SpectralData, i: int, j: int, u: ProbeDirection,
                              tol_rel: float = CLUSTER_TOL_REL) -> DirectionalDerivative:
    """One-sided derivatives of the gap lambda_j - lambda_i along u.

    Both indices get their sorted-branch one-sided derivatives independently
    and the sides are differenced; when i is last of its cluster and j first
    of its, this reduces to the extremal rule right = min - max, left = max -
    min over the two branch sets.
    """
    if i == j:
        raise DegenerateGapError("gap requires two distinct indices")
    ci = detect_cluster(spec, i, tol_rel)
    cj = detect_cluster(spec, j, tol_rel)
    if ci.first_index == cj.first_index:
        raise DegenerateGapError(
            f"indices {i} and {j} share one eigenvalue cluster (gap is identically zero there)"
        )
    di = one_sided_derivatives(spec, i, u, tol_rel)
    dj = one_sided_derivatives(spec, j, u, tol_rel)
    return DirectionalDerivative(left=dj.left - di.left, right=dj.right - di.right)


def sample_probes(grid: DomainGrid, count: int, seed: int, style: str = "fourier") -> list[ProbeDirection]:
    """Deterministic pseudo-random mean-zero probes, sup-normalized to 1.

    Styles: "fourier" (random low-order modes), "spike" (localized bumps),
    "noise" (white noise per node).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if style not in ("fourier", "spike", "noise"):
        raise ValueError(f"unknown probe style {style!r}")
    rng = np.random.default_rng(seed)
    probes = []
    for _ in range(count):
        for _attempt in range(16):
            values = _draw_probe(grid, rng, style)
            centered = project_mean_zero(grid, values)
            if np.max(np.abs(centered)) > 1e-12:
                probes.append(make_direction(grid, centered, normalize=True))
                break
        else:
            raise RuntimeError("failed to draw a nonzero mean-zero probe")
    return probes


def _draw_probe(grid: DomainGrid, rng: np.random.Generator, style: str) -> np.ndarray:
    if style == "noise":
        return rng.standard_normal(grid.n_nodes)
    if style == "spike":
        if grid.ndim == 1:
            ell = grid.kind.circumference if isinstance(grid.kind, Circle) else grid.kind.length
            center = rng.uniform(0.0, ell)
            width = rng.uniform(0.05, 0.2) * ell
            d = np.abs(grid.coords - center)
            if isinstance(grid.kind, Circle):
                d = np.minimum(d, ell - d)
            return np.exp(-((d / width) ** 2))
        assert isinstance(grid.kind, Torus2D)
        lx, ly = grid.kind.length_x, grid.kind.length_y
        cx, cy = rng.uniform(0.0, lx), rng.uniform(0.0, ly)
        width = rng.uniform(0.05, 0.2) * min(lx, ly)
        dx = np.abs(grid.coords[:, 0] - cx)
        dy = np.abs(grid.coords[:, 1] - cy)
        dx = np.minimum(dx, lx - dx)
        dy = np.minimum(dy, ly - dy)
        return np.exp(-((dx**2 + dy**2) / width**2))
    # fourier
    if grid.ndim == 1:
        values = np.zeros(grid.n_nodes)
        for k in range(1, 5):
            values += rng.standard_normal() * fourier_mode(grid, k, "cos")
            values += rng.standard_normal() * fourier_mode(grid, k, "sin")
        return values
    assert isinstance(grid.kind, Torus2D)
    lx, ly = grid.kind.length_x, grid.kind.length_y
    x, y = grid.coords[:, 0], grid.coords[:, 1]
    values = np.zeros(grid.n_nodes)
    for kx in range(0, 3):
        for ky in range(0, 3):
            if kx == 0 and ky == 0:
                continue
            phase = 2.0 * np.pi * (kx * x / lx + ky * y / ly)
            values += rng.standard_normal() * np.cos(phase)
            values += rng.standard_normal() * np.sin(phase)
    return values


def mixed_probe_suite(grid: DomainGrid, count: int, seed: int) -> list[ProbeDirection]:
    """Probe suite mixing the three styles, deterministic in the seed."""
    seeds = np.random.SeedSequence(seed).generate_state(3)
    per = count // 3
    probes = sample_probes(grid, count - 2 * per, int(seeds[0]), "fourier")
    if per:
        probes += sample_probes(grid, per, int(seeds[1]), "spike")
        probes += sample_probes(grid, per, int(seeds[2]), "noise")
    return probes


def fd_eigenvalue_derivative(grid: DomainGrid, q: Potential, i: int, u: ProbeDirection,
                             t: float = 1e-4, k: int | None = None) -> float:
    """Central finite-difference quotient (lambda_i(q+tu) - lambda_i(q-tu)) / 2t."""
    k = k or i + 6
    plus = solve_spectrum(grid, Potential.from_values(grid, q.values + t * u.values), k)
    minus = solve_spectrum(grid, Potential.from_values(grid, q.values - t * u.values), k)
    return (plus.eigenvalue(i) - minus.eigenvalue(i)) / (2.0 * t)


def fd_richardson_derivative(grid: DomainGrid, q: Potential, i: int, u: ProbeDirection,
                             t: float = 1e-4, k: int | None = None) -> float:
    """Richardson-extrapolated central difference, O(t^4) truncation."""
    coarse = fd_eigenvalue_derivative(grid, q, i, u, t, k)
    fine = fd_eigenvalue_derivative(grid, q, i, u, t / 2.0, k)
    return (4.0 * fine - coarse) / 3.0


def fd_gap_derivative(grid: DomainGrid, q: Potential, i: int, j: int, u: ProbeDirection,
                      t: float = 1e-4, k: int | None = None) -> float:
    k = k or j + 6
    plus = solve_spectrum(grid, Potential.from_values(grid, q.values + t * u.values), k)
    minus = solve_spectrum(grid, Potential.from_values(grid, q.values - t * u.values), k)
    gp = plus.eigenvalue(j) - plus.eigenvalue(i)
    gm = minus.eigenvalue(j) - minus.eigenvalue(i)
    return (gp - gm) / (2.0 * t)
