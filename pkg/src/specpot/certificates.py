"""Criticality certificates via positive-semidefinite feasibility.

A potential is critical for lambda_i exactly when the constant function 1 is
a sum of squares of eigenfunctions from the i-th eigenspace. Over a fixed
orthonormal basis f_1..f_m that cone is { sum_ab G_ab f_a f_b : G psd }, so
criticality becomes a feasibility problem, linear in the Gram matrix G:

    find G >= 0  with  sum_ab G_ab f_a(x) f_b(x) = 1 at every node x.

The gap analogue asks for two psd Grams with matching pointwise sums, plus a
trace normalization that rules out the zero pair. Both problems are solved by
Dykstra's alternating projections between the psd cone (eigenvalue clipping)
and the affine set of least-squares solutions of the node equations. When the
iteration stalls at a positive residual, the unattained residual itself is
projected to a mean-zero direction and kept only if it verifiably makes the
restricted quadratic form definite; failing that the instance is Undecided,
since non-convergence alone proves nothing.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import project_mean_zero
from .errors import IncompleteClusterError, SeparationError
from .perturbation import (
    ProbeDirection,
    cluster_matrix,
    is_critical_probe,
    make_direction,
    mixed_probe_suite,
)
from .spectral import (
    CLUSTER_TOL_REL,
    Cluster,
    SpectralData,
    detect_cluster,
    recover_potential,
)

FEASIBILITY_TOL = 1e-8
PSD_TOL = -1e-10
DEFINITENESS_MARGIN = 1e-8
MAX_ITERATIONS = 50_000
STALL_WINDOW = 500
STALL_REL_IMPROVEMENT = 1e-6


class CertificateStatus(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNDECIDED = "undecided"


@dataclass(frozen=True, eq=False)
class GramCertificate:
    status: CertificateStatus
    gram: np.ndarray | None
    residual: float
    iterations: int
    separating_direction: ProbeDirection | None = None
    margin: float | None = None


@dataclass(frozen=True, eq=False)
class GapCertificate:
    status: CertificateStatus
    gram_i: np.ndarray | None
    gram_j: np.ndarray | None
    residual: float
    iterations: int
    separating_direction: ProbeDirection | None = None
    margin: float | None = None
    degenerate: bool = False


def _svec(S: np.ndarray) -> np.ndarray:
    m = S.shape[0]
    iu = np.triu_indices(m)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return S[iu] * scale


def _unsvec(s: np.ndarray, m: int) -> np.ndarray:
    iu = np.triu_indices(m)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    S = np.zeros((m, m))
    S[iu] = s / scale
    S = S + S.T - np.diag(np.diag(S))
    return S


def _basis_rows(F: np.ndarray) -> np.ndarray:
    """Matrix A with A @ svec(G) = sum_ab G_ab f_a(x) f_b(x) per node row."""
    m = F.shape[1]
    iu = np.triu_indices(m)
    cols = []
    for a, b in zip(*iu):
        col = F[:, a] * F[:, b]
        if a != b:
            col = col * np.sqrt(2.0)
        cols.append(col)
    return np.column_stack(cols)


def _psd_project(s: np.ndarray, m: int) -> np.ndarray:
    S = _unsvec(s, m)
    w, V = np.linalg.eigh(S)
    w = np.clip(w, 0.0, None)
    return _svec((V * w) @ V.T)


class _AffineLeastSquares:
    """Orthogonal projector onto the affine flat of least-squares solutions
    of A s = b (the set { s : A^T A s = A^T b }, never empty)."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = A
        self.b = b
        N = A.T @ A
        rhs = A.T @ b
        w, V = np.linalg.eigh(N)
        cutoff = max(w[-1], 0.0) * 1e-13
        inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
        self._pinv = (V * inv) @ V.T
        self._N = N
        self._rhs = rhs

    def project(self, s: np.ndarray) -> np.ndarray:
        return s + self._pinv @ (self._rhs - self._N @ s)

    def residual(self, s: np.ndarray) -> np.ndarray:
        return self.b - self.A @ s


def _dykstra(flat: _AffineLeastSquares, psd_project, sup_residual, max_iter: int,
             tol: float) -> tuple[str, np.ndarray, float, int]:
    """Two-set Dykstra iteration; returns (outcome, psd iterate, residual, iters).

    Outcome is "feasible" when the psd iterate meets the node equations within
    tol, "stalled" when the best residual stops improving, else "exhausted".
    """
    x = flat.project(np.zeros(flat.A.shape[1]))
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    y = psd_project(x)
    best = np.inf
    best_at_checkpoint = np.inf
    for it in range(1, max_iter + 1):
        y = psd_project(x + p)
        p = x + p - y
        xn = flat.project(y + q)
        q = y + q - xn
        x = xn
        res = sup_residual(y)
        if res <= tol:
            return "feasible", y, res, it
        best = min(best, res)
        if it % STALL_WINDOW == 0:
            improvement = best_at_checkpoint - best
            if improvement <= STALL_REL_IMPROVEMENT * best + 1e-14:
                return "stalled", y, res, it
            best_at_checkpoint = best
    return "exhausted", y, sup_residual(y), max_iter


def criticality_certificate(spec: SpectralData, cluster: Cluster, *,
                            feasibility_tol: float = FEASIBILITY_TOL,
                            max_iter: int = MAX_ITERATIONS) -> GramCertificate:
    """Decide whether 1 lies in the sum-of-squares cone of the cluster's
    eigenspace, returning a psd Gram witness or a separating direction."""
    if cluster.truncated:
        raise IncompleteClusterError("cluster is truncated; re-solve with larger k")
    F = spec.basis(cluster)
    m = cluster.multiplicity
    A = _basis_rows(F)
    b = np.ones(F.shape[0])
    flat = _AffineLeastSquares(A, b)

    def sup_res(s: np.ndarray) -> float:
        return float(np.max(np.abs(flat.residual(s))))

    outcome, y, res, iters = _dykstra(flat, lambda s: _psd_project(s, m), sup_res,
                                      max_iter, feasibility_tol)
    if outcome == "feasible":
        G = _unsvec(y, m)
        if float(np.linalg.eigvalsh(G)[0]) >= PSD_TOL:
            return GramCertificate(CertificateStatus.FEASIBLE, G, res, iters)
    residual_values = flat.residual(y)
    try:
        u = separating_direction(spec, cluster, residual_values)
    except SeparationError:
        return GramCertificate(CertificateStatus.UNDECIDED, None, res, iters)
    slopes = cluster_matrix(spec, cluster, u).branch_slopes()
    margin = float(np.min(np.abs(slopes)))
    return GramCertificate(CertificateStatus.INFEASIBLE, None, res, iters,
                           separating_direction=u, margin=margin)


def separating_direction(spec: SpectralData, cluster: Cluster,
                         residual_values: np.ndarray) -> ProbeDirection:
    """Turn an unattained feasibility residual into a verified separating
    direction: project it mean-zero, rescale to sup-norm 1, and keep it only
    if the restricted quadratic form it induces is definite on the eigenspace
    (oriented positive definite). Raises SeparationError otherwise."""
    grid = spec.grid
    u0 = project_mean_zero(grid, np.asarray(residual_values, dtype=float))
    sup = float(np.max(np.abs(u0)))
    if sup <= 1e-13:
        raise SeparationError("feasibility residual has no mean-zero component")
    u = make_direction(grid, u0 / sup, normalize=True)
    slopes = cluster_matrix(spec, cluster, u).branch_slopes()
    if slopes[0] >= DEFINITENESS_MARGIN:
        return u
    if slopes[-1] <= -DEFINITENESS_MARGIN:
        flipped = make_direction(grid, -u.values, normalize=True)
        return flipped
    raise SeparationError(
        f"restricted form is not definite (slopes in [{slopes[0]:.3e}, {slopes[-1]:.3e}])"
    )


def extract_frame(cert: GramCertificate, spec: SpectralData, cluster: Cluster) -> list[np.ndarray]:
    """Eigenfunction frame f~_p = sqrt(gamma_p) sum_a (v_p)_a f_a from a
    feasible Gram certificate; the squares of the frame sum to 1 within the
    certificate residual."""
    if cert.status is not CertificateStatus.FEASIBLE:
        raise ValueError("frame extraction requires a feasible certificate")
    F = spec.basis(cluster)
    gamma, V = np.linalg.eigh(cert.gram)
    frame = []
    for p in range(len(gamma)):
        if gamma[p] > 1e-12:
            frame.append(np.sqrt(gamma[p]) * (F @ V[:, p]))
    return frame


def gap_certificate(spec: SpectralData, cluster_i: Cluster, cluster_j: Cluster, *,
                    feasibility_tol: float = FEASIBILITY_TOL,
                    max_iter: int = MAX_ITERATIONS) -> GapCertificate:
    """Decide whether the sum-of-squares cones of two eigenspaces intersect
    nontrivially (pointwise-equal psd Gram forms, i-side trace normalized)."""
    if cluster_i.truncated or cluster_j.truncated:
        raise IncompleteClusterError("clusters must be complete; re-solve with larger k")
    if cluster_i.first_index == cluster_j.first_index:
        # Equal eigenvalues: the gap vanishes identically and the shared
        # eigenspace intersects itself; no solve needed.
        m = cluster_i.multiplicity
        G = np.eye(m) / m
        return GapCertificate(CertificateStatus.FEASIBLE, G, G.copy(), 0.0, 0,
                              degenerate=True)

    Fi = spec.basis(cluster_i)
    Fj = spec.basis(cluster_j)
    mi, mj = cluster_i.multiplicity, cluster_j.multiplicity
    di, dj = mi * (mi + 1) // 2, mj * (mj + 1) // 2
    Ai = _basis_rows(Fi)
    Aj = _basis_rows(Fj)
    n = Fi.shape[0]
    # Node rows enforce pointwise equality; the last row pins trace(G_i) = 1
    # (the w-orthonormal basis makes the integral of the i-side form equal its
    # trace), excluding the trivial zero pair.
    A = np.zeros((n + 1, di + dj))
    A[:n, :di] = Ai
    A[:n, di:] = -Aj
    A[n, :di] = _svec(np.eye(mi))
    b = np.zeros(n + 1)
    b[n] = 1.0
    flat = _AffineLeastSquares(A, b)

    def psd_project(s: np.ndarray) -> np.ndarray:
        return np.concatenate([_psd_project(s[:di], mi), _psd_project(s[di:], mj)])

    def sup_res(s: np.ndarray) -> float:
        r = flat.residual(s)
        return float(np.max(np.abs(r[:n])))  # node equations; trace row handled by flat

    outcome, y, res, iters = _dykstra(flat, psd_project, sup_res, max_iter, feasibility_tol)
    if outcome == "feasible":
        Gi = _unsvec(y[:di], mi)
        Gj = _unsvec(y[di:], mj)
        psd_ok = (float(np.linalg.eigvalsh(Gi)[0]) >= PSD_TOL
                  and float(np.linalg.eigvalsh(Gj)[0]) >= PSD_TOL)
        nontrivial = np.trace(Gi) > 1e-8 and np.trace(Gj) > 1e-8
        if psd_ok and nontrivial:
            return GapCertificate(CertificateStatus.FEASIBLE, Gi, Gj, res, iters)
    node_residual = (A[:n] @ y) - b[:n]
    try:
        u = _gap_separating_direction(spec, cluster_i, cluster_j, node_residual)
    except SeparationError:
        return GapCertificate(CertificateStatus.UNDECIDED, None, None, res, iters)
    mu = cluster_matrix(spec, cluster_i, u).branch_slopes()
    nu = cluster_matrix(spec, cluster_j, u).branch_slopes()
    margin = float(min(abs(nu[0] - mu[-1]), abs(nu[-1] - mu[0])))
    return GapCertificate(CertificateStatus.INFEASIBLE, None, None, res, iters,
                          separating_direction=u, margin=margin)


def _gap_separating_direction(spec: SpectralData, cluster_i: Cluster, cluster_j: Cluster,
                              residual_values: np.ndarray) -> ProbeDirection:
    grid = spec.grid
    u0 = project_mean_zero(grid, np.asarray(residual_values, dtype=float))
    sup = float(np.max(np.abs(u0)))
    if sup <= 1e-13:
        raise SeparationError("gap residual has no mean-zero component")
    for candidate in (u0 / sup, -u0 / sup):
        u = make_direction(grid, candidate, normalize=True)
        mu = cluster_matrix(spec, cluster_i, u).branch_slopes()
        nu = cluster_matrix(spec, cluster_j, u).branch_slopes()
        if nu[0] - mu[-1] >= DEFINITENESS_MARGIN:
            return u
    raise SeparationError("tensor form is not definite for the residual direction")


@dataclass(frozen=True, eq=False)
class CriticalityReport:
    """Aggregate verdict for one eigenvalue index at one potential."""

    index: int
    eigenvalue: float
    cluster_first: int
    multiplicity: int
    position: str                    # simple | first | last | interior
    sufficiency_applicable: bool     # criterion is if-and-only-if at first/last
    certificate: GramCertificate
    probes_total: int
    probes_critical: int
    frame_residual: float | None
    recovered_deviation: float | None
    verdict: str

    def to_dict(self) -> dict:
        payload = {
            "index": self.index,
            "eigenvalue": self.eigenvalue,
            "cluster_first": self.cluster_first,
            "multiplicity": self.multiplicity,
            "position": self.position,
            "sufficiency_applicable": self.sufficiency_applicable,
            "certificate_status": self.certificate.status.value,
            "certificate_residual": self.certificate.residual,
            "certificate_iterations": self.certificate.iterations,
            "certificate_margin": self.certificate.margin,
            "probes_total": self.probes_total,
            "probes_critical": self.probes_critical,
            "frame_residual": self.frame_residual,
            "recovered_deviation": self.recovered_deviation,
            "verdict": self.verdict,
        }
        return payload


def full_criticality_report(spec: SpectralData, i: int, *, probes: int = 200,
                            seed: int = 0, tol_rel: float = CLUSTER_TOL_REL) -> CriticalityReport:
    """Combine cluster structure, the cone certificate, a randomized probe
    suite and, when feasible, the recovered potential into one record."""
    cluster = detect_cluster(spec, i, tol_rel)
    if cluster.truncated:
        raise IncompleteClusterError("cluster is truncated; re-solve with larger k")
    r = cluster.rank_of(i)
    m = cluster.multiplicity
    if m == 1:
        position = "simple"
    elif r == 0:
        position = "first"
    elif r == m - 1:
        position = "last"
    else:
        position = "interior"
    sufficiency = position != "interior"

    cert = criticality_certificate(spec, cluster)
    suite = mixed_probe_suite(spec.grid, probes, seed)
    critical_count = sum(1 for u in suite if is_critical_probe(spec, i, u, tol_rel))

    frame_residual = None
    recovered_deviation = None
    if cert.status is CertificateStatus.FEASIBLE:
        frame = extract_frame(cert, spec, cluster)
        total = np.sum([f**2 for f in frame], axis=0)
        frame_residual = float(np.max(np.abs(total - 1.0)))
        recovered = recover_potential(spec.grid, frame, cluster.value)
        if spec.potential is not None:
            recovered_deviation = float(np.max(np.abs(recovered.values - spec.potential.values)))

    if cert.status is CertificateStatus.FEASIBLE:
        verdict = "critical" if sufficiency else "feasible (necessary condition only)"
    elif cert.status is CertificateStatus.INFEASIBLE:
        verdict = "not critical"
    else:
        verdict = "undecided"
    return CriticalityReport(
        index=i,
        eigenvalue=spec.eigenvalue(i),
        cluster_first=cluster.first_index,
        multiplicity=m,
        position=position,
        sufficiency_applicable=sufficiency,
        certificate=cert,
        probes_total=len(suite),
        probes_critical=critical_count,
        frame_residual=frame_residual,
        recovered_deviation=recovered_deviation,
        verdict=verdict,
    )
