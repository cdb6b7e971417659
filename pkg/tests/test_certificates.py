import numpy as np
import pytest

from specpot.certificates import (
    CertificateStatus,
    criticality_certificate,
    extract_frame,
    full_criticality_report,
    gap_certificate,
    separating_direction,
)
from specpot.domain import BoundaryCondition, Circle, Potential, build_grid
from specpot.errors import SeparationError
from specpot.perturbation import is_critical_probe, mixed_probe_suite
from specpot.spectral import detect_cluster, solve_spectrum


class TestCriticalityCertificate:
    def test_circle_cluster_feasible_pi_identity(self, circle_zero_spec):
        # unique solution G = pi * I from cos^2 + sin^2 = 1
        cl = detect_cluster(circle_zero_spec, 2)
        cert = criticality_certificate(circle_zero_spec, cl)
        assert cert.status is CertificateStatus.FEASIBLE
        assert cert.residual <= 1e-8
        assert np.max(np.abs(cert.gram - np.pi * np.eye(2))) <= 1e-6
        assert cert.separating_direction is None

    def test_constant_eigenfunction_feasible(self, neumann_zero_spec, neumann_grid):
        cl = detect_cluster(neumann_zero_spec, 1)
        cert = criticality_certificate(neumann_zero_spec, cl)
        assert cert.status is CertificateStatus.FEASIBLE
        assert cert.gram.shape == (1, 1)
        assert cert.gram[0, 0] == pytest.approx(neumann_grid.volume, abs=1e-6)

    def test_dirichlet_ground_state_infeasible(self, dirichlet_zero_spec, dirichlet_grid):
        cl = detect_cluster(dirichlet_zero_spec, 1)
        cert = criticality_certificate(dirichlet_zero_spec, cl)
        assert cert.status is CertificateStatus.INFEASIBLE
        assert cert.margin >= 1e-8
        u = cert.separating_direction
        f1 = dirichlet_zero_spec.eigenvector(1)
        # positive-definite orientation: strictly positive derivative
        assert dirichlet_grid.inner(u.values * f1, f1) > 1e-8

    def test_neumann_second_infeasible(self, neumann_zero_spec):
        cl = detect_cluster(neumann_zero_spec, 2)
        cert = criticality_certificate(neumann_zero_spec, cl)
        assert cert.status is CertificateStatus.INFEASIBLE
        assert cert.margin >= 1e-8

    def test_duality_exclusivity(self, circle_zero_spec, dirichlet_zero_spec, neumann_zero_spec):
        instances = [
            (circle_zero_spec, 2),
            (neumann_zero_spec, 1),
            (neumann_zero_spec, 2),
            (dirichlet_zero_spec, 1),
            (dirichlet_zero_spec, 3),
        ]
        for spec, i in instances:
            cl = detect_cluster(spec, i)
            cert = criticality_certificate(spec, cl)
            if cert.status is CertificateStatus.FEASIBLE:
                frame = extract_frame(cert, spec, cl)
                total = np.sum([f**2 for f in frame], axis=0)
                assert np.max(np.abs(total - 1.0)) <= 1e-8
                assert cert.separating_direction is None
            elif cert.status is CertificateStatus.INFEASIBLE:
                assert cert.gram is None
                assert cert.separating_direction is not None

    def test_torus_constant_critical(self, torus_grid):
        # homogeneous domain: the multiplicity-4 cluster above the ground
        # state admits a unit frame (the feasible set is a segment of Grams,
        # so only structure is asserted, not a unique matrix)
        spec = solve_spectrum(torus_grid, Potential.constant(torus_grid, 0.1), 8)
        cl = detect_cluster(spec, 2)
        assert cl.multiplicity == 4
        cert = criticality_certificate(spec, cl)
        assert cert.status is CertificateStatus.FEASIBLE
        assert cert.residual <= 1e-8
        frame = extract_frame(cert, spec, cl)
        total = np.sum([f**2 for f in frame], axis=0)
        assert np.max(np.abs(total - 1.0)) <= 1e-8

    def test_monotone_escape(self, dirichlet_grid, dirichlet_zero_spec):
        # positive definite direction: lambda_1(q + t u) strictly increases
        cl = detect_cluster(dirichlet_zero_spec, 1)
        cert = criticality_certificate(dirichlet_zero_spec, cl)
        u = cert.separating_direction
        values = [dirichlet_zero_spec.eigenvalue(1)]
        for t in (1e-3, 2e-3, 3e-3):
            q = Potential.from_values(dirichlet_grid, t * u.values)
            values.append(solve_spectrum(dirichlet_grid, q, 3).eigenvalue(1))
        diffs = np.diff(values)
        assert np.all(diffs > 0)


class TestExtractFrame:
    def test_requires_feasible(self, dirichlet_zero_spec):
        cl = detect_cluster(dirichlet_zero_spec, 1)
        cert = criticality_certificate(dirichlet_zero_spec, cl)
        with pytest.raises(ValueError):
            extract_frame(cert, dirichlet_zero_spec, cl)

    def test_rank_one_gram(self, circle_zero_spec):
        # synthetic rank-1 feasibility output: single combined function
        from specpot.certificates import GramCertificate

        cl = detect_cluster(circle_zero_spec, 2)
        w = np.array([0.6, 0.8])
        cert = GramCertificate(CertificateStatus.FEASIBLE, np.outer(w, w), 0.0, 1)
        frame = extract_frame(cert, circle_zero_spec, cl)
        assert len(frame) == 1
        F = circle_zero_spec.basis(cl)
        assert np.max(np.abs(np.abs(frame[0]) - np.abs(F @ w))) <= 1e-12

    def test_unit_partition(self, circle_zero_spec):
        cl = detect_cluster(circle_zero_spec, 2)
        cert = criticality_certificate(circle_zero_spec, cl)
        frame = extract_frame(cert, circle_zero_spec, cl)
        total = np.sum([f**2 for f in frame], axis=0)
        assert np.max(np.abs(total - 1.0)) <= cert.residual + 1e-10


class TestSeparatingDirection:
    def test_constant_eigenfunction_fails_verification(self, neumann_zero_spec, neumann_grid):
        # 1x1 feasible case (constant eigenfunction): no separation can exist,
        # any candidate residual must fail the definiteness check
        cl = detect_cluster(neumann_zero_spec, 1)
        rng = np.random.default_rng(3)
        with pytest.raises(SeparationError):
            separating_direction(neumann_zero_spec, cl, rng.standard_normal(neumann_grid.n_nodes))

    def test_constant_residual_fails(self, dirichlet_zero_spec, dirichlet_grid):
        with pytest.raises(SeparationError):
            separating_direction(dirichlet_zero_spec, detect_cluster(dirichlet_zero_spec, 1),
                                 np.full(dirichlet_grid.n_nodes, 0.4))


class TestGapCertificate:
    def test_circle_first_gap_feasible(self, circle_zero_spec):
        ci = detect_cluster(circle_zero_spec, 1)
        cj = detect_cluster(circle_zero_spec, 2)
        cert = gap_certificate(circle_zero_spec, ci, cj)
        assert cert.status is CertificateStatus.FEASIBLE
        assert cert.residual <= 1e-8
        assert not cert.degenerate
        assert np.linalg.eigvalsh(cert.gram_i)[0] >= -1e-10
        assert np.linalg.eigvalsh(cert.gram_j)[0] >= -1e-10
        assert np.trace(cert.gram_i) == pytest.approx(1.0, abs=1e-8)
        assert np.trace(cert.gram_j) > 1e-8

    def test_pointwise_match_and_scale_invariance(self, circle_zero_spec):
        ci = detect_cluster(circle_zero_spec, 1)
        cj = detect_cluster(circle_zero_spec, 2)
        cert = gap_certificate(circle_zero_spec, ci, cj)
        Fi = circle_zero_spec.basis(ci)
        Fj = circle_zero_spec.basis(cj)
        side_i = np.einsum("na,ab,nb->n", Fi, cert.gram_i, Fi)
        side_j = np.einsum("na,ab,nb->n", Fj, cert.gram_j, Fj)
        assert np.max(np.abs(side_i - side_j)) <= 1e-8
        for s in (0.5, 2.0):
            assert np.max(np.abs(s * side_i - s * side_j)) <= s * 1e-8
            assert np.linalg.eigvalsh(s * cert.gram_i)[0] >= -1e-10

    def test_degenerate_shortcut(self, circle_zero_spec):
        ci = detect_cluster(circle_zero_spec, 2)
        cj = detect_cluster(circle_zero_spec, 3)
        cert = gap_certificate(circle_zero_spec, ci, cj)
        assert cert.status is CertificateStatus.FEASIBLE
        assert cert.degenerate
        assert cert.iterations == 0
        assert np.trace(cert.gram_i) == pytest.approx(1.0)

    def test_mesh_stability_gap_2_4(self):
        statuses = []
        for n in (128, 256):
            g = build_grid(Circle(2 * np.pi), n, BoundaryCondition.CLOSED)
            spec = solve_spectrum(g, Potential.zero(g), 10)
            cert = gap_certificate(spec, detect_cluster(spec, 2), detect_cluster(spec, 4))
            statuses.append(cert.status)
        assert statuses[0] is statuses[1]
        assert statuses[0] is not CertificateStatus.UNDECIDED

    def test_dirichlet_first_gap_decided_stably(self):
        from specpot.domain import Interval

        statuses = []
        for n in (128, 256):
            g = build_grid(Interval(np.pi), n, BoundaryCondition.DIRICHLET)
            spec = solve_spectrum(g, Potential.zero(g), 8)
            cert = gap_certificate(spec, detect_cluster(spec, 1), detect_cluster(spec, 2))
            statuses.append(cert.status)
            assert cert.status is not CertificateStatus.UNDECIDED
            if cert.status is CertificateStatus.INFEASIBLE:
                assert cert.margin >= 1e-8
        assert statuses[0] is statuses[1]


class TestFullReport:
    def test_circle_constant_critical(self, circle_grid):
        q = Potential.constant(circle_grid, 0.25)
        spec = solve_spectrum(circle_grid, q, 8)
        report = full_criticality_report(spec, 2, probes=40, seed=5)
        assert report.verdict == "critical"
        assert report.multiplicity == 2
        assert report.position == "first"
        assert report.sufficiency_applicable
        assert report.probes_critical == report.probes_total == 40
        assert report.frame_residual <= 1e-8
        assert report.recovered_deviation <= 1e-3

    def test_dirichlet_not_critical(self, dirichlet_zero_spec):
        report = full_criticality_report(dirichlet_zero_spec, 1, probes=20, seed=5)
        assert report.verdict == "not critical"
        assert report.certificate.separating_direction is not None
        assert report.recovered_deviation is None

    def test_neumann_second_not_critical(self, neumann_zero_spec):
        report = full_criticality_report(neumann_zero_spec, 2, probes=20, seed=5)
        assert report.verdict == "not critical"
        assert report.position == "simple"

    def test_report_dict_roundtrip(self, neumann_zero_spec):
        import json

        report = full_criticality_report(neumann_zero_spec, 2, probes=10, seed=5)
        payload = report.to_dict()
        assert json.loads(json.dumps(payload)) == payload

    def test_frame_implies_probe_criticality(self, circle_grid):
        # a feasible certificate forces every probe to be sign-indefinite
        q = Potential.constant(circle_grid, -0.7)
        spec = solve_spectrum(circle_grid, q, 8)
        cl = detect_cluster(spec, 2)
        cert = criticality_certificate(spec, cl)
        assert cert.status is CertificateStatus.FEASIBLE
        for u in mixed_probe_suite(circle_grid, 30, 9):
            assert is_critical_probe(spec, 2, u)
