import numpy as np
import pytest

from specpot.domain import Potential, mean_value
from specpot.errors import DegenerateGapError, MultiplicityError
from specpot.perturbation import (
    cluster_matrix,
    fd_eigenvalue_derivative,
    fd_gap_derivative,
    gap_one_sided_derivatives,
    is_critical_probe,
    make_direction,
    mixed_probe_suite,
    one_sided_derivatives,
    sample_probes,
    simple_derivative,
)
from specpot.spectral import detect_cluster, solve_spectrum


def central_fd(grid, q, i, u, t):
    """Independent central difference quotient built from fresh eigensolves."""
    plus = solve_spectrum(grid, Potential.from_values(grid, q.values + t * u.values), i + 6)
    minus = solve_spectrum(grid, Potential.from_values(grid, q.values - t * u.values), i + 6)
    return (plus.eigenvalue(i) - minus.eigenvalue(i)) / (2 * t)


class TestMakeDirection:
    def test_mean_zero(self, circle_grid):
        rng = np.random.default_rng(0)
        u = make_direction(circle_grid, rng.standard_normal(256))
        assert abs(mean_value(circle_grid, u.values)) <= 1e-12

    def test_normalized(self, circle_grid):
        u = make_direction(circle_grid, np.cos(circle_grid.coords) * 7.0, normalize=True)
        assert u.sup_norm == pytest.approx(1.0)
        assert np.max(np.abs(u.values)) == pytest.approx(1.0)

    def test_zero_direction_rejected(self, circle_grid):
        with pytest.raises(ValueError):
            make_direction(circle_grid, np.full(256, 4.2), normalize=True)


class TestSimpleDerivative:
    def test_constant_eigenfunction_zero(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        assert abs(simple_derivative(circle_zero_spec, 1, u)) <= 1e-10

    def test_multiplicity_guard(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        with pytest.raises(MultiplicityError):
            simple_derivative(circle_zero_spec, 2, u)

    def test_dirichlet_explicit_direction(self, dirichlet_zero_spec, dirichlet_grid):
        # V * integral(f1^4) - 1 = 3/2 - 1 = 1/2 from the closed form
        # integral of sin^4 over [0, pi] = 3 pi / 8 with f1 = sqrt(2/pi) sin
        f1 = dirichlet_zero_spec.eigenvector(1)
        u = make_direction(dirichlet_grid, dirichlet_grid.volume * f1**2 - 1.0)
        d = simple_derivative(dirichlet_zero_spec, 1, u)
        assert d > 0
        assert d == pytest.approx(0.5, abs=1e-3)

    def test_matches_finite_difference(self, circle_grid):
        rng = np.random.default_rng(1)
        checked = 0
        for _ in range(30):
            q = Potential.fourier(circle_grid, rng.standard_normal(3), rng.standard_normal(3))
            u = sample_probes(circle_grid, 1, int(rng.integers(1e9)), "fourier")[0]
            spec = solve_spectrum(circle_grid, q, 7)
            d = simple_derivative(spec, 1, u)
            if abs(d) < 0.05:
                continue
            fd = central_fd(circle_grid, q, 1, u, 1e-4)
            assert abs(d - fd) <= 1e-6 * abs(d)
            checked += 1
            if checked == 10:
                break
        assert checked >= 5


class TestClusterMatrix:
    def test_circle_cos2x(self, circle_zero_spec, circle_grid):
        # analytic oracle in the basis {cos x, sin x}/sqrt(pi):
        #   (1/pi) * integral cos(2x) cos(x)^2 = +1/2
        #   (1/pi) * integral cos(2x) sin(x)^2 = -1/2, cross term 0
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        cl = detect_cluster(circle_zero_spec, 2)
        M = cluster_matrix(circle_zero_spec, cl, u)
        slopes = M.branch_slopes()
        assert slopes == pytest.approx([-0.5, 0.5], abs=1e-6)

    def test_zero_direction(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.zeros(256))
        cl = detect_cluster(circle_zero_spec, 2)
        M = cluster_matrix(circle_zero_spec, cl, u)
        assert np.max(np.abs(M.entries)) == 0.0

    def test_symmetric(self, circle_zero_spec, circle_grid):
        u = sample_probes(circle_grid, 1, 5, "noise")[0]
        cl = detect_cluster(circle_zero_spec, 2)
        M = cluster_matrix(circle_zero_spec, cl, u).entries
        assert np.max(np.abs(M - M.T)) <= 1e-12

    def test_singleton_equals_simple(self, dirichlet_zero_spec, dirichlet_grid):
        u = sample_probes(dirichlet_grid, 1, 6, "fourier")[0]
        cl = detect_cluster(dirichlet_zero_spec, 1)
        M = cluster_matrix(dirichlet_zero_spec, cl, u)
        assert M.entries.shape == (1, 1)
        assert M.entries[0, 0] == pytest.approx(
            simple_derivative(dirichlet_zero_spec, 1, u), abs=1e-14
        )

    def test_branch_basis_diagonalizes(self, circle_grid):
        # the branch eigenbasis must diagonalize <u g_a, g_b>_w
        rng = np.random.default_rng(7)
        for _ in range(20):
            c = float(rng.uniform(-1, 1))
            spec = solve_spectrum(circle_grid, Potential.constant(circle_grid, c), 6)
            cl = detect_cluster(spec, 2)
            u = sample_probes(circle_grid, 1, int(rng.integers(1e9)), "noise")[0]
            M = cluster_matrix(spec, cl, u)
            _, vecs = M.branches()
            rotated = vecs.T @ M.entries @ vecs
            off = abs(rotated[0, 1])
            assert off <= 1e-10


class TestOneSidedDerivatives:
    def test_first_of_cluster(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        d = one_sided_derivatives(circle_zero_spec, 2, u)
        assert d.left == pytest.approx(0.5, abs=1e-6)
        assert d.right == pytest.approx(-0.5, abs=1e-6)

    def test_last_of_cluster(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        d = one_sided_derivatives(circle_zero_spec, 3, u)
        assert d.left == pytest.approx(-0.5, abs=1e-6)
        assert d.right == pytest.approx(0.5, abs=1e-6)

    def test_simple_sides_equal(self, dirichlet_zero_spec, dirichlet_grid):
        u = sample_probes(dirichlet_grid, 1, 8, "fourier")[0]
        d = one_sided_derivatives(dirichlet_zero_spec, 2, u)
        assert d.left == d.right
        assert d.left == pytest.approx(simple_derivative(dirichlet_zero_spec, 2, u), abs=1e-14)

    def test_branch_prediction_quadratic_error(self, circle_grid, circle_zero_spec):
        # lambda_2(q + t u) = lambda_2 + t * (side derivative) + O(t^2) with a
        # stable constant under halving of t
        for seed in range(4):
            u = sample_probes(circle_grid, 1, 100 + seed, "fourier")[0]
            d = one_sided_derivatives(circle_zero_spec, 2, u)
            base = circle_zero_spec.eigenvalue(2)
            constants = {}
            for t in (1e-3, 5e-4):
                shifted = Potential.from_values(circle_grid, t * u.values)
                lam = solve_spectrum(circle_grid, shifted, 6).eigenvalue(2)
                constants[t] = abs(lam - base - t * d.right) / t**2
            if constants[1e-3] > 1e-6:  # above solver noise
                ratio = constants[5e-4] / constants[1e-3]
                assert 0.5 <= ratio <= 2.0

    def test_negative_side_prediction(self, circle_grid, circle_zero_spec):
        u = sample_probes(circle_grid, 1, 321, "fourier")[0]
        d = one_sided_derivatives(circle_zero_spec, 2, u)
        base = circle_zero_spec.eigenvalue(2)
        for t in (1e-3, 1e-4):
            shifted = Potential.from_values(circle_grid, -t * u.values)
            lam = solve_spectrum(circle_grid, shifted, 6).eigenvalue(2)
            # left derivative governs t < 0
            assert abs(lam - (base - t * d.left)) <= 10 * t**2 + 1e-10


class TestCriticalProbe:
    def test_circle_cluster_critical(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        assert is_critical_probe(circle_zero_spec, 2, u)

    def test_dirichlet_not_critical(self, dirichlet_zero_spec, dirichlet_grid):
        f1 = dirichlet_zero_spec.eigenvector(1)
        u = make_direction(dirichlet_grid, dirichlet_grid.volume * f1**2 - 1.0)
        assert not is_critical_probe(dirichlet_zero_spec, 1, u)

    def test_zero_direction_critical(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.zeros(256))
        assert is_critical_probe(circle_zero_spec, 1, u)

    def test_constants_critical_on_circle(self, circle_grid):
        spec = solve_spectrum(circle_grid, Potential.constant(circle_grid, 0.2), 8)
        probes = mixed_probe_suite(circle_grid, 60, 17)
        for i in (1, 2, 3, 4, 5):
            cl = detect_cluster(spec, i)
            rank = cl.rank_of(i)
            first_or_last = rank == 0 or rank == cl.multiplicity - 1
            assert first_or_last
            critical = [is_critical_probe(spec, i, u) for u in probes]
            assert all(critical)
            if i >= 2:
                # degeneracy necessity: an index passing every probe is degenerate
                assert cl.multiplicity >= 2


class TestGapDerivatives:
    def test_circle_composed(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        d = gap_one_sided_derivatives(circle_zero_spec, 1, 2, u)
        assert d.right == pytest.approx(-0.5, abs=1e-6)
        assert d.left == pytest.approx(0.5, abs=1e-6)

    def test_zero_direction(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.zeros(256))
        d = gap_one_sided_derivatives(circle_zero_spec, 1, 2, u)
        assert d.left == 0.0 and d.right == 0.0

    def test_same_cluster_rejected(self, circle_zero_spec, circle_grid):
        u = make_direction(circle_grid, np.cos(2 * circle_grid.coords))
        with pytest.raises(DegenerateGapError):
            gap_one_sided_derivatives(circle_zero_spec, 2, 3, u)

    def test_simple_pair_matches_fd(self, dirichlet_grid):
        rng = np.random.default_rng(9)
        checked = 0
        for _ in range(20):
            q = Potential.fourier(dirichlet_grid, rng.standard_normal(3))
            u = sample_probes(dirichlet_grid, 1, int(rng.integers(1e9)), "fourier")[0]
            spec = solve_spectrum(dirichlet_grid, q, 9)
            d = gap_one_sided_derivatives(spec, 1, 2, u)
            assert d.left == pytest.approx(d.right, abs=1e-12)
            expected = simple_derivative(spec, 2, u) - simple_derivative(spec, 1, u)
            assert d.right == pytest.approx(expected, abs=1e-12)
            if abs(d.right) < 0.05:
                continue
            fd = fd_gap_derivative(dirichlet_grid, q, 1, 2, u, t=1e-4)
            assert abs(d.right - fd) <= 1e-6 * abs(d.right)
            checked += 1
            if checked == 5:
                break
        assert checked >= 3


class TestSampleProbes:
    def test_deterministic(self, circle_grid):
        a = sample_probes(circle_grid, 3, 7, "fourier")
        b = sample_probes(circle_grid, 3, 7, "fourier")
        for ua, ub in zip(a, b):
            assert np.array_equal(ua.values, ub.values)

    def test_distinct_seeds(self, circle_grid):
        a = sample_probes(circle_grid, 1, 7, "noise")[0]
        b = sample_probes(circle_grid, 1, 8, "noise")[0]
        assert not np.array_equal(a.values, b.values)

    @pytest.mark.parametrize("style", ["fourier", "spike", "noise"])
    def test_mean_zero_and_normalized(self, circle_grid, neumann_grid, torus_grid, style):
        for g in (circle_grid, neumann_grid, torus_grid):
            for u in sample_probes(g, 4, 11, style):
                assert abs(mean_value(g, u.values)) <= 1e-12
                assert np.max(np.abs(u.values)) == pytest.approx(1.0)

    def test_bad_style(self, circle_grid):
        with pytest.raises(ValueError):
            sample_probes(circle_grid, 1, 0, "plaid")

    def test_bad_count(self, circle_grid):
        with pytest.raises(ValueError):
            sample_probes(circle_grid, 0, 0, "noise")

    def test_fd_helper_consistency(self, circle_grid):
        # library helper against the locally defined quotient
        q = Potential.fourier(circle_grid, (0.4, 0.1), (0.2,))
        u = sample_probes(circle_grid, 1, 3, "fourier")[0]
        mine = central_fd(circle_grid, q, 1, u, 1e-4)
        theirs = fd_eigenvalue_derivative(circle_grid, q, 1, u, 1e-4)
        assert mine == pytest.approx(theirs, abs=1e-14)
