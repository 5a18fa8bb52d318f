import numpy as np
import pytest

from bospec.grid import assemble_hamiltonian, build_grid, restrict
from bospec.potential import expression_potential, quadratic_potential
from bospec.probe import (
    CutoffFamily,
    bump,
    commutator_decay,
    cutoff_profile,
    discreteness_certificate,
    essential_spectrum_probe,
    form_inequality_check,
    make_zhislin_vector,
)


def oscillator_op(points=199, length=10.0, h=1.0):
    grid = build_grid(1, 0, [length], [points])
    return assemble_hamiltonian(grid, quadratic_potential([[1.0]]), h)


class TestBump:
    def test_support(self):
        assert bump(0.0) == pytest.approx(1.0)
        assert bump(1.0) == 0.0
        assert bump(-1.0) == 0.0
        assert bump(2.0) == 0.0

    def test_smooth_positive_inside(self):
        t = np.linspace(-0.99, 0.99, 50)
        assert np.all(bump(t) > 0)
        assert np.all(bump(t) <= 1.0)

    def test_cutoff_profile(self):
        assert cutoff_profile(np.array([0.0, 0.5, 1.0]))[0] == 1.0
        assert cutoff_profile(np.array([2.0]))[0] == 0.0
        r = np.linspace(0, 3, 40)
        vals = cutoff_profile(r)
        assert np.all(np.diff(vals) <= 1e-15)


class TestZhislinVector:
    def test_normalized_and_supported(self):
        grid = build_grid(1, 1, [20.0, 20.0], [99, 99])
        v = make_zhislin_vector(grid, radius=5.0, k=None, width=3.0)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.all(restrict(np.abs(v), grid, 5.0) == 0)

    def test_complex_with_wavevector(self):
        grid = build_grid(1, 0, [40.0], [399])
        v = make_zhislin_vector(grid, radius=8.0, k=[1.0], width=5.0)
        assert np.iscomplexobj(v)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_width_unresolvable(self):
        grid = build_grid(1, 0, [10.0], [19])  # spacing = 1
        with pytest.raises(ValueError, match="width"):
            make_zhislin_vector(grid, radius=2.0, k=None, width=2.0)

    def test_support_exceeds_box(self):
        grid = build_grid(1, 0, [10.0], [199])
        with pytest.raises(ValueError, match="box"):
            make_zhislin_vector(grid, radius=6.0, k=None, width=3.0)


class TestEssentialProbe:
    def test_negative_lambda_rejected(self):
        grid = build_grid(1, 0, [40.0], [399])
        with pytest.raises(ValueError, match=">= 0"):
            essential_spectrum_probe(1.0, grid, [-1.0], [4.0, 8.0])

    def test_residuals_decay(self):
        grid = build_grid(1, 0, [80.0], [1999])
        reports = essential_spectrum_probe(1.0, grid, [0.0, 1.0], [5.0, 10.0, 20.0])
        for rep in reports:
            res = [e.residual for e in rep.entries]
            assert res[-1] < res[0]
            assert rep.verdict == "essential candidate"

    def test_target_near_lambda(self):
        grid = build_grid(1, 0, [80.0], [1999])
        (rep,) = essential_spectrum_probe(1.0, grid, [1.0], [5.0, 10.0])
        assert rep.entries[0].target == pytest.approx(1.0, abs=0.05)


class TestDiscretenessCertificate:
    def test_quadratic_exact_bounds(self):
        grid = build_grid(1, 1, [12.0, 12.0], [99, 99])
        pot = quadratic_potential([[1.0]], [[1.0]])
        op = assemble_hamiltonian(grid, pot, 1.0)
        rep = discreteness_certificate(op, pot, lam=4.0, radii=[3.0, 5.0])
        assert [e.lower_bound for e in rep.entries] == \
            pytest.approx([9.0 - 4.0, 25.0 - 4.0])
        assert rep.verdict == "discrete at lambda=4"

    def test_residuals_respect_bounds(self):
        grid = build_grid(1, 1, [12.0, 12.0], [99, 99])
        pot = quadratic_potential([[1.0]], [[1.0]])
        op = assemble_hamiltonian(grid, pot, 1.0)
        rep = discreteness_certificate(op, pot, lam=2.0, radii=[3.0, 5.0])
        for e in rep.entries:
            if e.lower_bound > 0:
                assert e.residual >= e.lower_bound

    def test_zero_potential_inconclusive(self):
        grid = build_grid(1, 0, [20.0], [199])
        pot = expression_potential("0*x1", 1, 0, nonnegative=True)
        op = assemble_hamiltonian(grid, pot, 1.0)
        rep = discreteness_certificate(op, pot, lam=1.0, radii=[3.0, 5.0])
        assert rep.verdict == "inconclusive"

    def test_refuses_unclaimed_potential(self):
        grid = build_grid(1, 0, [20.0], [199])
        pot = expression_potential("x1", 1, 0, nonnegative=False)
        op = assemble_hamiltonian(grid, pot, 1.0)
        with pytest.raises(ValueError, match="nonnegative"):
            discreteness_certificate(op, pot, lam=0.0, radii=[3.0])

    def test_radius_too_close_to_wall(self):
        grid = build_grid(1, 0, [10.0], [49])
        pot = quadratic_potential([[1.0]])
        op = assemble_hamiltonian(grid, pot, 1.0)
        with pytest.raises(ValueError, match="room"):
            discreteness_certificate(op, pot, lam=0.0, radii=[9.5])


class TestCommutator:
    def test_constant_cutoff_commutes(self):
        op = oscillator_op(points=99)
        family = CutoffFamily(scales=(1000.0,))  # phi = 1 on the whole box
        results = commutator_decay(op, family, probes=1, seed=0)
        assert results[0][1] == 0.0

    def test_probes_must_be_positive(self):
        op = oscillator_op(points=49)
        with pytest.raises(ValueError, match="probes"):
            commutator_decay(op, CutoffFamily(scales=(2.0,)), probes=0)

    def test_decay_with_scale(self):
        grid = build_grid(1, 0, [40.0], [799])
        op = assemble_hamiltonian(grid, quadratic_potential([[1.0]]), 1.0)
        results = commutator_decay(op, CutoffFamily(scales=(4.0, 8.0, 16.0)),
                                   probes=2, seed=0)
        ests = [e for _, e in results]
        assert ests[1] < ests[0]
        assert ests[2] < ests[1]

    def test_deterministic(self):
        op = oscillator_op(points=149)
        family = CutoffFamily(scales=(3.0, 6.0))
        a = commutator_decay(op, family, probes=2, seed=7)
        b = commutator_decay(op, family, probes=2, seed=7)
        assert a == b

    def test_matches_matrix_commutator_on_smooth_vector(self):
        # the assembled first-order form and the matrix commutator
        # H(phi u) - phi(H u) both approximate the same continuum object;
        # their gap on a smooth vector shrinks under refinement
        from bospec.probe import _commutator_apply

        gaps = []
        for points in (199, 399):
            grid = build_grid(1, 0, [20.0], [points])
            op = assemble_hamiltonian(grid, quadratic_potential([[1.0]]), 1.0)
            x = grid.node_coords()[:, 0]
            u = np.exp(-(x**2) / 8)
            u /= np.linalg.norm(u)
            phi = cutoff_profile(np.abs(x) / 5.0)
            assembled = _commutator_apply(op, phi)(u)
            direct = op.matrix @ (phi * u) - phi * (op.matrix @ u)
            gaps.append(np.linalg.norm(assembled - direct)
                        / np.linalg.norm(direct))
        assert gaps[0] < 0.2
        assert gaps[1] < gaps[0]


class TestFormChain:
    def test_oscillator_no_violations(self):
        op = oscillator_op(points=199)
        report = form_inequality_check(op, trials=50, seed=0)
        assert report.violations == 0
        assert report.max_violation <= report.tolerance

    def test_zero_potential(self):
        grid = build_grid(1, 0, [10.0], [99])
        pot = expression_potential("0*x1", 1, 0, nonnegative=True)
        op = assemble_hamiltonian(grid, pot, 0.5)
        report = form_inequality_check(op, trials=30, seed=1)
        assert report.violations == 0

    def test_refuses_unclaimed(self):
        grid = build_grid(1, 0, [10.0], [99])
        pot = expression_potential("x1", 1, 0, nonnegative=False)
        op = assemble_hamiltonian(grid, pot, 0.5)
        with pytest.raises(ValueError, match="nonnegative"):
            form_inequality_check(op, trials=10)

    def test_trials_positive(self):
        op = oscillator_op(points=49)
        with pytest.raises(ValueError, match="trials"):
            form_inequality_check(op, trials=0)
