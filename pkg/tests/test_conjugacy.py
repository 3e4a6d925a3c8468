import math
import random

import numpy as np
import pytest

from coclab.cocycles import ConstantCocycle, CosinePotential, SchrodingerCocycle
from coclab.conjugacy import (
    ConjugacyMap,
    audit_residual,
    compute_conjugacy,
    holder_exponent_estimate,
    parse_conjugacy,
    serialize_conjugacy,
    transport_cocycle,
    transported_exponent_pullback,
    transported_seminorm_check,
    verify_transport_identity,
)
from coclab.errors import ConjugacyConvergenceError, InvalidParameterError
from coclab.lyapunov import top_exponent
from coclab.matrices import Mat2
from coclab.torus import LinearToral, PerturbedToral, TorusPoint, distance


@pytest.fixture(scope="module")
def cat():
    return LinearToral(2, 1, 1, 1)


@pytest.fixture(scope="module")
def h_small(cat):
    """Conjugacy for the eps = 0.01 shear perturbation at resolution 128."""
    return compute_conjugacy(cat, PerturbedToral(cat, 0.01), 128, tol=1e-3)


@pytest.fixture(scope="module")
def identity_h(cat):
    return compute_conjugacy(cat, PerturbedToral(cat, 0.0), 64, tol=1e-12)


class TestComputeConjugacy:
    def test_zero_perturbation_gives_identity(self, identity_h):
        assert identity_h.max_displacement == 0.0
        assert identity_h.residual == 0.0

    def test_small_perturbation_converges(self, h_small):
        assert h_small.residual <= 1e-3
        assert 0.0 < h_small.max_displacement <= 0.25

    def test_residual_reproducible_on_independent_audit(self, cat, h_small):
        g = PerturbedToral(cat, 0.01)
        shifted = audit_residual(h_small, cat, g, factor=4, offset=0.37)
        assert shifted <= 2.0 * h_small.residual
        assert h_small.residual <= 2.0 * shifted

    def test_fixed_point_correspondence(self, cat, h_small):
        """h maps the linear fixed point to the perturbed map's fixed point."""
        g = PerturbedToral(cat, 0.01)
        h00 = h_small.forward(TorusPoint(0.0, 0.0))
        # Newton oracle: g's fixed point near the origin (the shears vanish
        # there, so it stays exactly at the origin)
        assert distance(g.apply(h00), h00) <= 1e-12

    def test_bijection_on_samples(self, h_small):
        rng = random.Random(3)
        for _ in range(200):
            p = TorusPoint(rng.random(), rng.random())
            assert distance(h_small.forward(h_small.inverse(p)), p) <= 1e-9
            assert distance(h_small.inverse(h_small.forward(p)), p) <= 1e-9

    def test_bijection_on_full_lattice(self, h_small):
        g = h_small.resolution
        worst = 0.0
        for i in range(g):
            for j in range(g):
                p = TorusPoint(i / g, j / g)
                worst = max(worst, distance(h_small.forward(h_small.inverse(p)), p))
        assert worst <= 1e-9

    def test_exponent_invariance_at_larger_eps(self, cat):
        """Pullback-class exponent agreement at the top of the eps range."""
        g = PerturbedToral(cat, 0.02)
        h = compute_conjugacy(cat, g, 128, tol=2e-3)
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        x = TorusPoint(0.411, 0.137)
        lam_f = top_exponent(c, cat, x, 100000).value
        pulled = transported_exponent_pullback(c, cat, g, h, x, 100000)
        assert abs(lam_f - pulled.value) <= 5e-3

    def test_unreachable_tolerance_reports_residual(self, cat):
        g = PerturbedToral(cat, 0.01)
        with pytest.raises(ConjugacyConvergenceError) as err:
            compute_conjugacy(cat, g, 64, tol=1e-9)
        assert err.value.last_residual > 1e-9
        assert err.value.sweeps >= 1

    def test_preconditions(self, cat):
        g = PerturbedToral(cat, 0.01)
        with pytest.raises(InvalidParameterError):
            compute_conjugacy(cat, g, 32, tol=1e-3)
        other = LinearToral(5, 3, 3, 2)
        with pytest.raises(InvalidParameterError):
            compute_conjugacy(other, g, 64, tol=1e-3)

    def test_non_symmetric_linear_part(self):
        """Non-orthogonal eigenprojections are handled by the sweep."""
        skew = LinearToral(2, 1, 3, 2)  # trace 4, det 1, not symmetric
        g = PerturbedToral(skew, 0.005)
        h = compute_conjugacy(skew, g, 64, tol=2e-3)
        assert h.residual <= 2e-3
        rng = random.Random(4)
        for _ in range(50):
            p = TorusPoint(rng.random(), rng.random())
            assert distance(h.forward(h.inverse(p)), p) <= 1e-9


class TestTransport:
    def test_identity_transport_is_pointwise_equal(self, identity_h):
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        t = transport_cocycle(c, identity_h, "inverse")
        rng = random.Random(8)
        for _ in range(50):
            p = TorusPoint(rng.random(), rng.random())
            assert t.eval(p) == c.eval(p)

    def test_constant_cocycle_transport_is_noop(self, h_small):
        c = ConstantCocycle(Mat2(3.0, -1.0, 1.0, 0.0))
        t = transport_cocycle(c, h_small, "inverse")
        rng = random.Random(9)
        for _ in range(20):
            p = TorusPoint(rng.random(), rng.random())
            assert t.eval(p) == c.eval(p)

    def test_forward_inverse_roundtrip_oracle(self, h_small):
        """eval of B o h^{-1} at h(x) recovers B(x) through the roundtrip."""
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        t = transport_cocycle(c, h_small, "inverse")
        rng = random.Random(10)
        for _ in range(50):
            p = TorusPoint(rng.random(), rng.random())
            got = t.eval(h_small.forward(p))
            want = c.eval(p)
            diff = got.sub(want)
            assert diff.norm() <= 2.0 * math.pi * 1e-9 * 10  # roundtrip <= 1e-9 in x

    def test_direction_argument_validated(self, h_small):
        with pytest.raises(InvalidParameterError):
            transport_cocycle(ConstantCocycle(Mat2.identity()), h_small, "sideways")

    def test_transport_requires_invertible_field(self):
        """A steep displacement field fails the lattice Jacobian check."""
        g = 64
        import numpy as np

        idx = np.arange(g) / g
        U, _ = np.meshgrid(idx, idx, indexing="ij")
        # |du/du| = 2 pi * 6 * 0.2 > 1, folds the identity over
        du = 0.2 * np.sin(2.0 * math.pi * 6.0 * U)
        steep = ConjugacyMap(du, np.zeros((g, g)), g, residual=1.0)
        with pytest.raises(InvalidParameterError, match="singular"):
            transport_cocycle(ConstantCocycle(Mat2.identity()), steep, "inverse")


class TestTransportIdentity:
    def test_exact_at_identity_conjugacy(self, cat, identity_h):
        for c in (
            SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0)),
            ConstantCocycle(Mat2.diagonal(2.0, 0.5)),
        ):
            rep = verify_transport_identity(
                c, cat, PerturbedToral(cat, 0.0), identity_h, TorusPoint(0.37, 0.61), 50
            )
            assert rep.max_defect <= 1e-12

    def test_constant_cocycle_exact_for_any_conjugacy(self, cat, h_small):
        rep = verify_transport_identity(
            ConstantCocycle(Mat2(3.0, -1.0, 1.0, 0.0)),
            cat,
            PerturbedToral(cat, 0.01),
            h_small,
            TorusPoint(0.37, 0.61),
            50,
        )
        assert rep.max_defect <= 1e-12

    def test_defect_constant_reported(self, cat, h_small):
        rep = verify_transport_identity(
            SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0)),
            cat,
            PerturbedToral(cat, 0.01),
            h_small,
            TorusPoint(0.37, 0.61),
            100,
        )
        assert rep.max_defect >= 0.0
        assert rep.bound_constant is not None and rep.bound_constant > 0.0
        # the reported constant makes the stated bound hold by construction
        sem_scale = rep.bound_constant * rep.n * h_small.residual
        assert rep.max_defect <= sem_scale * 2.0 * math.pi + 1e-9

    def test_exponent_agreement_on_pullback_class(self, cat, h_small):
        """Transported exponent sampled on h(Lebesgue) matches the original."""
        g = PerturbedToral(cat, 0.01)
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        x = TorusPoint(0.123, 0.789)
        lam_f = top_exponent(c, cat, x, 20000).value
        pulled = transported_exponent_pullback(c, cat, g, h_small, x, 20000)
        assert abs(lam_f - pulled.value) <= 5e-3
        assert pulled.max_orbit_defect <= 10.0 * h_small.residual

    def test_pullback_walk_rejects_non_conjugacy(self, cat, h_small):
        """A displacement field that solves nothing fails the orbit check."""
        import numpy as np

        g = PerturbedToral(cat, 0.01)
        bogus = ConjugacyMap(
            0.01 * np.cos(2 * math.pi * np.random.default_rng(0).random((128, 128))),
            np.zeros((128, 128)),
            128,
            residual=h_small.residual,
        )
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        with pytest.raises(InvalidParameterError, match="pseudo-orbit"):
            transported_exponent_pullback(c, cat, g, bogus, TorusPoint(0.2, 0.4), 500)

    def test_lebesgue_class_gap_is_second_order(self, cat, h_small):
        """Sampling g's own Lebesgue class shows the documented measure gap.

        Floating g-orbits equidistribute for Lebesgue-of-g, whose pullback
        through h differs from Lebesgue at second order in eps; the
        exponent mismatch is real, small, and bounded here empirically.
        """
        g = PerturbedToral(cat, 0.01)
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        t = transport_cocycle(c, h_small, "inverse")
        rng = random.Random(21)
        diffs = []
        for _ in range(3):
            x = TorusPoint(rng.random(), rng.random())
            lam_f = top_exponent(c, cat, x, 20000).value
            lam_g = top_exponent(t, g, h_small.forward(x), 20000).value
            diffs.append(lam_g - lam_f)
        assert abs(sum(diffs) / len(diffs)) <= 2e-2


class TestHolderExponent:
    def test_identity_degenerate(self, identity_h):
        fit = holder_exponent_estimate(identity_h, 2000, 5)
        assert fit.degenerate
        assert fit.gamma_hat == 1.0

    def test_perturbed_fit(self, cat):
        h = compute_conjugacy(cat, PerturbedToral(cat, 0.05), 128, tol=1e-2)
        fit = holder_exponent_estimate(h, 3000, 17)
        assert not fit.degenerate
        assert 0.0 < fit.gamma_hat <= 1.1
        assert fit.r2 >= 0.9

    def test_pair_budget_enforced(self, identity_h):
        with pytest.raises(InvalidParameterError):
            holder_exponent_estimate(identity_h, 500, 0)


class TestTransportedSeminorm:
    def test_equal_cocycles_identity_map(self, identity_h):
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        chk = transported_seminorm_check(c, c, identity_h, 1.0, 300)
        assert chk.seminorm == 0.0
        assert chk.bound == 0.0

    def test_equal_cocycles_real_conjugacy(self, h_small):
        c = SchrodingerCocycle(energy=3.0, potential=CosinePotential(1.0))
        chk = transported_seminorm_check(c, c, h_small, 1.0, 400)
        assert chk.seminorm > 0.0
        assert chk.seminorm <= chk.bound + 1e-12

    def test_constant_pair_has_zero_seminorm(self, h_small):
        a = ConstantCocycle(Mat2.diagonal(2.0, 0.5))
        b = ConstantCocycle(Mat2(3.0, -1.0, 1.0, 0.0))
        chk = transported_seminorm_check(a, b, h_small, 1.0, 300)
        assert chk.seminorm == 0.0
        assert chk.bound >= 0.0

    def test_bound_holds_across_samples(self, h_small):
        rng = random.Random(55)
        for seed in range(5):
            a = SchrodingerCocycle(energy=2.0 + rng.random(), potential=CosinePotential(0.5))
            b = SchrodingerCocycle(energy=2.0 + rng.random(), potential=CosinePotential(0.7))
            chk = transported_seminorm_check(a, b, h_small, 0.9, 200, seed=seed)
            assert chk.seminorm <= chk.bound + 1e-12


class TestSerialization:
    def test_bit_exact_round_trip(self, h_small):
        text = serialize_conjugacy(h_small)
        assert text.startswith("conjugacy v1 resolution=128 residual=")
        back = parse_conjugacy(text)
        assert back.resolution == h_small.resolution
        assert back.residual == h_small.residual
        assert np.array_equal(back.du, h_small.du)
        assert np.array_equal(back.dv, h_small.dv)

    def test_header_and_shape_validation(self):
        with pytest.raises(InvalidParameterError):
            parse_conjugacy("bogus\n")
        with pytest.raises(InvalidParameterError):
            parse_conjugacy("conjugacy v1 resolution=2 residual=0.0\n0 0 0.0 0.0\n")

    def test_displacement_cap_enforced(self):
        big = np.full((64, 64), 0.3)
        with pytest.raises(InvalidParameterError):
            ConjugacyMap(big, np.zeros((64, 64)), 64, 0.0)
