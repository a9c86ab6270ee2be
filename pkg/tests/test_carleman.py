import math

import numpy as np
import pytest

from bvschro.bvcalc import PiecewiseBV, SignedMeasure
from bvschro.carleman import (HypothesisFailureError, PhaseSpec,
                              atom_inequality_values, build_mu, build_weight,
                              check_atom_inequalities, choose_phase_slope,
                              compute_tau, constant_report, evaluate_estimate,
                              exterior_inf)
from bvschro.operator import CoefficientSpec, SpectralPoint

FREE = CoefficientSpec()


def appendix_barrier_spec(M=10.0):
    return CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, M),
                           b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))


class TestPhase:
    def test_shape_invariants(self):
        ph = PhaseSpec(R1=1.0, k=2.0)
        xs = np.linspace(-3, 3, 61)
        assert ph.phi(0.0) == 0.0
        assert np.max(np.abs(ph.phi(xs) - ph.phi(-xs))) < 1e-14   # even
        assert np.all(ph.dphi(xs[xs > 0]) >= -1e-14)              # slope >= 0 right
        assert ph.dphi(0.5) == 2.0
        assert ph.dphi(2.5) == 0.0
        assert ph.sup_phi == pytest.approx(3.0)                   # k R1 (1 + 1/2)

    def test_taper_is_smooth_at_joints(self):
        ph = PhaseSpec(R1=1.0, k=2.0)
        d = ph.dphi.derivative_measure()
        assert [x for x, _ in d.atoms] == [0.0]                   # only the origin jump
        assert d.atoms[0][1] == pytest.approx(4.0)                # -k -> +k


class TestTau:
    def test_trivial(self):
        assert compute_tau(FREE, PhaseSpec(1.0, 0.0), 1.0) == pytest.approx(1.0)

    def test_well_with_phase(self):
        spec = CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, 2.0))
        assert compute_tau(spec, PhaseSpec(1.0, 2.0), 1.0) == pytest.approx(1.0)

    def test_magnetic_step_against_dense_sampling(self):
        spec = CoefficientSpec(b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0),
                               V1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
        ph = PhaseSpec(1.0, 0.7)
        got = compute_tau(spec, ph, 1.0)
        xs = np.linspace(-4, 4, 40001)
        dens = ((1.0 - spec.V1(xs)) + ph.dphi(xs) ** 2 + spec.b1(xs) ** 2)
        assert got == pytest.approx(float(np.min(dens)), abs=1e-6)


class TestChoosePhaseSlope:
    def test_zero_slope_when_positive(self):
        ph = choose_phase_slope(FREE, 1.0, 1.0)
        assert ph.k == 0.0

    def test_well_slope_grid_value(self):
        spec = CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, 2.0))
        ph = choose_phase_slope(spec, 1.0, 1.0)
        ratio = 10.0 ** (1.0 / 64.0)
        assert np.sqrt(1.5) <= ph.k <= np.sqrt(1.5) * ratio
        assert compute_tau(spec, ph, 1.0) >= 0.5

    def test_hypothesis_failure(self):
        spec = CoefficientSpec(V1=PiecewiseBV.constant(2.0))
        assert exterior_inf(spec, 1.0, 1.0) <= 0
        with pytest.raises(HypothesisFailureError):
            choose_phase_slope(spec, 1.0, 1.0)


class TestBuildMu:
    def test_trivial_is_zero(self):
        mu = build_mu(FREE, PhaseSpec(1.0, 0.0), 1.0)
        assert mu.atoms == []
        assert mu.density.l1_norm() == 0.0

    def test_single_dirac(self):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(0.0, 1.0))
        mu = build_mu(spec, PhaseSpec(1.0, 0.0), 1.0)
        assert mu.atoms == [(0.0, 1.0)]

    def test_dirac_scales_with_h_and_beta(self):
        beta = PiecewiseBV([-0.5, 0.5], [[1.0], [2.0], [1.0]])
        spec = CoefficientSpec(h=0.5, beta=beta, V0=SignedMeasure.dirac(0.0, 1.0))
        mu = build_mu(spec, PhaseSpec(1.0, 0.0), 1.0)
        assert mu.atom_mass(0.0) == pytest.approx(1.0 / (0.5 * 2.0))

    def test_b1_step_atoms(self):
        spec = CoefficientSpec(b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
        mu = build_mu(spec, PhaseSpec(1.0, 0.0), 1.0)
        assert mu.atoms == [(-1.0, 1.0), (1.0, 1.0)]
        assert mu.density.l1_norm() == pytest.approx(0.0, abs=1e-14)

    def test_term_by_term_assembly(self):
        # every displayed term contributes: compare against a manual sum
        h = 0.5
        E = 1.0
        spec = CoefficientSpec(h=h,
                               b1=PiecewiseBV.indicator(-1.0, 1.0, 0.8),
                               b0=PiecewiseBV.indicator(-0.5, 0.5, 0.4),
                               V0=SignedMeasure.dirac(0.25, -0.7),
                               V1=PiecewiseBV.indicator(-2.0, 2.0, 0.3))
        ph = PhaseSpec(2.0, 1.1)
        mu = build_mu(spec, ph, E)
        # atoms: +-2 (V1 jump), +-1 (b1^2 jump), 0.25 (V0 atom), 0 (phase-slope jump)
        locs = [x for x, _ in mu.atoms]
        assert locs == [-2.0, -1.0, 0.0, 0.25, 1.0, 2.0]
        b = spec.b
        assert mu.atom_mass(0.25) == pytest.approx(0.7 / h)
        assert mu.atom_mass(0.0) == pytest.approx(2 * 1.1)          # |d(phi')| at 0
        # at x=1: jump of (E - V1) + phi'^2 + b1^2 is -0.64 (b1^2 drops)
        assert mu.atom_mass(1.0) == pytest.approx(0.64)
        assert mu.atom_mass(-2.0) == pytest.approx(0.3)
        # AC density at a smooth magnetic point: h^{-1}|b1^2-b^2| + 4 h^{-1}phi'(b^2+|b|)
        x = 0.3
        expected = (abs(spec.b1(x) ** 2 - b(x) ** 2) / h
                    + 4.0 / h * abs(ph.dphi(x)) * (b(x) ** 2 + abs(b(x)))
                    + abs(2 * ph.dphi(x) * 1.1 * 0.0))
        assert mu.density(x) == pytest.approx(expected)


class TestWeight:
    def test_arctan_closed_form(self):
        w = build_weight(FREE, PhaseSpec(1.0, 0.0), 1.0, s=1.0)
        assert w.kappa == 2.0
        xs = np.linspace(-3, 3, 25)
        ref = np.sign(xs + 1e-300) * np.expm1(2 * np.arctan(np.abs(xs)))
        assert np.max(np.abs(w.w(xs, 0.1) - ref)) < 1e-13

    def test_w_vanishes_at_origin(self):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(1.0, 1.0))
        w = build_weight(spec, PhaseSpec(0.0, 0.0), 1.0, s=1.0)
        for eta in (1.0, 0.1, 0.001):
            assert w.w(0.0, eta) == 0.0

    def test_single_atom_limit_value(self):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(1.0, 1.0))
        w = build_weight(spec, PhaseSpec(0.0, 0.0), 1.0, s=1.0, tau=1.0)
        assert w.M == 8.0 and w.W == {1.0: 8.0}
        expected = 0.0 + math.log(math.expm1(2 * math.atan(1.0))) + 4.0
        assert w.limit_log_abs_w(1.0) == pytest.approx(expected, abs=1e-12)

    def test_eta_limit_convergence_and_monotonicity(self):
        spec = CoefficientSpec(V0=SignedMeasure(
            PiecewiseBV.constant(0.0),
            [(1.0, 0.5), (2.0, 0.25), (-1.5, 0.8)]))
        w = build_weight(spec, PhaseSpec(0.0, 0.0), 1.0, s=1.0, tau=1.0)
        gap = 0.5  # min atom separation
        for xj in w.W:
            limit = w.limit_log_abs_w(xj)
            vals = [float(np.log(np.abs(w.w(xj, eta))))
                    for eta in (1e-3 * gap, 2e-3 * gap, 4e-3 * gap)]
            assert vals[0] == pytest.approx(limit, abs=1e-3)
            # trend toward the limit is monotone below the gap scale
            errs = [abs(v - limit) for v in vals]
            assert errs[0] <= errs[1] + 1e-15 <= errs[2] + 2e-15

    def test_dw_density_nonnegative(self):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(0.5, 1.2),
                               b1=PiecewiseBV.indicator(-1.0, 1.0, 0.6))
        ph = PhaseSpec(1.0, 0.9)
        w = build_weight(spec, ph, 1.0, s=1.0)
        xs = np.linspace(-4, 4, 801)
        for eta in (0.3, 0.05, 0.01):
            assert np.min(w.dw_density(xs, eta)) >= -1e-12

    def test_sup_bounded_by_C_w(self):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(0.5, 1.2))
        w = build_weight(spec, PhaseSpec(1.0, 0.0), 1.0, s=1.0)
        xs = np.linspace(-30, 30, 2001)
        for eta in (1.0, 0.1, 0.01):
            assert np.max(np.log(np.abs(w.w(xs, eta)) + 1e-300)) <= w.log_C_w + 1e-12

    def test_general_s_matches_quadrature(self):
        from scipy.integrate import quad as squad
        w = build_weight(FREE, PhaseSpec(1.0, 0.0), 1.0, s=0.8)
        for x in (0.5, 1.7, -2.3):
            ref, _ = squad(lambda t: (1 + t * t) ** -0.8, 0.0, abs(x))
            assert float(w.q2(x)) == pytest.approx(w.kappa * ref, rel=1e-10)

    def test_tau_must_be_positive(self):
        spec = CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, 2.0))
        with pytest.raises(HypothesisFailureError):
            build_weight(spec, PhaseSpec(1.0, 0.0), 1.0, s=1.0)


class TestAtomInequalities:
    def test_reference_values(self):
        e1, e2 = atom_inequality_values(1.0, 1.0, M=8.0)
        assert e1 == pytest.approx(math.exp(8) - 1 - 2 * math.exp(6))
        assert e2 == pytest.approx(2 * (math.exp(4) - 1) - math.exp(2))
        assert e1 > 0 and e2 > 0

    def test_zero_mass_boundary(self):
        e1, e2 = atom_inequality_values(1.0, 0.0)
        assert e1 == 0.0 and e2 == 0.0

    def test_small_tau(self):
        for mj in (0.1, 1.0, 5.0):
            e1, e2 = atom_inequality_values(0.5, mj)
            assert e1 >= 0.0 and e2 >= 0.0

    def test_nonnegative_on_weight(self):
        spec = appendix_barrier_spec()
        ph = choose_phase_slope(spec, 1.0, 1.0)
        w = build_weight(spec, ph, 1.0, s=1.0)
        for e1, e2 in check_atom_inequalities(w).values():
            assert e1 >= 0.0 and e2 >= 0.0


class TestEstimate:
    def test_zero_data(self):
        w = build_weight(FREE, PhaseSpec(1.0, 0.0), 1.0, s=1.0)
        out = evaluate_estimate(FREE, PhaseSpec(1.0, 0.0), w,
                                SpectralPoint(1.0, 0.05), lambda x: np.zeros_like(x) + 0j)
        assert out["lhs"] == 0.0 and out["rhs_f"] == 0.0 and out["rhs_eps"] == 0.0

    def test_lhs_monotone_in_phase_slope(self):
        spec = appendix_barrier_spec()
        w = build_weight(spec, choose_phase_slope(spec, 1.0, 1.0), 1.0, s=1.0)
        point = SpectralPoint(1.0, 0.05)
        f = lambda x: np.exp(-x * x) + 0j
        ph1 = PhaseSpec(1.0, 3.0)
        ph2 = PhaseSpec(1.0, 4.0)
        out1 = evaluate_estimate(spec, ph1, w, point, f)
        out2 = evaluate_estimate(spec, ph2, w, point, f, solution=out1["solution"])
        assert out2["lhs"] > out1["lhs"]

    def test_inequality_on_barrier_instance(self):
        spec = appendix_barrier_spec()
        E = 1.0
        ph = choose_phase_slope(spec, E, 1.0)
        w = build_weight(spec, ph, E, s=1.0)
        rep = constant_report(spec, ph, w, E, eps0=0.1)
        out = evaluate_estimate(spec, ph, w, SpectralPoint(E, 0.05),
                                lambda x: np.cos(1.1 * x) * np.exp(-x * x) + 0j)
        log_lhs = math.log(out["lhs"])
        log_rhs = math.log(out["rhs_f"] + out["rhs_eps"])
        assert log_lhs <= rep.log_value + log_rhs


class TestConstantReport:
    def test_regression_baseline(self):
        w = build_weight(FREE, PhaseSpec(1.0, 0.0), 1.0, s=1.0)
        rep = constant_report(FREE, PhaseSpec(1.0, 0.0), w, 1.0, eps0=0.1)
        # frozen one-time assembly of the trivial-coefficient composition
        assert rep.log_value == pytest.approx(5.043327360073168, abs=1e-9)

    def test_monotone_in_phase_sup(self):
        spec = appendix_barrier_spec()
        w = build_weight(spec, choose_phase_slope(spec, 1.0, 1.0), 1.0, s=1.0)
        r_small = constant_report(spec, PhaseSpec(1.0, 2.95), w, 1.0, eps0=0.1)
        r_big = constant_report(spec, PhaseSpec(1.0, 3.3), w, 1.0, eps0=0.1)
        assert r_big.log_value >= r_small.log_value

    def test_monotone_in_V0_mass(self):
        ph = PhaseSpec(1.0, 0.0)
        s1 = CoefficientSpec(V0=SignedMeasure.dirac(0.0, 1.0))
        s2 = CoefficientSpec(V0=SignedMeasure.dirac(0.0, 2.0))
        w1 = build_weight(s1, ph, 1.0, s=1.0)
        w2 = build_weight(s2, ph, 1.0, s=1.0)
        assert (constant_report(s2, ph, w2, 1.0, eps0=0.1).log_value
                >= constant_report(s1, ph, w1, 1.0, eps0=0.1).log_value)

    def test_provenance_factors(self):
        w = build_weight(FREE, PhaseSpec(1.0, 0.0), 1.0, s=1.0)
        rep = constant_report(FREE, PhaseSpec(1.0, 0.0), w, 1.0, eps0=0.1)
        prov = rep.provenance()
        assert "weight-sup-bound-log" in prov["factors"]
        assert prov["log_C"] == rep.log_value
