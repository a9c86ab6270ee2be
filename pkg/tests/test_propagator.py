import numpy as np
import pytest

from bvschro.bvcalc import PiecewiseBV
from bvschro.operator import CoefficientSpec
from bvschro.propagator import (build_quadrature, decay_fit, schrodinger_evolve,
                                wave_evolve)
from bvschro.resonance import CutoffSpec, smooth_bump

FREE = CoefficientSpec()


def wide_cutoff():
    # chi = 1 on [-4.5, 4.5]: the inner cutoff then acts trivially on a
    # unit Gaussian (chi*v = v up to ~1e-9)
    chi = smooth_bump(4.5, 6.0)
    return CutoffSpec(chi, smooth_bump(6.0, 7.0), smooth_bump(7.0, 8.0), 4.5, 6.0)


GAUSS = lambda x: np.exp(-np.asarray(x) ** 2)


class TestSchrodinger:
    def test_free_evolution_matches_kernel(self):
        cut = wide_cutoff()
        res = schrodinger_evolve(FREE, cut, GAUSS, [0.0, 1.0, 5.0], Lambda=60.0,
                                 check_halving=False)
        quad = build_quadrature(FREE, cut, GAUSS, 60.0, 5.0)
        for i, t in enumerate([0.0, 1.0, 5.0]):
            a = 1 + 4j * t
            exact = quad.chi_nodes * np.exp(-quad.grid.x ** 2 / a) / np.sqrt(a)
            n_exact = quad.norm_of(exact)
            assert res.norms[i] == pytest.approx(n_exact, rel=0.01)

    def test_t0_equals_projected_norm(self):
        cut = wide_cutoff()
        res = schrodinger_evolve(FREE, cut, GAUSS, [0.0], Lambda=60.0,
                                 check_halving=False)
        resc = wave_evolve(FREE, cut, GAUSS, [0.0], Lambda=60.0, kind="cosine",
                           check_halving=False)
        assert res.norms[0] == pytest.approx(resc.norms[0], rel=1e-10)
        assert res.norms[0] == pytest.approx((np.pi / 2) ** 0.25, rel=0.01)

    def test_halving_self_consistency(self):
        cut = wide_cutoff()
        res = schrodinger_evolve(FREE, cut, GAUSS, [0.0, 2.0], Lambda=40.0)
        assert res.halving_error < 0.01
        assert not res.refinement_needed

    def test_jump_samples_positive_and_selfadjoint(self):
        cut = wide_cutoff()
        quad = build_quadrature(FREE, cut, GAUSS, 40.0, 2.0)
        assert quad.jump_positivity >= -1e-9
        assert quad.jump_skew_defect <= 1e-9

    def test_jump_selfadjoint_with_magnetic_term(self):
        spec = CoefficientSpec(b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
        cut = CutoffSpec.for_spec(spec)
        quad = build_quadrature(spec, cut, GAUSS, 30.0, 2.0)
        assert quad.jump_positivity >= -1e-9
        assert quad.jump_skew_defect <= 1e-9

    def test_unitarity_proxy(self):
        # chi == 1 on a huge box relative to the wave packet and time window
        chi = smooth_bump(9.0, 11.0)
        cut = CutoffSpec(chi, smooth_bump(11.0, 12.0), smooth_bump(12.0, 13.0),
                         9.0, 11.0)
        res = schrodinger_evolve(FREE, cut, GAUSS, [0.0, 0.5, 1.0], Lambda=60.0,
                                 check_halving=False)
        assert np.max(np.abs(res.norms - res.norms[0])) <= 0.02 * res.norms[0]


class TestWave:
    def test_sine_vanishes_at_zero(self):
        cut = wide_cutoff()
        res = wave_evolve(FREE, cut, GAUSS, [0.0, 0.7], Lambda=40.0, kind="sine",
                          check_halving=False)
        assert res.norms[0] == 0.0
        assert res.norms[1] > 0.0

    def test_huygens_support_propagation(self):
        vb = smooth_bump(0.5, 1.0)
        chi = smooth_bump(1.0, 2.0)
        cut = CutoffSpec(chi, smooth_bump(2.0, 3.0), smooth_bump(3.0, 4.0), 1.0, 2.0)
        res = wave_evolve(FREE, cut, lambda x: vb(x), [0.0, 4.0, 6.0], Lambda=120.0,
                          kind="cosine", check_halving=False)
        # d'Alembert: support of chi cos(t sqrt(H)) chi v is empty for t > 3
        assert res.norms[1] <= 0.02 * res.norms[0]
        assert res.norms[2] <= 0.02 * res.norms[0]

    def test_cosine_is_time_derivative_of_sine(self):
        cut = wide_cutoff()
        dt = 1e-3
        ts = [1.0 - dt, 1.0, 1.0 + dt]
        quad = build_quadrature(FREE, cut, GAUSS, 40.0, 1.1)
        sin_res = wave_evolve(FREE, cut, GAUSS, ts, Lambda=40.0, kind="sine",
                              check_halving=False, quad=quad)
        cos_res = wave_evolve(FREE, cut, GAUSS, [1.0], Lambda=40.0, kind="cosine",
                              check_halving=False, quad=quad)
        fd = (sin_res.fields[2] - sin_res.fields[0]) / (2 * dt)
        num = quad.norm_of(fd - cos_res.fields[0])
        assert num <= 0.02 * quad.norm_of(cos_res.fields[0])

    def test_time_integrability_saturates(self):
        spec = CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, 10.0),
                               b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
        cut = CutoffSpec.for_spec(spec)
        v = lambda x: np.exp(-np.asarray(x) ** 2)
        t = np.linspace(0.0, 60.0, 241)
        res = schrodinger_evolve(spec, cut, v, t, Lambda=40.0, check_halving=False)
        dt = t[1] - t[0]
        cums = np.cumsum(res.norms ** 2) * dt
        T_half = cums[len(t) // 2 - 1]
        T_full = cums[-1]
        assert (T_full - T_half) / T_full < 0.01


class TestDecayFit:
    def test_exact_exponential(self):
        t = np.linspace(0, 25, 51)
        out = decay_fit(t, 2.0 * np.exp(-0.3 * t), (0, 25))
        assert out["rate"] == pytest.approx(0.3, abs=1e-6)
        assert out["r_squared"] > 1 - 1e-12

    def test_nonpositive_samples_excluded(self):
        t = np.linspace(0, 10, 21)
        y = np.exp(-0.5 * t)
        y[5] = 0.0
        out = decay_fit(t, y, (0, 10))
        assert out["n_excluded"] == 1
        assert out["rate"] == pytest.approx(0.5, abs=1e-6)

    def test_rejects_empty_window(self):
        with pytest.raises(ValueError):
            decay_fit([0.0, 1.0], [0.0, 0.0], (0, 1))
