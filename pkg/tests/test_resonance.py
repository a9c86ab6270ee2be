import numpy as np
import pytest

from bvschro.bvcalc import PiecewiseBV, SignedMeasure
from bvschro.operator import CoefficientSpec
from bvschro.resonance import (CutoffSpec, Determinant, cutoff_resolvent_norms,
                               find_resonances, smooth_bump, strip_certificate,
                               winding_number, zero_resonance_test)

FREE = CoefficientSpec()


def delta_spec(c):
    return CoefficientSpec(V0=SignedMeasure.dirac(0.0, c))


def well_spec(depth=-4.0):
    return CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, depth))


class TestDeterminant:
    def test_free_is_one(self):
        det = Determinant(FREE)
        lams = np.array([0.3 + 0.2j, 2.0 - 0.7j, -4.0 + 1.0j, 30.0 - 0.1j])
        d, logs = det.batch(lams)
        vals = d * np.exp(logs)
        assert np.max(np.abs(vals - 1.0)) < 1e-12

    @pytest.mark.parametrize("c", [-2.0, 1.0, 2.0, 5.0])
    def test_delta_zero_location(self, c):
        det = Determinant(delta_spec(c))
        lam_star = -0.5j * c
        assert abs(det(lam_star)) < 1e-14
        assert abs(det(lam_star + 0.35)) > 1e-2

    def test_conjugation_symmetry_of_values(self):
        det = Determinant(well_spec())
        lam = 1.3 - 0.4j
        a = det(lam)
        b = det(-np.conj(lam))
        assert a == pytest.approx(np.conj(b), rel=1e-12)

    def test_analyticity_on_disks(self):
        # boundary values of an analytic function have no negative Fourier
        # modes on a circle (discrete Cauchy integral test)
        det = Determinant(well_spec())
        rng = np.random.default_rng(4)
        for _ in range(4):
            center = complex(rng.uniform(0.5, 4), rng.uniform(-1.2, -0.1))
            n = 64
            th = 2 * np.pi * np.arange(n) / n
            pts = center + 0.12 * np.exp(1j * th)
            vals, _ = det.rebased(pts)
            c = np.fft.fft(vals) / n
            neg = np.max(np.abs(c[n // 2 + 1:]))
            assert neg <= 1e-8 * max(np.max(np.abs(c)), 1e-30)

    def test_overflow_bookkeeping_deep_scan(self):
        det = Determinant(well_spec())
        d, logs = det.batch(np.array([2.0 - 45.0j]))
        assert np.isfinite(d[0]) and np.isfinite(logs[0])
        assert logs[0] > 30.0  # |Im lam| * R0 = 45: naive product would overflow


class TestFindResonances:
    def test_delta_two(self):
        rep = find_resonances(delta_spec(2.0), (-1.0, 1.0, -2.0, -0.5))
        assert len(rep.zeros) == 1
        z = rep.zeros[0]
        assert abs(z["lam"] - (-1.0j)) < 1e-8
        assert z["multiplicity"] == 1

    def test_free_rectangle_empty(self):
        rep = find_resonances(FREE, (0.3, 5.0, -2.0, -0.1))
        assert rep.zeros == []
        assert rep.verified_rectangles

    def test_rejects_origin_rectangle(self):
        with pytest.raises(ValueError):
            find_resonances(delta_spec(1.0), (-1.0, 1.0, -1.0, 1.0))

    def test_square_well_matches_dense_winding(self):
        spec = well_spec()
        det = Determinant(spec)
        re = np.linspace(0.5, 6.0, 200)
        im = np.linspace(-1.5, 0.0, 100)
        RE, IM = np.meshgrid(re, im)
        d, _ = det.batch((RE + 1j * IM).ravel())
        ph = np.angle(d).reshape(IM.shape)

        def wrap(a):
            return (a + np.pi) % (2 * np.pi) - np.pi

        d1, d2 = np.diff(ph, axis=1), np.diff(ph, axis=0)
        circ = wrap(d1[:-1, :]) + wrap(d2[:, 1:]) - wrap(d1[1:, :]) - wrap(d2[:, :-1])
        dense_count = int(np.round(circ / (2 * np.pi)).sum())
        rep = find_resonances(spec, (0.5, 6.0, -1.5, 0.0))
        assert sum(z["multiplicity"] for z in rep.zeros) == dense_count

    def test_zero_pair_symmetry(self):
        spec = well_spec()
        right = find_resonances(spec, (0.5, 6.0, -1.5, 0.0))
        left = find_resonances(spec, (-6.0, -0.5, -1.5, 0.0))
        rz = sorted(z["lam"] for z in right.zeros)
        lz = sorted(-np.conj(z["lam"]) for z in left.zeros)
        assert len(rz) == len(lz)
        for a, b in zip(rz, lz):
            assert abs(a - b) < 1e-8

    def test_winding_subdivision_consistency(self):
        det = Determinant(well_spec())
        rect = (0.5, 6.0, -1.5, -0.05)
        total = winding_number(det, rect)
        rm, im = 3.1, -0.8
        parts = [(0.5, rm, -1.5, im), (rm, 6.0, -1.5, im),
                 (0.5, rm, im, -0.05), (rm, 6.0, im, -0.05)]
        assert total == sum(winding_number(det, r) for r in parts)


class TestStrip:
    def test_free_certifies_any_theta(self):
        rep = strip_certificate(FREE, 0.5, 8.0, [0.2, 0.6, 1.2])
        assert rep.strip["theta0"] == 1.2

    def test_delta_axis_zero_outside_theorem_region(self):
        # c = 2 has its only zero at -i with Re = 0: the |Re lam| >= lambda0
        # region stays clear even for theta > 1
        rep = strip_certificate(delta_spec(2.0), 0.5, 4.0, [0.5, 0.9, 1.05, 1.5])
        assert rep.strip["theta0"] == 1.5

    def test_delta_strip_blocked_with_middle_scan(self):
        # scanning the middle rectangle (needed for the decay contour) hits -i
        rep = strip_certificate(delta_spec(2.0), 0.5, 4.0, [0.5, 0.9, 1.05, 1.5],
                                scan_middle_below=0.02)
        assert rep.strip["theta0"] == 0.9
        assert rep.notes["first_failure"]["theta"] == 1.05
        zs = rep.notes["first_failure"]["zeros"]
        assert any(abs(z["lam"] + 1j) < 1e-6 for z in zs)

    def test_magnetic_step_strip_exists(self):
        spec = CoefficientSpec(b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
        rep = strip_certificate(spec, 1.0, 8.0, [0.05, 0.1, 0.2])
        assert rep.strip["theta0"] is not None and rep.strip["theta0"] > 0


class TestNormRows:
    def test_free_l2_norm_scale(self):
        cut = CutoffSpec.for_spec(FREE)
        rows = cutoff_resolvent_norms(FREE, cut, 4.0 + 0j, n_basis=40,
                                      refine_check=False)
        n00 = next(r for r in rows if (r["k1"], r["k2"]) == (0, 0))
        # the free kernel has |G| = 1/(2 lam); the cutoff norm sits below that
        assert 0.02 < n00["norm"] <= 0.5 / 4.0 + 1e-6

    def test_real_axis_decay_exponent(self):
        cut = CutoffSpec.for_spec(FREE)
        lams = [3.0, 6.0, 12.0, 24.0]
        norms = [next(r for r in cutoff_resolvent_norms(FREE, cut, complex(lr),
                                                        n_basis=56, refine_check=False)
                      if (r["k1"], r["k2"]) == (0, 0))["norm"] for lr in lams]
        slope = np.polyfit(np.log(lams), np.log(norms), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.15)

    def test_blowup_rate_near_simple_zero(self):
        spec = delta_spec(2.0)
        cut = CutoffSpec.for_spec(spec)
        lam_star = -1.0j
        ts = np.array([0.4, 0.2, 0.1])
        norms = []
        for t in ts:
            lam = lam_star + t * (0.8 + 0.6j)
            rows = cutoff_resolvent_norms(spec, cut, lam, n_basis=32,
                                          refine_check=False)
            norms.append(next(r for r in rows if (r["k1"], r["k2"]) == (0, 0))["norm"])
        slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.1)


class TestZeroResonance:
    def test_free_has_threshold_resonance(self):
        out = zero_resonance_test(FREE)
        assert out["has_zero_resonance"] and not out["inconclusive"]

    def test_large_dirac_has_none(self):
        out = zero_resonance_test(CoefficientSpec(V0=SignedMeasure.dirac(0.0, 10.0)))
        assert not out["has_zero_resonance"] and not out["inconclusive"]

    def test_barrier_example_with_estimate_chain(self):
        spec = CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, 10.0),
                               b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
        out = zero_resonance_test(spec)
        assert not out["has_zero_resonance"]
        chk = out["weighted_estimate_check"]
        assert chk["holds"]
        assert chk["energy_margin"] > 0 and chk["weighted_margin"] > 0


class TestCutoffs:
    def test_bump_shape(self):
        chi = smooth_bump(1.0, 2.0)
        assert chi(0.5) == 1.0 and chi(3.0) == 0.0
        xs = np.linspace(1.0, 2.0, 11)
        assert np.all(np.diff(chi(xs)) <= 1e-12)
        d = chi.derivative_measure()
        assert d.atoms == []  # C^1 at the joints

    def test_nested(self):
        cut = CutoffSpec.for_spec(well_spec())
        assert cut.chi(1.0) == 1.0
        for x in np.linspace(-5, 5, 41):
            if cut.chi(x) > 0:
                assert cut.chi1(x) == 1.0 or abs(x) > cut.outer - 1e-12

    def test_resonance_spec_validation(self):
        with pytest.raises(ValueError, match="compact"):
            Determinant(CoefficientSpec(V1=PiecewiseBV.constant(1.0)))
        with pytest.raises(ValueError, match="h = 1"):
            Determinant(CoefficientSpec(h=0.5))
