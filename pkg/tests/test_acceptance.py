"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  Tolerances and runtime
budgets are pinned here; every expected value is either trivial, produced by
an in-test independent oracle, or a frozen regression number.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from bvschro.bvcalc import (PiecewiseBV, SignedMeasure, derivative_measure,
                            integrate, product_rule_check)
from bvschro.carleman import (PhaseSpec, build_weight,
                              check_atom_inequalities, choose_phase_slope,
                              constant_report, evaluate_estimate)
from bvschro.operator import (CoefficientSpec, SpectralPoint,
                              form_lower_bound, quadratic_form)
from bvschro.propagator import build_quadrature, decay_fit, schrodinger_evolve, wave_evolve
from bvschro.resonance import (CutoffSpec, cutoff_resolvent_norms, find_resonances,
                               strip_certificate, zero_resonance_test)
from bvschro.solve import lap_sweep, solve

from helpers import random_piecewise

from test_operator import _random_spec, gaussian_pair, make_grid


def report(criterion, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def barrier_example_spec(M=10.0, h=1.0):
    """Short-range barrier with unit magnetic step (the zero-resonance model)."""
    return CoefficientSpec(h=h,
                           V1=PiecewiseBV.indicator(-1.0, 1.0, M),
                           b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))


def test_criterion_1_bv_exactness():
    """Product rule and FTC to 1e-12 on 1000 randomized specimens, < 10 s."""
    rng = np.random.default_rng(20260801)
    t0 = time.time()
    worst_pr = worst_ftc = 0.0
    for _ in range(1000):
        f = random_piecewise(rng, n_breaks=(1, 10))
        g = random_piecewise(rng, n_breaks=(1, 10))
        worst_pr = max(worst_pr, product_rule_check(f, g)["max_defect"])
        df = derivative_measure(f)
        # both breakpoint-avoiding and breakpoint-hitting endpoints
        a = float(rng.choice([rng.uniform(-4.5, -3.2), f.breakpoints[0]]))
        b = float(rng.choice([rng.uniform(3.2, 4.5), f.breakpoints[-1]]))
        if a >= b:  # single-breakpoint specimen hit on both ends
            b = float(rng.uniform(3.2, 4.5))
        got = integrate(df, a, b)
        worst_ftc = max(worst_ftc, abs(got - (f.right_value(b) - f.right_value(a))))
    elapsed = time.time() - t0
    ok = worst_pr <= 1e-12 and worst_ftc <= 1e-12 and elapsed < 10.0
    report(1, ok, f"product-rule defect {worst_pr:.2e}, FTC defect {worst_ftc:.2e}, "
                  f"{elapsed:.1f}s")


def test_criterion_2_delta_oracle():
    """Delta poles at -ic/2 to 1e-8; bound-state blowup exponent -1, < 5 s."""
    t0 = time.time()
    worst = 0.0
    for c in (-2.0, 1.0, 2.0, 5.0):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(0.0, c))
        lam_star = -0.5j * c
        im = lam_star.imag
        rect = (-0.6, 0.6, im - 0.6, im + 0.6)
        if rect[2] < 0 < rect[3]:  # keep the origin outside
            rect = (rect[0], rect[1], min(rect[2], -0.1), -0.1) if im < 0 else \
                   (rect[0], rect[1], 0.1, max(rect[3], 0.1))
        found = find_resonances(spec, rect)
        assert len(found.zeros) == 1 and found.zeros[0]["multiplicity"] == 1
        worst = max(worst, abs(found.zeros[0]["lam"] - lam_star))
    spec = CoefficientSpec(V0=SignedMeasure.dirac(0.0, -2.0))
    eps_list = np.array([1e-2, 1e-3, 1e-4])
    norms = [np.sqrt(solve(spec, SpectralPoint(-1.0, float(e)),
                           PiecewiseBV.indicator(-1.0, 1.0),
                           domain_radius=5.0).l2_sq()) for e in eps_list]
    slope = float(np.polyfit(np.log(eps_list), np.log(norms), 1)[0])
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and abs(slope + 1.0) <= 0.05 and elapsed < 5.0
    report(2, ok, f"max |dlam| {worst:.2e}, blowup exponent {slope:.4f}, {elapsed:.1f}s")


def test_criterion_3_form_bound():
    """Hermitian defect <= 1e-12 and the displayed lower bound, 10 specs x 100 u,
    < 30 s."""
    rng = np.random.default_rng(3)
    t0 = time.time()
    worst_sym = 0.0
    violations = 0
    for _ in range(10):
        spec = _random_spec(rng)
        grid = make_grid(spec)
        c = form_lower_bound(spec)
        cm = c["c_mass"] + c["v1_shift"]
        for _ in range(50):
            u = gaussian_pair(grid, spec, k=rng.uniform(0, 3), width=rng.uniform(0.6, 2.0))
            v = gaussian_pair(grid, spec, k=rng.uniform(0, 3), width=rng.uniform(0.6, 2.0))
            qa, qb = quadratic_form(u, v, spec), quadratic_form(v, u, spec)
            l2u = float(np.real(grid.integrate(np.abs(u.u) ** 2)))
            du = u.u_prime(spec)
            g2u = float(np.real(grid.integrate(np.abs(du) ** 2)))
            l2v = float(np.real(grid.integrate(np.abs(v.u) ** 2)))
            dv = v.u_prime(spec)
            g2v = float(np.real(grid.integrate(np.abs(dv) ** 2)))
            h1 = np.sqrt((l2u + g2u) * (l2v + g2v))
            worst_sym = max(worst_sym, abs(qa - np.conj(qb)) / max(h1, 1e-30))
            # two quadratic-form evaluations per pair: u and v each
            for w, l2, g2 in ((u, l2u, g2u), (v, l2v, g2v)):
                q = quadratic_form(w, w, spec).real
                bound = -cm * l2 + c["c_grad"] * g2
                if q < bound - 1e-10 * max(1.0, abs(q), abs(bound)):
                    violations += 1
    elapsed = time.time() - t0
    ok = worst_sym <= 1e-12 and violations == 0 and elapsed < 30.0
    report(3, ok, f"1000 samples: hermitian defect {worst_sym:.2e}, "
                  f"{violations} bound violations, {elapsed:.1f}s")


def test_criterion_4_carleman_inequality():
    """Weighted estimate holds with the composed C(h) for 100 random
    (f, h, eps) on the barrier example, < 5 min."""
    rng = np.random.default_rng(44)
    t0 = time.time()
    E = 1.0
    base = barrier_example_spec()
    phase = choose_phase_slope(base, E, 1.0)
    violations = 0
    worst_gap = -np.inf  # max of log lhs - log rhs - log C  (must stay <= 0)
    worst_ratio = -np.inf
    for _ in range(100):
        h = float(rng.uniform(0.05, 1.0))
        eps = 0.0
        while abs(eps) < 1e-3:
            eps = float(rng.uniform(-0.1, 0.1))
        spec = dataclasses.replace(base, h=h)
        weight = build_weight(spec, phase, E, s=1.0)
        rep = constant_report(spec, phase, weight, E, eps0=0.1)
        ks = rng.uniform(0.3, 2.0, 2)
        cs = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        f = lambda x, ks=ks, cs=cs: sum(
            c * np.cos(k * np.asarray(x)) for k, c in zip(ks, cs)) * np.exp(-np.asarray(x) ** 2)
        out = evaluate_estimate(spec, phase, weight, SpectralPoint(E, eps), f)
        log_lhs = math.log(out["lhs"])
        log_rhs = math.log(out["rhs_f"] + out["rhs_eps"])
        gap = log_lhs - log_rhs - rep.log_value
        worst_gap = max(worst_gap, gap)
        worst_ratio = max(worst_ratio, log_lhs - log_rhs)
        if gap > 0:
            violations += 1
    elapsed = time.time() - t0
    ok = violations == 0 and elapsed < 300.0
    report(4, ok, f"0 violations required, got {violations}; max log(lhs/rhs) = "
                  f"{worst_ratio:.2f} (regression), max log-gap to C(h) = {worst_gap:.1f}, "
                  f"{elapsed:.1f}s")


def _atom_corpus():
    E = 1.0
    corpus = []
    for h in (1.0, 0.3):
        spec = barrier_example_spec(h=h)
        corpus.append((spec, choose_phase_slope(spec, E, 1.0), E))
    for c in (-2.0, 1.0, 2.0, 5.0):
        spec = CoefficientSpec(V0=SignedMeasure.dirac(0.7, c))
        corpus.append((spec, PhaseSpec(0.0, 0.0), E))
    corpus.append((CoefficientSpec(b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0)),
                   PhaseSpec(0.0, 0.0), E))
    spec = CoefficientSpec(V0=SignedMeasure(PiecewiseBV.constant(0.0),
                                            [(1.0, 0.5), (2.0, 0.25), (-1.5, 0.8)]),
                           V1=PiecewiseBV.indicator(-2.5, 2.5, 0.4))
    corpus.append((spec, PhaseSpec(0.0, 0.0), E))
    return corpus


def test_criterion_5_regularization_constants():
    """Atom inequalities >= 0 across the corpus; eta->0 weight limits match the
    closed form to 1e-3 at eta = 1e-3 * gap, < 1 min."""
    t0 = time.time()
    n_atoms = 0
    worst_limit = 0.0
    all_nonneg = True
    for spec, phase, E in _atom_corpus():
        weight = build_weight(spec, phase, E, s=1.0)
        for xj, (e1, e2) in check_atom_inequalities(weight).items():
            n_atoms += 1
            if not (e1 >= 0.0 and e2 >= 0.0):
                all_nonneg = False
        if not weight.W:
            continue
        locs = sorted(weight.W) + [0.0]
        gap = min(abs(a - b) for i, a in enumerate(locs) for b in locs[i + 1:])
        eta = 1e-3 * gap
        for xj in weight.W:
            got = math.log(abs(float(weight.w(xj, eta))))
            expect = weight.limit_log_abs_w(xj)
            worst_limit = max(worst_limit, abs(got - expect) / max(1.0, abs(expect)))
    elapsed = time.time() - t0
    ok = all_nonneg and worst_limit <= 1e-3 and elapsed < 60.0
    report(5, ok, f"{n_atoms} atoms all nonnegative: {all_nonneg}; worst relative "
                  f"limit defect {worst_limit:.2e}, {elapsed:.1f}s")


def test_criterion_6_exterior_estimate():
    """h * (exterior weighted norm) bounded over h in [0.02, 1], fitted
    exponent <= 1.1, < 10 min."""
    t0 = time.time()
    spec = CoefficientSpec(V0=SignedMeasure.dirac(0.0, 1.0),
                           b0=PiecewiseBV.indicator(-1.0, 1.0, 0.2))
    hs = np.geomspace(0.02, 1.0, 20)
    rep = lap_sweep(spec, 1.0, hs, 1.0, 0.0, domain_radius=9.0, iters=150,
                    probes=2, seed=6)
    good = [r for r in rep.rows if "error" not in r]
    sup_h_norm = max(r["h_times_ext_norm"] for r in good)
    exponent = rep.fits["ext_exponent"]
    elapsed = time.time() - t0
    ok = (len(good) == 20 and np.isfinite(sup_h_norm)
          and exponent <= 1.1 and elapsed < 600.0)
    report(6, ok, f"sup h*ext_norm = {sup_h_norm:.3f}, growth exponent "
                  f"{exponent:.3f} (<= 1.1), {elapsed:.1f}s")


def test_criterion_7_exponential_estimate():
    """Barrier sweep: log(full weighted norm) vs 1/h affine with r^2 >= 0.95
    and positive slope over h in [0.05, 0.5], < 10 min."""
    t0 = time.time()
    spec = CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, 1.0))
    hs = np.geomspace(0.05, 0.5, 10)
    rep = lap_sweep(spec, 1.0, hs, 0.5, 0.0, domain_radius=9.0, iters=150,
                    probes=2, seed=7)
    r2 = rep.fits["full_r_squared"]
    slope = rep.fits["full_log_slope"]
    elapsed = time.time() - t0
    ok = r2 >= 0.95 and slope > 0 and elapsed < 600.0
    report(7, ok, f"affine fit of log norm vs 1/h: slope {slope:.4f} (> 0), "
                  f"r^2 = {r2:.4f} (>= 0.95), {elapsed:.1f}s")


STRIP_SPECS = {
    "square-well": CoefficientSpec(V1=PiecewiseBV.indicator(-1.0, 1.0, -4.0)),
    # declared support radius keeps the cutoff geometry comparable
    "delta": CoefficientSpec(V0=SignedMeasure.dirac(0.0, 2.0), support_radius=1.0),
    "magnetic-step": CoefficientSpec(b1=PiecewiseBV.indicator(-1.0, 1.0, 1.0)),
}

THETA0 = {}


def test_criterion_8_resonance_free_strip():
    """theta0 > 0 over Re lam in [1, 50] for all three specs; on-axis L2->L2
    exponent -1 +- 0.15; H1<->L2 rows follow k2-k1-1 within +-0.2, < 30 min."""
    t0 = time.time()
    details = []
    ok = True
    lams = np.geomspace(1.5, 45.0, 7)
    for name, spec in STRIP_SPECS.items():
        rep = strip_certificate(spec, 1.0, 50.0, [0.1, 0.25, 0.5, 0.9, 1.2])
        theta0 = rep.strip["theta0"]
        THETA0[name] = theta0
        ok &= theta0 is not None and theta0 > 0
        cut = CutoffSpec.for_spec(spec)
        rows = {}
        for lr in lams:
            for r in cutoff_resolvent_norms(spec, cut, complex(lr, 0.0)):
                rows.setdefault((r["k1"], r["k2"]), []).append(r["norm"])
        slopes = {key: float(np.polyfit(np.log(lams), np.log(ns), 1)[0])
                  for key, ns in rows.items()}
        ok &= abs(slopes[(0, 0)] + 1.0) <= 0.15
        for key in ((0, 1), (1, 0), (1, 1)):
            ok &= abs(slopes[key] - (key[1] - key[0] - 1)) <= 0.2
        details.append(f"{name}: theta0={theta0}, slopes " +
                       ", ".join(f"{k}:{v:+.2f}" for k, v in sorted(slopes.items())))
    elapsed = time.time() - t0
    ok &= elapsed < 1800.0
    report(8, ok, "; ".join(details) + f", {elapsed:.1f}s")


def test_criterion_9_zero_resonance():
    """Barrier example (M=10) has no threshold resonance; the free operator
    does, < 1 min."""
    t0 = time.time()
    out_b = zero_resonance_test(barrier_example_spec())
    out_f = zero_resonance_test(CoefficientSpec())
    chk = out_b.get("weighted_estimate_check", {})
    elapsed = time.time() - t0
    ok = (not out_b["has_zero_resonance"] and not out_b["inconclusive"]
          and chk.get("holds", False)
          and out_f["has_zero_resonance"] and not out_f["inconclusive"]
          and elapsed < 60.0)
    report(9, ok, f"barrier margin {out_b['margin']:.3e} (no threshold resonance), "
                  f"estimate chain holds: {chk.get('holds')}; free margin "
                  f"{out_f['margin']:.1e} (threshold resonance detected), {elapsed:.1f}s")


def test_criterion_10_propagator_decay():
    """Wave local energy of the certified square-well spec decays at a rate
    within a factor 2 of its strip width; Schrodinger time-integrability
    saturates (< 1% on doubling T), < 30 min."""
    t0 = time.time()
    spec = STRIP_SPECS["square-well"]
    theta0 = THETA0.get("square-well")
    if theta0 is None:
        theta0 = strip_certificate(spec, 1.0, 50.0,
                                   [0.1, 0.25, 0.5, 0.9, 1.2]).strip["theta0"]
    gate = zero_resonance_test(spec)
    assert not gate["has_zero_resonance"] and not gate["inconclusive"]
    cut = CutoffSpec.for_spec(spec)
    v = lambda x: np.exp(-np.asarray(x) ** 2)
    t_grid = np.linspace(0.0, 40.0, 81)
    quad = build_quadrature(spec, cut, v, 40.0, 40.0)
    rc = wave_evolve(spec, cut, v, t_grid, Lambda=40.0, kind="cosine",
                     check_halving=False, quad=quad)
    rs = wave_evolve(spec, cut, v, t_grid, Lambda=40.0, kind="sine",
                     check_halving=False, quad=quad)
    fit_c = decay_fit(rc.t, rc.norms, (0.5, 8.0))
    fit_s = decay_fit(rs.t, rs.norms, (0.5, 8.0))
    in_window = lambda r: theta0 / 2.0 <= r <= 2.0 * theta0
    # Schrodinger time integrability: cumulative sum saturation T -> 2T
    ts = np.linspace(0.0, 100.0, 401)
    rsch = schrodinger_evolve(spec, cut, v, ts, Lambda=40.0, check_halving=False)
    dt = ts[1] - ts[0]
    cum = np.cumsum(rsch.norms ** 2) * dt
    change = (cum[-1] - cum[len(ts) // 2 - 1]) / cum[-1]
    elapsed = time.time() - t0
    ok = (fit_c["rate"] > 0 and fit_s["rate"] > 0
          and in_window(fit_c["rate"]) and in_window(fit_s["rate"])
          and change < 0.01 and elapsed < 1800.0)
    report(10, ok, f"cos rate {fit_c['rate']:.3f}, sin rate {fit_s['rate']:.3f} vs "
                   f"theta0 {theta0} (factor-2 window), integrability change "
                   f"{change:.2%} on doubling T, {elapsed:.1f}s")
