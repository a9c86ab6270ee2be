"""Carleman weight machinery: phase, threshold, remainder measure, and the
regularized weight family with its explicit constants.

The weight is w_eta(x) = sgn(x) e^{q1_eta(x)} (e^{q2(x)} - 1) where q1_eta
accumulates the continuous remainder mass plus Gaussian bumps of weight W_j
at the remainder atoms, and q2 = kappa * int_0^x <t>^{-2s} dt.  The scheme's
fixed choices are kappa = max(2, 1/tau), W_j = M mu_j with M = max(2, 8/tau),
and the Young parameters gamma_j = e^{-W_j/4}; the atom inequalities checked
by `check_atom_inequalities` certify that the regularization limit keeps the
estimate one-sided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npp
from scipy.integrate import quad
from scipy.special import erf, gamma as gamma_fn, hyp2f1

from .bvcalc import PiecewiseBV, SignedMeasure, cumulative, derivative_measure
from .operator import CoefficientSpec, SpectralPoint, coeff_panel_values
from .solve import SolutionField, solve, spec_grid


class HypothesisFailureError(Exception):
    """The exterior positivity hypothesis fails: no admissible phase exists."""


_SMOOTHSTEP = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])  # 10t^3-15t^4+6t^5


@dataclass
class PhaseSpec:
    """Even phase with slope k on (0, R1], quintic taper to 0 on (R1, 2R1]."""

    R1: float
    k: float
    dphi: PiecewiseBV = field(default=None)
    phi: PiecewiseBV = field(default=None)

    def __post_init__(self):
        if self.dphi is None:
            self.dphi = _build_dphi(self.R1, self.k)
        if self.phi is None:
            self.phi = cumulative(SignedMeasure(self.dphi), anchor=0.0)

    @property
    def sup_phi(self):
        if self.k == 0.0 or self.R1 == 0.0:
            return 0.0
        return float(self.phi.right_value(2.0 * self.R1))

    def phi_at(self, x):
        return self.phi(x)

    def dphi_at(self, x):
        return self.dphi(x)


def _build_dphi(R1, k) -> PiecewiseBV:
    if k < 0:
        raise ValueError("phase slope must be nonnegative")
    if k == 0.0 or R1 == 0.0:
        return PiecewiseBV.constant(0.0)
    from .bvcalc import _compose_affine
    taper_t = npp.polysub([1.0], _SMOOTHSTEP)          # 1 - s(t) on t in [0,1]
    right = k * _compose_affine(taper_t, -1.0, 1.0 / R1)   # t = (x - R1)/R1
    left = np.array([(-1.0) ** (j + 1) * c for j, c in enumerate(right)])
    return PiecewiseBV([-2 * R1, -R1, 0.0, R1, 2 * R1],
                       [[0.0], left, [-k], [k], right, [0.0]])


def _is_piecewise_constant(f: PiecewiseBV) -> bool:
    return all(len(c) == 1 for c in f.pieces)


def _rational_inf(num: PiecewiseBV, den: PiecewiseBV, lo=-np.inf, hi=np.inf):
    """inf of num/den over (lo, hi); den > 0, both with constant tails."""
    bp = np.union1d(num.breakpoints, den.breakpoints)
    n, d = num.refine(bp), den.refine(bp)
    edges = np.concatenate(([-np.inf], bp, [np.inf]))
    best = np.inf
    for i, (cn, cd) in enumerate(zip(n.pieces, d.pieces)):
        a, b = max(edges[i], lo), min(edges[i + 1], hi)
        if a >= b:
            continue
        crit = npp.polysub(npp.polymul(npp.polyder(cn), cd),
                           npp.polymul(cn, npp.polyder(cd)))
        probes = []
        if len(crit) > 1:
            r = npp.polyroots(crit)
            r = r[np.abs(r.imag) < 1e-9].real
            probes.extend(r[(r > a) & (r < b)].tolist())
        for e in (a, b):
            if np.isfinite(e):
                probes.append(e)
        if not probes:
            probes = [0.0]
        for x in probes:
            best = min(best, npp.polyval(x, cn) / npp.polyval(x, cd))
    return float(best)


def _tau_num_den(spec: CoefficientSpec, dphi: PiecewiseBV, E: float):
    """Numerator/denominator of beta^{-1}alpha(E - V1) + alpha^2 phi'^2 + b1^2."""
    num = spec.alpha * (E - spec.V1) + spec.beta * (
        spec.alpha.square() * dphi.square() + spec.b1.square())
    return num, spec.beta


def compute_tau(spec: CoefficientSpec, phase: PhaseSpec, E: float) -> float:
    """Global infimum of the phase-augmented symbol lower bound."""
    num, den = _tau_num_den(spec, phase.dphi, E)
    return _rational_inf(num, den)


def exterior_inf(spec: CoefficientSpec, E: float, R1: float) -> float:
    """inf over |x| >= R1 of beta^{-1}alpha(E - V1) + b1^2 (no phase)."""
    num, den = _tau_num_den(spec, PiecewiseBV.constant(0.0), E)
    return min(_rational_inf(num, den, hi=-R1) if R1 > 0 else np.inf,
               _rational_inf(num, den, lo=R1))


def choose_phase_slope(spec: CoefficientSpec, E: float, R1: float,
                       tau_target=None, points_per_decade=64,
                       k_min=1e-3, k_max=1e4) -> PhaseSpec:
    """Smallest slope k on a geometric grid with compute_tau >= tau_target."""
    ext = exterior_inf(spec, E, R1)
    if ext <= 0.0:
        raise HypothesisFailureError(
            f"exterior infimum {ext:.6g} is not positive at E={E}, R1={R1}; "
            "no admissible phase slope exists")
    target = 0.5 * ext if tau_target is None else float(tau_target)
    zero = PhaseSpec(R1, 0.0)
    if compute_tau(spec, zero, E) >= target:
        return zero
    ratio = 10.0 ** (1.0 / points_per_decade)
    k = k_min
    while k <= k_max:
        ph = PhaseSpec(R1, k)
        if compute_tau(spec, ph, E) >= target:
            return ph
        k *= ratio
    raise HypothesisFailureError(f"no slope up to {k_max} reaches tau target {target:.6g}")


class DensitySum:
    """Sum of nonnegative densities |num_i|/den_i; exact where den constant."""

    def __init__(self, terms):
        # terms: list of (num: PiecewiseBV, den: PiecewiseBV) with num >= 0 intent
        self.terms = terms
        bp = np.array([], dtype=float)
        for nu, de in terms:
            bp = np.union1d(bp, np.union1d(nu.breakpoints, de.breakpoints))
        self.breakpoints = bp

    def __call__(self, x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for nu, de in self.terms:
            out = out + np.abs(nu(x)) / de(x)
        return out

    def integrate_interval(self, a, b):
        total = 0.0
        for nu, de in self.terms:
            if _is_piecewise_constant(de):
                bp = np.union1d(nu.breakpoints, de.breakpoints)
                nn, dd = nu.refine(bp).abs(), de.refine(bp)
                ratio = PiecewiseBV(nn.breakpoints,
                                    [c / dd.pieces[dd.piece_index(_mid(nn, i))][0]
                                     for i, c in enumerate(nn.pieces)])
                total += ratio.integrate_interval(a, b)
            else:
                val, _ = quad(lambda t: abs(nu(t)) / de(t), a, b,
                              points=[p for p in self.breakpoints if a < p < b],
                              limit=200, epsabs=1e-12)
                total += val
        return total

    def l1_norm(self):
        if not self.breakpoints.size:
            return 0.0
        return self.integrate_interval(self.breakpoints[0], self.breakpoints[-1])


def _mid(f: PiecewiseBV, i):
    edges = np.concatenate(([-np.inf], f.breakpoints, [np.inf]))
    a, b = edges[i], edges[i + 1]
    if not np.isfinite(a):
        return b - 1.0 if np.isfinite(b) else 0.0
    if not np.isfinite(b):
        return a + 1.0
    return 0.5 * (a + b)


def build_mu(spec: CoefficientSpec, phase: PhaseSpec, E: float) -> SignedMeasure:
    """Nonnegative remainder measure of the weighted-energy expansion:

    mu = h^{-1}|alpha^{-1}(b1^2 - b^2) + beta^{-1} V0| + |alpha^A d(phi')|
       + |(phi')^A d(alpha)| + 4 h^{-1}|phi'| (b^2 + |b|)
       + |d(beta^{-1}alpha(E - V1) + alpha^2 phi'^2 + b1^2)|.
    """
    h = spec.h
    dphi = phase.dphi
    atoms = {}

    def add_atom(x, m):
        if m != 0.0:
            atoms[x] = atoms.get(x, 0.0) + abs(m)

    ratio_terms = []   # (num, den) pairs, |num|/den
    poly_terms = []    # plain nonnegative PiecewiseBV densities

    # h^{-1} | alpha^{-1}(b1^2 - b^2) + beta^{-1} V0 |
    diff_b = spec.b1.square() - spec.b.square()
    num1 = (spec.beta * diff_b + spec.alpha * spec.V0.density) * (1.0 / h)
    ratio_terms.append((num1, spec.alpha * spec.beta))
    for x, m in spec.V0.atoms:
        add_atom(x, m / (h * spec.beta.value(x)))

    # |alpha^A d(phi')|
    dphi_meas = derivative_measure(dphi)
    poly_terms.append((spec.alpha * dphi_meas.density).abs())
    for x, j in dphi_meas.atoms:
        add_atom(x, spec.alpha.value(x) * j)

    # |(phi')^A d(alpha)|
    dalpha = derivative_measure(spec.alpha)
    poly_terms.append((dphi * dalpha.density).abs())
    for x, j in dalpha.atoms:
        add_atom(x, dphi.value(x) * j)

    # 4 h^{-1} |phi'| (b^2 + |b|)
    poly_terms.append(dphi.abs() * (spec.b.square() + spec.b.abs()) * (4.0 / h))

    # |d(beta^{-1} alpha (E - V1) + alpha^2 phi'^2 + b1^2)|
    # jumps assembled from one-sided component values (evaluating the
    # composite high-degree polynomial near far joints loses ~1e-9)
    num, den = _tau_num_den(spec, dphi, E)
    bp = np.union1d(num.breakpoints, den.breakpoints)

    def g_side(x, side):
        a, be = getattr(spec.alpha, side)(x), getattr(spec.beta, side)(x)
        v1, b1 = getattr(spec.V1, side)(x), getattr(spec.b1, side)(x)
        dp = getattr(dphi, side)(x)
        return a * (E - v1) / be + (a * dp) ** 2 + b1 ** 2

    for x in bp:
        add_atom(x, g_side(x, "right_value") - g_side(x, "left_value"))
    n, d = num.refine(bp), den.refine(bp)
    dnum = PiecewiseBV(bp, [npp.polysub(npp.polymul(npp.polyder(cn), cd),
                                        npp.polymul(cn, npp.polyder(cd)))
                            for cn, cd in zip(n.pieces, d.pieces)])
    ratio_terms.append((dnum, d.square()))

    # drop representation noise: taper/compose rounding can leave ~1e-16 jumps
    scale = max([1.0] + [abs(m) for m in atoms.values()])
    atom_list = sorted((x, m) for x, m in atoms.items() if abs(m) > 1e-12 * scale)
    if all(_is_piecewise_constant(de) for _, de in ratio_terms):
        dens = PiecewiseBV.constant(0.0)
        for nu, de in ratio_terms:
            bp2 = np.union1d(nu.breakpoints, de.breakpoints)
            nn, dd = nu.refine(bp2).abs(), de.refine(bp2)
            dens = dens + PiecewiseBV(nn.breakpoints,
                                      [c / dd.pieces[dd.piece_index(_mid(nn, i))][0]
                                       for i, c in enumerate(nn.pieces)])
        for t in poly_terms:
            dens = dens + t
        return SignedMeasure(dens, atom_list)
    ratio_terms.extend((t, PiecewiseBV.constant(1.0)) for t in poly_terms)
    mixed = SignedMeasure.__new__(SignedMeasure)
    mixed.density = DensitySum(ratio_terms)
    mixed.atoms = atom_list
    return mixed


def _q2_primitive(s):
    """Q(r) = int_0^r <t>^{-2s} dt for r >= 0, and its limit Q(inf)."""
    if s == 1.0:
        qfun = np.arctan
        qinf = 0.5 * np.pi
    else:
        def qfun(r):
            r = np.asarray(r, dtype=float)
            return r * hyp2f1(0.5, s, 1.5, -r * r)
        qinf = 0.5 * np.sqrt(np.pi) * gamma_fn(s - 0.5) / gamma_fn(s)
    return qfun, float(qinf)


@dataclass
class CarlemanWeight:
    """The eta-family of weights with the scheme's fixed constants."""

    mu: SignedMeasure
    tau: float
    s: float
    kappa: float
    M: float
    W: dict                 # x_j != 0 -> W_j = M mu_j
    gamma: dict             # x_j -> e^{-W_j/4}
    mu_c_total: float
    log_C_w: float            # log sup_{x, eta} |w_eta| (side-sum bound, valid)
    log_C_w_displayed: float  # the mu_c + (1/2) sum W_j variant (can undershoot)
    _mu_c_cum: object
    _q2_fun: object
    q2_inf: float

    @property
    def C_w(self):
        return float(np.exp(min(self.log_C_w, 700.0)))

    def mu_c_cum(self, x):
        """Signed cumulative int_0^x of the continuous part's density."""
        return self._mu_c_cum(x)

    def q2(self, x):
        x = np.asarray(x, dtype=float)
        return self.kappa * self._q2_fun(np.abs(x))

    def q1(self, x, eta):
        x = np.asarray(x, dtype=float)
        sgn = np.where(x >= 0, 1.0, -1.0)
        base = self.mu_c_cum(x)
        gaussians = np.zeros_like(np.asarray(x, dtype=float))
        for xj, Wj in self.W.items():
            gaussians = gaussians + 0.5 * Wj * (erf((x - xj) / eta) - erf(-xj / eta))
        return sgn * (base + gaussians)

    def w(self, x, eta):
        x = np.asarray(x, dtype=float)
        sgn = np.where(x >= 0, 1.0, -1.0)
        return sgn * np.exp(self.q1(x, eta)) * np.expm1(self.q2(x))

    def dw_density(self, x, eta):
        x = np.asarray(x, dtype=float)
        dens = self.mu.density(x) - self._atom_density_excluded(x)
        gauss = np.zeros_like(dens)
        for xj, Wj in self.W.items():
            gauss = gauss + Wj / (np.sqrt(np.pi) * eta) * np.exp(-((x - xj) / eta) ** 2)
        w_abs = np.abs(self.w(x, eta))
        lead = self.kappa * (1.0 + x * x) ** (-self.s) * np.exp(self.q1(x, eta) + self.q2(x))
        return lead + w_abs * (dens + gauss)

    def _atom_density_excluded(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def Gamma(self, xj):
        """Accumulated mass strictly between 0 and the atom, same side."""
        sgn = 1.0 if xj >= 0 else -1.0
        g = sgn * self.mu_c_cum(xj)
        for xl, Wl in self.W.items():
            if 0 < sgn * xl < sgn * xj:
                g += Wl
        return float(g)

    def limit_log_abs_w(self, xj):
        """log of the eta -> 0 limit of |w_eta(x_j)|."""
        q2j = float(self.q2(xj))
        return self.Gamma(xj) + 0.5 * self.W[xj] + np.log(np.expm1(q2j))


def build_weight(spec: CoefficientSpec, phase: PhaseSpec, E: float, s: float,
                 mu: SignedMeasure | None = None, tau: float | None = None) -> CarlemanWeight:
    """Assemble the weight family for the given instance (requires tau > 0)."""
    if tau is None:
        tau = compute_tau(spec, phase, E)
    if not tau > 0.0:
        raise HypothesisFailureError(f"tau = {tau:.6g} <= 0: enlarge the phase slope")
    if mu is None:
        mu = build_mu(spec, phase, E)
    kappa = max(2.0, 1.0 / tau)
    M = max(2.0, 8.0 / tau)
    W = {x: M * m for x, m in mu.atoms if x != 0.0}
    gamma = {x: math.exp(-min(w, 1400.0) / 4.0) for x, w in W.items()}
    dens = mu.density
    if isinstance(dens, PiecewiseBV):
        cum = cumulative(SignedMeasure(dens), anchor=0.0)
        mu_c_cum = lambda x: cum(x)
        mu_c_total = dens.l1_norm()
    else:
        mu_c_total = dens.l1_norm()

        def mu_c_cum(x, _d=dens):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.array([(_d.integrate_interval(0.0, t) if t > 0
                             else -_d.integrate_interval(t, 0.0) if t < 0 else 0.0)
                            for t in x])
            return out if out.size > 1 else float(out[0])
    q2_fun, q2_prim_inf = _q2_primitive(s)
    kq2_inf = kappa * q2_prim_inf
    log_tail = np.log(np.expm1(kq2_inf)) if kq2_inf < 700 else kq2_inf
    # sup_x |q1_eta| is attained past the last atom of one side: each crossed
    # Gaussian contributes a full W_j, so bound by the larger side sum
    if isinstance(dens, PiecewiseBV):
        right_c = cumulative(SignedMeasure(dens), anchor=0.0).right_value(1e9)
        left_c = mu_c_total - right_c
    else:
        right_c = float(mu_c_cum(np.array([1e9]))[0]) if not np.isscalar(
            mu_c_cum(1e9)) else float(mu_c_cum(1e9))
        left_c = mu_c_total - right_c
    side = max(right_c + sum(w for x, w in W.items() if x > 0),
               left_c + sum(w for x, w in W.items() if x < 0))
    log_Cw = side + log_tail
    log_Cw_disp = mu_c_total + 0.5 * sum(W.values()) + log_tail
    return CarlemanWeight(mu=mu, tau=tau, s=s, kappa=kappa, M=M, W=W, gamma=gamma,
                          mu_c_total=mu_c_total, log_C_w=float(log_Cw),
                          log_C_w_displayed=float(log_Cw_disp),
                          _mu_c_cum=mu_c_cum, _q2_fun=q2_fun, q2_inf=kq2_inf)


def check_atom_inequalities(weight: CarlemanWeight) -> dict:
    """Both sign conditions for each atom: nonnegative iff the regularization
    limit preserves the estimate with the fixed M and gamma_j."""
    out = {}
    tau = weight.tau
    for xj, Wj in weight.W.items():
        mj = Wj / weight.M
        if Wj <= 500.0:
            e1 = tau * math.exp(Wj) - 1.0 - 2.0 * mj * math.exp(0.75 * Wj)
            e2 = 2.0 * (math.exp(0.5 * Wj) - 1.0) - mj * math.exp(0.25 * Wj)
        else:
            b1 = tau * math.exp(min(0.25 * Wj, 700.0)) - math.exp(-0.75 * Wj) - 2.0 * mj
            e1 = math.inf if b1 > 0 else -math.inf
            b2 = 2.0 * (math.exp(min(0.25 * Wj, 700.0)) - math.exp(-0.25 * Wj)) - mj
            e2 = math.inf if b2 > 0 else -math.inf
        out[xj] = (e1, e2)
    return out


def atom_inequality_values(tau, mu_j, M=None):
    """The two expressions at given (tau, mu_j) with M = max(2, 8/tau) default."""
    if M is None:
        M = max(2.0, 8.0 / tau)
    e1 = tau * math.exp(M * mu_j) - 1.0 - 2.0 * mu_j * math.exp(0.75 * M * mu_j)
    e2 = 2.0 * (math.exp(0.5 * M * mu_j) - 1.0) - mu_j * math.exp(0.25 * M * mu_j)
    return e1, e2


def evaluate_estimate(spec: CoefficientSpec, phase: PhaseSpec, weight: CarlemanWeight,
                      point: SpectralPoint, f, *, domain_radius=None, n_nodes=20,
                      solution: SolutionField | None = None) -> dict:
    """Both sides of the weighted estimate for v = R(z) <x>^{-s} f.

    lhs   = int <x>^{-2s} (|e^{phi/h} v|^2 + |(h alpha d/dx + i b) e^{phi/h} v|^2)
    rhs_f = int <x>^{2s} |(P - E - i eps) v|^2   (= int |f|^2 for exact data)
    rhs_eps = |eps| int |v|^2.
    """
    s = weight.s
    h = spec.h
    if solution is None:
        if callable(f):
            fx = f
        else:
            fx = lambda x: f(x)
        rhs = lambda x: (1.0 + np.asarray(x) ** 2) ** (-s / 2.0) * np.asarray(fx(x))
        grid = spec_grid(spec, point.z, extra_edges=phase.dphi.breakpoints,
                         domain_radius=domain_radius, n_nodes=n_nodes)
        solution = solve(spec, point, rhs, grid=grid)
    g = solution.grid
    xw = (1.0 + g.x ** 2)
    phi_n = coeff_panel_values(phase.phi, g)
    dphi_n = coeff_panel_values(phase.dphi, g)
    alpha_n = coeff_panel_values(spec.alpha, g)
    expphi = np.exp(phi_n / h)
    u = expphi * solution.v
    pu = expphi * (solution.p + alpha_n * dphi_n * solution.v)
    lhs = float(np.real(g.integrate(xw ** (-s) * (np.abs(u) ** 2 + np.abs(pu) ** 2))))
    lhs += math.exp(2.0 * phase.sup_phi / h) * solution._tail_sq(s, which="both")
    # rhs uses the actually-solved right-hand side: <x>^{-s} f interpolant
    fvals = g.sample(lambda x: np.asarray(f(x), dtype=complex)) if callable(f) else None
    if fvals is None:
        fvals = np.empty(g.x.shape, dtype=complex)
        for p in range(g.n_panels):
            i = f.piece_index(g.mid[p])
            fvals[p] = npp.polyval(g.x[p], f.pieces[i])
    rhs_f = float(np.real(g.integrate(np.abs(fvals) ** 2)))
    rhs_eps = abs(point.eps) * solution.l2_sq(include_tails=True)
    return {"lhs": lhs, "rhs_f": rhs_f, "rhs_eps": rhs_eps, "solution": solution}


@dataclass
class ConstantReport:
    """Proof-chain constant C(h), carried in log form with its factor list."""

    log_value: float
    factors: dict

    @property
    def value(self):
        return float(np.exp(self.log_value)) if self.log_value < 700 else np.inf

    def provenance(self):
        return {"log_C": self.log_value,
                "factors": {k: float(v) for k, v in self.factors.items()}}


def constant_report(spec: CoefficientSpec, phase: PhaseSpec, weight: CarlemanWeight,
                    E: float, eps0: float) -> ConstantReport:
    """Compose the explicit constant C(h) with lhs <= C(h)(int|f|^2 + |eps|int|v|^2).

    Every factor follows the fixed estimate chain: the weight sup bound, the
    phase exponential, the Young splits for the magnetic terms (theta = 1/4
    twice), the sup-norm interpolation split with gamma = 1/(2 K_inf), and
    the epsilon coupling through the weight.  Any slack is one-sided (C can
    only be enlarged).
    """
    h = spec.h
    infa, infb, supa = spec.alpha_inf, spec.beta_inf, spec.alpha_sup
    nV0 = spec.V0_mass
    nb0sq = spec.b0_l2_sq
    nb1 = spec.b1_sup
    nEV1 = (E - spec.V1).sup_abs()
    naphi = (spec.alpha * phase.dphi).sup_abs()
    K_v = 1.0 / (2.0 * infb) + nEV1 / infb + 4.0 * nb1 ** 2 / infa
    K_inf = nV0 / infb + 4.0 * nb0sq / infa
    if K_inf > 0.0:
        Q_F = 2.0 / infb
        Q_V = 4.0 * K_v + 4.0 * K_inf ** 2 / (h * h * infa)
        S_F = Q_F / (4.0 * K_inf)
        S_V = K_inf / (h * h * infa) + Q_V / (4.0 * K_inf)
    else:
        Q_F = 1.0 / infb
        Q_V = 2.0 * K_v
        S_F = S_V = 0.0
    P_F = 2.0 * (supa * Q_F + nb0sq * S_F)
    P_V = 2.0 * (supa * Q_V + 2.0 * (naphi ** 2 + nb1 ** 2) + nb0sq * S_V)
    log_phase = 2.0 * phase.sup_phi / h
    log_Cw = weight.log_C_w
    log_cf_1 = log_Cw - 2.0 * math.log(h) - 2.0 * math.log(infb) + log_phase
    terms = [log_cf_1]
    if eps0 > 0.0 and P_F > 0.0:
        terms.append(log_Cw + math.log(eps0) - math.log(h) - math.log(infb)
                     + log_phase + math.log(P_F))
    log_cf = float(np.logaddexp.reduce(terms))
    log_ceps = log_Cw - math.log(h) - math.log(infb) + log_phase + math.log(P_V + 1.0)
    log_C = max(log_cf, log_ceps)
    factors = {
        "weight-sup-bound-log": log_Cw,
        "phase-exponential-log": log_phase,
        "inv-inf-beta": 1.0 / infb,
        "h": h,
        "eps-bound": eps0,
        "gradient-energy-from-data": Q_F,
        "gradient-energy-from-mass": Q_V,
        "sup-norm-split-from-data": S_F,
        "sup-norm-split-from-mass": S_V,
        "quasi-derivative-from-data": P_F,
        "quasi-derivative-from-mass": P_V,
        "mass-coupling-K": K_v,
        "sup-norm-coupling-K": K_inf,
        "log-C-data-term": log_cf,
        "log-C-eps-term": log_ceps,
    }
    return ConstantReport(log_value=float(log_C), factors=factors)
