"""Assembly of the 1-D magnetic Schrodinger operator

    P(h) = beta(-h^2 d/dx(alpha d/dx) + h b D + h D b) + V,   D = -i d/dx,

acting on L^2(beta^{-1}dx), with piecewise-polynomial BV coefficients, a
measure-valued short-range electric part V0 (density + point masses), and a
compactly supported short-range magnetic part b0.

Solutions are carried as pairs (u, p) with quasi-derivative
p = h*alpha*u' + i*b*u; p is continuous across coefficient jumps and jumps
only at V0 atoms, by the amount returned by `jump_rule`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bvcalc import PiecewiseBV, SignedMeasure
from .grids import PanelGrid


class DomainViolationError(Exception):
    """Raised when a grid function fails the quasi-derivative jump conditions."""

    def __init__(self, message, residues=None):
        super().__init__(message)
        self.residues = residues or []


def _as_bv(x) -> PiecewiseBV:
    if isinstance(x, PiecewiseBV):
        return x
    return PiecewiseBV.constant(float(x))


MAX_INPUT_DEGREE = 3


@dataclass
class CoefficientSpec:
    """Coefficients of P(h), validated at construction."""

    h: float = 1.0
    alpha: PiecewiseBV = field(default_factory=lambda: PiecewiseBV.constant(1.0))
    beta: PiecewiseBV = field(default_factory=lambda: PiecewiseBV.constant(1.0))
    b0: PiecewiseBV = field(default_factory=lambda: PiecewiseBV.constant(0.0))
    b1: PiecewiseBV = field(default_factory=lambda: PiecewiseBV.constant(0.0))
    V0: SignedMeasure = field(default_factory=SignedMeasure)
    V1: PiecewiseBV = field(default_factory=lambda: PiecewiseBV.constant(0.0))
    support_radius: float | None = None

    def __post_init__(self):
        self.alpha = _as_bv(self.alpha)
        self.beta = _as_bv(self.beta)
        self.b0 = _as_bv(self.b0)
        self.b1 = _as_bv(self.b1)
        self.V1 = _as_bv(self.V1)
        if not isinstance(self.V0, SignedMeasure):
            self.V0 = SignedMeasure(_as_bv(self.V0))
        self.validate()

    def validate(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        for name in ("alpha", "beta", "b0", "b1", "V1"):
            f = getattr(self, name)
            if f.degree() > MAX_INPUT_DEGREE:
                raise ValueError(f"{name}: piece degree {f.degree()} exceeds {MAX_INPUT_DEGREE}")
        if self.V0.density.degree() > MAX_INPUT_DEGREE:
            raise ValueError("V0 density degree exceeds the representation cap")
        if self.alpha_inf <= 0:
            raise ValueError("alpha must have positive infimum")
        if self.beta_inf <= 0:
            raise ValueError("beta must have positive infimum")
        for name in ("alpha", "beta", "b1", "V1"):
            f = getattr(self, name)
            if not f.has_constant_tails():
                raise ValueError(f"{name} must be constant outside a bounded interval "
                                 "(finite total variation)")
        if self.b0.support() is None:
            raise ValueError("b0 must be compactly supported")
        if self.V0.density.support() is None:
            raise ValueError("V0 density must be compactly supported")
        if self.support_radius is not None:
            r = self.support_radius
            for lo, hi in filter(None, (self.b0.support(), self.V0.density.support())):
                if lo < -r or hi > r:
                    raise ValueError("b0/V0 support exceeds the declared support radius")
            if any(abs(x) > r for x in self.V0.atom_locations):
                raise ValueError("V0 atom outside the declared support radius")

    # -- derived data ----------------------------------------------------
    @cached_property
    def b(self) -> PiecewiseBV:
        return self.b0 + self.b1

    @cached_property
    def V_density(self) -> PiecewiseBV:
        return self.V0.density + self.V1

    @property
    def atoms(self):
        return self.V0.atoms

    @cached_property
    def breakpoints(self):
        bps = [self.alpha.breakpoints, self.beta.breakpoints, self.b0.breakpoints,
               self.b1.breakpoints, self.V0.density.breakpoints, self.V1.breakpoints,
               self.V0.atom_locations]
        out = np.array([], dtype=float)
        for b in bps:
            out = np.union1d(out, b)
        return out

    @cached_property
    def alpha_inf(self):
        return self.alpha.inf()

    @cached_property
    def beta_inf(self):
        return self.beta.inf()

    @cached_property
    def alpha_sup(self):
        return self.alpha.sup()

    @cached_property
    def beta_sup(self):
        return self.beta.sup()

    @cached_property
    def V0_mass(self):
        return self.V0.total_variation_mass()

    @cached_property
    def b0_l1(self):
        return self.b0.l1_norm()

    @cached_property
    def b0_l2_sq(self):
        return self.b0.l2_norm_sq()

    @cached_property
    def b1_sup(self):
        return self.b1.sup_abs()

    @cached_property
    def body_radius(self):
        """Radius beyond which all coefficients are (tail) constants."""
        r = 0.0
        if self.breakpoints.size:
            r = float(np.max(np.abs(self.breakpoints)))
        if self.support_radius is not None:
            r = max(r, self.support_radius)
        return r

    def tail_constants(self, side):
        """(alpha, beta, b, V) constants on the unbounded tail (side = +-1)."""
        idx = -1 if side > 0 else 0
        return (self.alpha.pieces[idx][0], self.beta.pieces[idx][0],
                self.b1.pieces[idx][0] + self.b0.pieces[idx][0],
                self.V1.pieces[idx][0] + self.V0.density.pieces[idx][0])

    def is_compactly_perturbed(self):
        """True when V, b, 1-alpha, 1-beta all vanish outside a bounded interval."""
        aL, bL, bbL, VL = self.tail_constants(-1)
        aR, bR, bbR, VR = self.tail_constants(+1)
        return all(v == 0.0 for v in (bbL, bbR, VL, VR)) and \
            all(v == 1.0 for v in (aL, aR, bL, bR))


def rescale_spec(spec: CoefficientSpec, lam: complex):
    """Semiclassical rescaling of an h=1 operator at spectral parameter lam.

    Returns (spec_h, point) with h = 1/|Re lam|, V -> h^2 V, b -> h b,
    E = 1 - h^2 (Im lam)^2, eps = 2 h sign(Re lam) Im lam, so that
    (P(h) - E - i eps) = h^2 (H - lam^2) on common domains.
    """
    if spec.h != 1.0:
        raise ValueError("rescaling expects an h=1 base operator")
    if lam.real == 0:
        raise ValueError("need Re lam != 0")
    h = 1.0 / abs(lam.real)
    scaled = CoefficientSpec(
        h=h,
        alpha=spec.alpha,
        beta=spec.beta,
        b0=spec.b0 * h,
        b1=spec.b1 * h,
        V0=spec.V0.scaled(h * h),
        V1=spec.V1 * (h * h),
        support_radius=spec.support_radius,
    )
    point = SpectralPoint.from_lambda(lam)
    return scaled, point


@dataclass
class SpectralPoint:
    """Spectral location E + i*eps, optionally tagged with the lam it came from."""

    E: float
    eps: float = 0.0
    lam: complex | None = None
    outgoing: bool = False   # required when eps == 0 (limiting absorption side +)

    @property
    def z(self) -> complex:
        return complex(self.E, self.eps)

    @classmethod
    def from_lambda(cls, lam: complex) -> "SpectralPoint":
        lam = complex(lam)
        if lam.real == 0:
            raise ValueError("need Re lam != 0")
        h = 1.0 / abs(lam.real)
        E = 1.0 - h * h * lam.imag ** 2
        eps = 2.0 * h * np.sign(lam.real) * lam.imag
        return cls(E=E, eps=eps, lam=lam, outgoing=(lam.imag == 0.0))

    def check_lambda_consistency(self, tol=1e-12):
        if self.lam is None:
            return True
        h = 1.0 / abs(self.lam.real)
        ok = abs(self.E - (1.0 - h * h * self.lam.imag ** 2)) <= tol
        ok &= abs(self.eps - 2.0 * h * np.sign(self.lam.real) * self.lam.imag) <= tol
        return bool(ok)

    def conjugate(self) -> "SpectralPoint":
        return SpectralPoint(self.E, -self.eps,
                             None if self.lam is None else -self.lam.conjugate(),
                             outgoing=self.outgoing)


def coeff_panel_values(f: PiecewiseBV, grid: PanelGrid):
    """Sample a piecewise function on a panel grid using one-sided limits.

    Each panel lies inside a single polynomial piece (grids are built with
    coefficient breakpoints among the panel edges), so edge nodes receive the
    limit from the panel interior rather than the averaged value.
    """
    out = np.empty_like(grid.x)
    for p in range(grid.n_panels):
        i = f.piece_index(grid.mid[p])
        out[p] = np.polynomial.polynomial.polyval(grid.x[p], f.pieces[i])
    return out


@dataclass
class GridFunction:
    """Samples of (u, p) on a panel grid, p = h*alpha*u' + i*b*u."""

    grid: PanelGrid
    u: np.ndarray
    p: np.ndarray

    @classmethod
    def from_callable(cls, grid: PanelGrid, spec: CoefficientSpec, f, fprime):
        u = grid.sample(lambda x: np.asarray(f(x), dtype=complex))
        du = grid.sample(lambda x: np.asarray(fprime(x), dtype=complex))
        alpha = coeff_panel_values(spec.alpha, grid)
        b = coeff_panel_values(spec.b, grid)
        p = spec.h * alpha * du + 1j * b * u
        return cls(grid, u, p)

    def u_prime(self, spec: CoefficientSpec):
        alpha = coeff_panel_values(spec.alpha, grid := self.grid)
        b = coeff_panel_values(spec.b, grid)
        return (self.p - 1j * b * self.u) / (spec.h * alpha)

    def value_at(self, x):
        return complex(self.grid.interp(self.u, x)[0])

    def l2_norm_sq(self):
        return float(np.real(self.grid.integrate(np.abs(self.u) ** 2)))


def quadratic_form(u: GridFunction, v: GridFunction, spec: CoefficientSpec) -> complex:
    """Sesquilinear form of P(h) (antilinear in u):

    q(u,v) = h^2 int alpha conj(u)'v' + i h int b (conj(u)'v - conj(u)v')
           + int conj(u) v beta^{-1} (V1 + V0_density) dx
           + sum_atoms m conj(u(x)) v(x) / beta^A(x).
    """
    if u.grid is not v.grid:
        raise ValueError("mismatched grids")
    g = u.grid
    h = spec.h
    alpha = coeff_panel_values(spec.alpha, g)
    beta = coeff_panel_values(spec.beta, g)
    b = coeff_panel_values(spec.b, g)
    Vd = coeff_panel_values(spec.V_density, g)
    du = (u.p - 1j * b * u.u) / (h * alpha)
    dv = (v.p - 1j * b * v.u) / (h * alpha)
    uc = np.conj(u.u)
    duc = np.conj(du)
    val = g.integrate(h * h * alpha * duc * dv)
    val += 1j * h * g.integrate(b * (duc * v.u - uc * dv))
    val += g.integrate(uc * v.u * Vd / beta)
    for x, m in spec.atoms:
        val += m * np.conj(u.value_at(x)) * v.value_at(x) / spec.beta.value(x)
    return complex(val)


@dataclass
class ApplyResult:
    """Absolutely continuous part of P(h)u plus the atomic defect per edge."""

    ac: np.ndarray
    residues: list
    worst: tuple


def apply_operator(u: GridFunction, spec: CoefficientSpec, atol_domain=1e-8,
                   raise_on_violation=True) -> ApplyResult:
    """P(h)u on the grid; the atomic part must vanish for u in the domain.

    The atomic residue at an interior edge x is m*u(x) - beta^A(x)*[pt](x)
    with pt = h*p the scaled quasi-derivative and m the V0 mass at x (zero at
    plain coefficient breakpoints, where pt must be continuous).
    """
    g = u.grid
    h = spec.h
    alpha = coeff_panel_values(spec.alpha, g)
    beta = coeff_panel_values(spec.beta, g)
    b = coeff_panel_values(spec.b, g)
    Vd = coeff_panel_values(spec.V_density, g)
    pt = h * u.p
    du = (u.p - 1j * b * u.u) / (h * alpha)
    dpt = g.diff(pt)
    ac = -beta * dpt - 1j * h * beta * b * du + Vd * u.u
    residues = []
    worst = (None, 0.0)
    for k in range(g.n_panels - 1):
        x = g.edges[k + 1]
        jump_pt = pt[k + 1, 0] - pt[k, -1]
        m = spec.V0.atom_mass(x)
        uc = 0.5 * (u.u[k + 1, 0] + u.u[k, -1])
        res = m * uc - spec.beta.value(x) * jump_pt
        if res != 0:
            residues.append((x, complex(res)))
        if abs(res) > worst[1]:
            worst = (x, abs(res))
    result = ApplyResult(ac, residues, worst)
    if raise_on_violation and worst[1] > atol_domain:
        raise DomainViolationError(
            f"grid function violates the quasi-derivative jump condition at "
            f"x={worst[0]} (atomic residue {worst[1]:.3e})", residues)
    return result


def form_lower_bound(spec: CoefficientSpec) -> dict:
    """Constants with q(u,u) >= -c_mass ||u||^2 + c_grad ||u'||^2 (V1 = 0 part).

    For specs with V1 != 0 the bound holds after enlarging c_mass by
    v1_shift = sup|V1| / inf beta, returned separately.
    """
    a = spec.alpha_inf
    h = spec.h
    c_mass = (spec.V0_mass ** 2 / (h * h * a)
              + 864.0 * spec.b0_l2_sq ** 2 / (h * h * a ** 3)
              + 4.0 * spec.b1_sup ** 2 / a)
    c_grad = h * h * a / 2.0
    v1_shift = spec.V1.sup_abs() / spec.beta_inf
    return {"c_mass": c_mass, "c_grad": c_grad, "v1_shift": v1_shift}


def jump_rule(spec: CoefficientSpec, atom_location, u_value, strict=True):
    """Required jump of pt = h^2 alpha u' + i h b u across a V0 atom:

        pt(x+) - pt(x-) = m * u(x) / beta^A(x).
    """
    m = spec.V0.atom_mass(atom_location)
    if m == 0.0 and strict and not any(x == atom_location for x, _ in spec.atoms):
        raise LookupError(f"no V0 atom at x={atom_location}")
    return m * u_value / spec.beta.value(atom_location)
