"""Exact calculus of piecewise-polynomial BV functions and signed measures.

A function of bounded variation is represented by a strictly increasing list
of breakpoints and one real polynomial per open interval (including the two
unbounded tails).  At a breakpoint the function carries a left limit f^L and
a right limit f^R given by the adjacent polynomials; pointwise evaluation
returns the average f^A = (f^L + f^R)/2.  The class is closed under +, -, *,
|.|, differentiation (which produces a measure: density plus jump atoms) and
cumulative integration, all performed exactly on polynomial coefficients.

A signed measure is an absolutely continuous density (a PiecewiseBV) plus a
finite list of atoms (point masses).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npp

__all__ = [
    "PiecewiseBV",
    "SignedMeasure",
    "derivative_measure",
    "integrate",
    "product_rule_check",
    "cumulative",
]

_ZERO = np.zeros(1)


def _trim(c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    c = npp.polytrim(c, tol=0.0)
    return c if c.size else _ZERO.copy()


def _poly_eval(c, x):
    return npp.polyval(x, c)


def _compose_affine(c, u0, du):
    """Coefficients of p(u0 + du*x) given coefficients of p(u)."""
    c = _trim(c)
    out = np.array([c[-1]])
    for k in range(len(c) - 2, -1, -1):
        out = npp.polyadd(npp.polymul(out, [u0, du]), [c[k]])
    return _trim(out)


def _real_roots(c, lo, hi):
    """Real roots of the polynomial in (lo, hi), sorted, deduplicated."""
    c = _trim(c)
    if len(c) < 2:
        return np.empty(0)
    r = npp.polyroots(c)
    r = np.unique(r[np.abs(r.imag) < 1e-9].real)
    return r[(r > lo) & (r < hi)]


def _interval_points(lo, hi):
    """Representative finite probe points spanning (lo, hi)."""
    a = lo if np.isfinite(lo) else hi - 2.0 if np.isfinite(hi) else -1.0
    b = hi if np.isfinite(hi) else lo + 2.0 if np.isfinite(lo) else 1.0
    return a, b


class PiecewiseBV:
    """Piecewise-polynomial function of (locally) bounded variation on R."""

    __slots__ = ("breakpoints", "pieces")

    def __init__(self, breakpoints, pieces):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1:
            raise ValueError("breakpoints must be a 1-d sequence")
        if bp.size and not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(pieces) != bp.size + 1:
            raise ValueError("need exactly len(breakpoints)+1 pieces")
        self.breakpoints = bp
        self.pieces = [_trim(c) for c in pieces]

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, value):
        return cls([], [[float(value)]])

    @classmethod
    def step(cls, x0, left=0.0, right=1.0):
        return cls([x0], [[float(left)], [float(right)]])

    @classmethod
    def indicator(cls, a, b, height=1.0):
        if not a < b:
            raise ValueError("need a < b")
        return cls([a, b], [[0.0], [float(height)], [0.0]])

    @classmethod
    def on_interval(cls, a, b, coeffs, outside=0.0):
        """Polynomial `coeffs` on (a, b), constant `outside` elsewhere."""
        if not a < b:
            raise ValueError("need a < b")
        return cls([a, b], [[outside], coeffs, [outside]])

    # -- basic queries -------------------------------------------------
    def piece_index(self, x):
        """Index of the open interval containing x (ambiguous at breakpoints)."""
        return int(np.searchsorted(self.breakpoints, x, side="right"))

    def left_value(self, x):
        i = int(np.searchsorted(self.breakpoints, x, side="left"))
        return _poly_eval(self.pieces[i], x)

    def right_value(self, x):
        i = int(np.searchsorted(self.breakpoints, x, side="right"))
        return _poly_eval(self.pieces[i], x)

    def value(self, x):
        """f^A(x): the average of the one-sided limits."""
        return 0.5 * (self.left_value(x) + self.right_value(x))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xv = np.atleast_1d(x)
        idx = np.searchsorted(self.breakpoints, xv, side="right")
        out = np.empty_like(xv)
        for i in np.unique(idx):
            m = idx == i
            out[m] = _poly_eval(self.pieces[i], xv[m])
        # breakpoint hits: replace by the average value
        if self.breakpoints.size:
            hit = np.isin(xv, self.breakpoints)
            for j in np.nonzero(hit)[0]:
                out[j] = self.value(xv[j])
        return out[0] if scalar else out

    @property
    def left_values(self):
        return np.array([self.left_value(x) for x in self.breakpoints])

    @property
    def right_values(self):
        return np.array([self.right_value(x) for x in self.breakpoints])

    @property
    def jumps(self):
        return self.right_values - self.left_values

    def has_constant_tails(self):
        return len(self.pieces[0]) == 1 and len(self.pieces[-1]) == 1

    def degree(self):
        return max(len(c) - 1 for c in self.pieces)

    def support(self):
        """Smallest [a, b] outside of which f vanishes, or None if no compact support."""
        if np.any(self.pieces[0] != 0) or np.any(self.pieces[-1] != 0):
            return None
        if not self.breakpoints.size:
            return (0.0, 0.0)
        lo, hi = self.breakpoints[0], self.breakpoints[-1]
        return (lo, hi)

    # -- arithmetic ----------------------------------------------------
    def _aligned(self, other):
        bp = np.union1d(self.breakpoints, other.breakpoints)
        return bp, self.refine(bp).pieces, other.refine(bp).pieces

    def refine(self, breakpoints):
        """Same function represented on a superset of breakpoints."""
        bp = np.union1d(self.breakpoints, breakpoints)
        pieces = []
        edges = np.concatenate(([-np.inf], bp, [np.inf]))
        for i in range(len(bp) + 1):
            mid = edges[i] + 1.0 if not np.isfinite(edges[i + 1]) else (
                edges[i + 1] - 1.0 if not np.isfinite(edges[i]) else 0.5 * (edges[i] + edges[i + 1]))
            if not np.isfinite(mid):
                mid = 0.0
            j = self.piece_index(mid)
            pieces.append(self.pieces[j].copy())
        return PiecewiseBV(bp, pieces)

    def __add__(self, other):
        if np.isscalar(other):
            return PiecewiseBV(self.breakpoints, [npp.polyadd(c, [other]) for c in self.pieces])
        bp, pa, pb = self._aligned(other)
        return PiecewiseBV(bp, [npp.polyadd(a, b) for a, b in zip(pa, pb)])

    __radd__ = __add__

    def __neg__(self):
        return PiecewiseBV(self.breakpoints, [-c for c in self.pieces])

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return PiecewiseBV(self.breakpoints, [c * float(other) for c in self.pieces])
        bp, pa, pb = self._aligned(other)
        return PiecewiseBV(bp, [npp.polymul(a, b) for a, b in zip(pa, pb)])

    __rmul__ = __mul__

    def square(self):
        return self * self

    def abs(self):
        """|f| with sign-change roots promoted to breakpoints."""
        edges = np.concatenate(([-np.inf], self.breakpoints, [np.inf]))
        new_bp, new_pieces = [], []
        for i, c in enumerate(self.pieces):
            lo, hi = edges[i], edges[i + 1]
            roots = _real_roots(c, lo, hi)
            subs = np.concatenate(([lo], roots, [hi]))
            for j in range(len(subs) - 1):
                a, b = _interval_points(subs[j], subs[j + 1])
                mid = 0.5 * (a + b)
                sign = -1.0 if _poly_eval(c, mid) < 0 else 1.0
                new_pieces.append(sign * c)
                if j < len(subs) - 2:
                    new_bp.append(subs[j + 1])
            if i < len(self.pieces) - 1:
                new_bp.append(edges[i + 1])
        return PiecewiseBV(new_bp, new_pieces)

    # -- analysis -------------------------------------------------------
    def extrema_on(self, lo=-np.inf, hi=np.inf):
        """(inf, sup) of f over (lo, hi), using one-sided limits at breakpoints."""
        vals = []
        edges = np.concatenate(([-np.inf], self.breakpoints, [np.inf]))
        for i, c in enumerate(self.pieces):
            a, b = max(edges[i], lo), min(edges[i + 1], hi)
            if a >= b:
                continue
            if len(c) > 1:  # nonconstant pieces escape to +-inf on unbounded ends
                lead = c[-1]
                if not np.isfinite(a):
                    vals.append(np.sign(lead) * (-1.0) ** (len(c) - 1) * np.inf)
                if not np.isfinite(b):
                    vals.append(np.sign(lead) * np.inf)
            crit = _real_roots(npp.polyder(c), a, b)
            probes = list(crit)
            for e in (a, b):
                if np.isfinite(e):
                    probes.append(e)
            if not probes:
                probes = [0.0]
            vals.extend(_poly_eval(c, np.asarray(probes)).tolist())
        if not vals:
            return (np.inf, -np.inf)
        return (min(vals), max(vals))

    def inf(self, lo=-np.inf, hi=np.inf):
        return self.extrema_on(lo, hi)[0]

    def sup(self, lo=-np.inf, hi=np.inf):
        return self.extrema_on(lo, hi)[1]

    def sup_abs(self, lo=-np.inf, hi=np.inf):
        m, M = self.extrema_on(lo, hi)
        return max(abs(m), abs(M))

    def integrate_interval(self, a, b):
        """Exact integral of f over (a, b) for finite a < b."""
        if not a < b:
            raise ValueError("need a < b")
        edges = np.concatenate(([-np.inf], self.breakpoints, [np.inf]))
        total = 0.0
        for i, c in enumerate(self.pieces):
            lo, hi = max(edges[i], a), min(edges[i + 1], b)
            if lo >= hi:
                continue
            anti = npp.polyint(c)
            total += _poly_eval(anti, hi) - _poly_eval(anti, lo)
        return total

    def l1_norm(self):
        """Integral of |f| over R; inf if a tail does not vanish."""
        if np.any(self.pieces[0] != 0) or np.any(self.pieces[-1] != 0):
            return np.inf
        if not self.breakpoints.size or self.breakpoints[0] == self.breakpoints[-1]:
            return 0.0
        g = self.abs()
        return g.integrate_interval(self.breakpoints[0], self.breakpoints[-1])

    def l2_norm_sq(self):
        if np.any(self.pieces[0] != 0) or np.any(self.pieces[-1] != 0):
            return np.inf
        if not self.breakpoints.size or self.breakpoints[0] == self.breakpoints[-1]:
            return 0.0
        return self.square().integrate_interval(self.breakpoints[0], self.breakpoints[-1])

    def total_variation(self):
        """Total variation of f over R (inf unless the tails are constant)."""
        if not self.has_constant_tails():
            return np.inf
        tv = float(np.sum(np.abs(self.jumps)))
        edges = np.concatenate(([-np.inf], self.breakpoints, [np.inf]))
        for i, c in enumerate(self.pieces):
            d = _trim(npp.polyder(c)) if len(c) > 1 else _ZERO
            if not np.any(d != 0):
                continue
            lo, hi = edges[i], edges[i + 1]
            tv += PiecewiseBV([], [d]).abs().integrate_interval(lo, hi)
        return tv

    def compose_affine(self, u0, du):
        """f(u0 + du*x) as a PiecewiseBV (du != 0)."""
        if du == 0:
            raise ValueError("du must be nonzero")
        bp = (self.breakpoints - u0) / du
        pieces = [_compose_affine(c, u0, du) for c in self.pieces]
        if du < 0:
            bp = bp[::-1]
            pieces = pieces[::-1]
        return PiecewiseBV(bp, pieces)

    def derivative_measure(self):
        return derivative_measure(self)

    def __repr__(self):
        return f"PiecewiseBV({self.breakpoints.tolist()}, degree<={self.degree()})"


@dataclass
class SignedMeasure:
    """Finite signed Borel measure: AC density plus finitely many atoms."""

    density: PiecewiseBV = field(default_factory=lambda: PiecewiseBV.constant(0.0))
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        combined = {}
        for x, m in self.atoms:
            combined[float(x)] = combined.get(float(x), 0.0) + float(m)
        self.atoms = sorted((x, m) for x, m in combined.items() if m != 0.0)

    @classmethod
    def from_atoms(cls, atoms):
        return cls(PiecewiseBV.constant(0.0), list(atoms))

    @classmethod
    def dirac(cls, x0, mass=1.0):
        return cls.from_atoms([(x0, mass)])

    def atom_mass(self, x):
        for t, m in self.atoms:
            if t == x:
                return m
        return 0.0

    @property
    def atom_locations(self):
        return np.array([t for t, _ in self.atoms])

    def total_variation_mass(self):
        return self.density.l1_norm() + sum(abs(m) for _, m in self.atoms)

    def integrate(self, a, b, closure="half_open"):
        return integrate(self, a, b, closure)

    def __add__(self, other):
        return SignedMeasure(self.density + other.density, self.atoms + other.atoms)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return SignedMeasure(self.density * c, [(x, c * m) for x, m in self.atoms])

    def scaled_by_function(self, f: PiecewiseBV):
        """The measure f^A dmu: densities multiply, atom masses scale by f^A."""
        return SignedMeasure(f * self.density, [(x, f.value(x) * m) for x, m in self.atoms])

    def abs(self):
        return SignedMeasure(self.density.abs(), [(x, abs(m)) for x, m in self.atoms])

    def cumulative(self, anchor=0.0):
        return cumulative(self, anchor)


def derivative_measure(f: PiecewiseBV) -> SignedMeasure:
    """Distributional derivative df: piecewise polynomial density + jump atoms."""
    dens = PiecewiseBV(f.breakpoints, [npp.polyder(c) if len(c) > 1 else _ZERO.copy()
                                       for c in f.pieces])
    atoms = [(x, j) for x, j in zip(f.breakpoints, f.jumps) if j != 0.0]
    return SignedMeasure(dens, atoms)


def integrate(mu: SignedMeasure, a, b, closure="half_open"):
    """Integral of mu over (a, b] (half_open) or (a, b) (open)."""
    if not a < b:
        raise ValueError(f"invalid interval: need a < b, got [{a}, {b}]")
    if closure not in ("half_open", "open"):
        raise ValueError(f"unknown closure {closure!r}")
    total = mu.density.integrate_interval(a, b)
    for x, m in mu.atoms:
        if closure == "half_open":
            if a < x <= b:
                total += m
        else:
            if a < x < b:
                total += m
    return total


def product_rule_check(f: PiecewiseBV, g: PiecewiseBV, pad=1.0):
    """Compare d(fg) against f^A dg + g^A df.

    The identity holds as measures on bounded Borel sets, so the defect is
    the total variation of the difference over a window padding the
    breakpoint hull, plus the sup of the tail density mismatch.
    """
    lhs = derivative_measure(f * g)
    rhs = g.derivative_measure().scaled_by_function(f) + f.derivative_measure().scaled_by_function(g)
    bp = np.union1d(f.breakpoints, g.breakpoints)
    fr, gr = f.refine(bp), g.refine(bp)
    ld = np.longdouble
    defect = ld(0.0)
    edges = np.concatenate(([-pad if not bp.size else bp[0] - pad], bp,
                            [pad if not bp.size else bp[-1] + pad]))
    for i, (cf, cg) in enumerate(zip(fr.pieces, gr.pieces)):
        cf = cf.astype(ld)
        cg = cg.astype(ld)
        delta = npp.polysub(npp.polyder(npp.polymul(cf, cg)),
                            npp.polyadd(npp.polymul(cf, npp.polyder(cg)),
                                        npp.polymul(cg, npp.polyder(cf))))
        a, b = edges[i], edges[i + 1]
        if i == 0:
            a = b - pad
        if i == len(fr.pieces) - 1:
            b = a + pad
        r = max(abs(a), abs(b))
        # |poly| <= sum |c_k| r^k bounds the TV of the density mismatch
        defect += (b - a) * sum(abs(c) * ld(r) ** k for k, c in enumerate(delta))
    for x in bp:
        fL, fR = ld(fr.left_value(x)), ld(fr.right_value(x))
        gL, gR = ld(gr.left_value(x)), ld(gr.right_value(x))
        jump_lhs = fR * gR - fL * gL
        jump_rhs = 0.5 * (fL + fR) * (gR - gL) + 0.5 * (gL + gR) * (fR - fL)
        defect += abs(jump_lhs - jump_rhs)
    return {"lhs": lhs, "rhs": rhs, "max_defect": float(defect)}


def cumulative(mu: SignedMeasure, anchor=0.0) -> PiecewiseBV:
    """Right-continuous primitive of mu vanishing just left of `anchor`.

    Satisfies derivative_measure(cumulative(mu)) == mu exactly on the
    representation; the value at the anchor is the atom mass there (if any).
    """
    bp = np.union1d(mu.density.breakpoints, mu.atom_locations)
    dens = mu.density.refine(bp)
    antis = [npp.polyint(c) for c in dens.pieces]
    n = len(antis)
    offsets = np.zeros(n)
    for i in range(1, n):
        x = bp[i - 1]
        offsets[i] = offsets[i - 1] + _poly_eval(antis[i - 1], x) - _poly_eval(antis[i], x)
    # atom steps: region i (right of bp[i-1]) accumulates atoms at t <= bp[i-1]
    steps = np.zeros(n)
    acc = 0.0
    masses = dict(mu.atoms)
    for i in range(1, n):
        acc += masses.get(bp[i - 1], 0.0)
        steps[i] = acc
    pieces = [npp.polyadd(antis[i], [offsets[i] + steps[i]]) for i in range(n)]
    out = PiecewiseBV(bp, pieces)
    # normalize: right-continuous value at anchor equals the atom mass at anchor
    shift = out.right_value(anchor) - masses.get(float(anchor), 0.0)
    return out - shift
