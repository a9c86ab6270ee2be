"""Meromorphic continuation of the cutoff resolvent and resonance location.

For compactly supported perturbations (h = 1), the outgoing solutions
e^{+i lam x} (from the right) and e^{-i lam x} (from the left) are pushed to
x = 0 through all pieces and atoms, and

    D(lam) = [u_-(0) pt_+(0) - u_+(0) pt_-(0)] / (2 i lam)

is analytic with D == 1 for the free operator; its zeros are exactly the
poles of the continued cutoff resolvent.  Propagation renormalizes per event
and carries the removed log-magnitude separately, so large |Im lam| * R
scans cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bvcalc import PiecewiseBV, _compose_affine
from .operator import CoefficientSpec, coeff_panel_values
from .solve import build_basis, apply_basis, spec_grid

_SMOOTHSTEP = np.array([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])


class UnresolvedClusterError(Exception):
    """Winding could not be localized after maximal subdivision."""


def smooth_bump(inner: float, outer: float) -> PiecewiseBV:
    """C^2 bump equal to 1 on [-inner, inner], 0 outside [-outer, outer]."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    w = outer - inner
    down = npp_sub_smoothstep(inner, w)          # 1 - s((x-inner)/w) on (inner, outer)
    up = np.array([(-1.0) ** j * c for j, c in enumerate(down)])
    return PiecewiseBV([-outer, -inner, inner, outer],
                       [[0.0], up, [1.0], down, [0.0]])


def npp_sub_smoothstep(inner, w):
    import numpy.polynomial.polynomial as npp
    return npp.polysub([1.0], _compose_affine(_SMOOTHSTEP, -inner / w, 1.0 / w))


@dataclass
class CutoffSpec:
    """Nested C^2 cutoffs: chi = 1 near the coefficient support."""

    chi: PiecewiseBV
    chi1: PiecewiseBV
    chi2: PiecewiseBV
    inner: float
    outer: float

    @classmethod
    def for_spec(cls, spec: CoefficientSpec, pad=0.25, width=0.5):
        r = spec.body_radius
        chi = smooth_bump(r + pad, r + pad + width)
        chi1 = smooth_bump(r + pad + width, r + pad + 2 * width)
        chi2 = smooth_bump(r + pad + 2 * width, r + pad + 3 * width)
        return cls(chi, chi1, chi2, r + pad, r + pad + width)


def _require_resonance_spec(spec: CoefficientSpec):
    if spec.h != 1.0:
        raise ValueError("resonance continuation is defined for the h = 1 operator")
    if not spec.is_compactly_perturbed():
        raise ValueError("resonances need V, b, 1-alpha, 1-beta compactly supported")


def _matching_ops(spec: CoefficientSpec):
    """Ordered (left, right) operation lists from +-R to the matching point 0."""
    R = spec.body_radius
    pts = set(np.abs(spec.breakpoints).tolist())
    pts.update(abs(x) for x in spec.V0.atom_locations)
    pts.discard(0.0)
    atoms = dict(spec.V0.atoms)

    def piece_params(x):
        return (spec.alpha.pieces[spec.alpha.piece_index(x)],
                spec.beta.pieces[spec.beta.piece_index(x)],
                np.polynomial.polynomial.polyadd(
                    spec.b0.pieces[spec.b0.piece_index(x)],
                    spec.b1.pieces[spec.b1.piece_index(x)]),
                np.polynomial.polynomial.polyadd(
                    spec.V0.density.pieces[spec.V0.density.piece_index(x)],
                    spec.V1.pieces[spec.V1.piece_index(x)]))

    left, right = [], []
    # left pass: -R -> 0, crossing atoms at x <= 0 (the one at 0 included)
    xs = sorted({-p for p in pts} | {-R, 0.0})
    xs = [x for x in xs if -R <= x <= 0.0]
    if -R != 0.0 and atoms.get(-R):
        left.append(("atom", atoms[-R] / spec.beta.value(-R)))
    for a, b in zip(xs[:-1], xs[1:]):
        left.append(("piece", a, b, piece_params(0.5 * (a + b))))
        if b != 0.0 and b in atoms:
            left.append(("atom", atoms[b] / spec.beta.value(b)))
    if 0.0 in atoms:
        left.append(("atom", atoms[0.0] / spec.beta.value(0.0)))
    # right pass: +R -> 0, crossing atoms at x > 0 only
    xs = sorted(pts | {R, 0.0})
    xs = [x for x in xs if 0.0 <= x <= R]
    if R != 0.0 and atoms.get(R):
        right.append(("atom", -atoms[R] / spec.beta.value(R)))
    for a, b in zip(xs[::-1][:-1], xs[::-1][1:]):
        right.append(("piece", a, b, piece_params(0.5 * (a + b))))
        if b > 0.0 and b in atoms:
            right.append(("atom", -atoms[b] / spec.beta.value(b)))
    const = all(len(c) == 1 for op in left + right if op[0] == "piece"
                for c in op[3])
    return left, right, const, R


def _ops_to_events(ops):
    rows = []
    for op in ops:
        if op[0] == "atom":
            rows.append([kernels.EVENT_ATOM, 0.0, 1.0, 1.0, 0.0, 0.0, op[1], 0.0])
        else:
            _, a, b, (ca, cb, cbb, cV) = op
            rows.append([kernels.EVENT_PIECE, b - a, ca[0], cb[0], cbb[0], cV[0], 0.0, 0.0])
    return np.asarray(rows, dtype=float).reshape(-1, 8)


class Determinant:
    """Analytic matching determinant lam -> D(lam), batch-evaluated."""

    def __init__(self, spec: CoefficientSpec):
        _require_resonance_spec(spec)
        self.spec = spec
        left, right, const, R = _matching_ops(spec)
        self.R = R
        self._const = const
        self._left, self._right = left, right
        if const:
            self._ev_left = _ops_to_events(left)
            self._ev_right = _ops_to_events(right)

    def _states_at_zero(self, lams):
        lams = np.asarray(lams, dtype=complex)
        zs = lams * lams
        yl0 = np.vstack([np.ones_like(lams), -1j * lams])
        yr0 = np.vstack([np.ones_like(lams), 1j * lams])
        if self._const:
            yl, sl = kernels.propagate_events(self._ev_left, yl0, zs, 1.0)
            yr, sr = kernels.propagate_events(self._ev_right, yr0, zs, 1.0)
            return yl, sl, yr, sr
        yl = np.empty_like(yl0)
        yr = np.empty_like(yr0)
        sl = np.zeros(lams.shape)
        sr = np.zeros(lams.shape)
        for i, z in enumerate(zs):
            yl[:, i], sl[i] = self._walk(self._left, yl0[:, i], z)
            yr[:, i], sr[i] = self._walk(self._right, yr0[:, i], z)
        return yl, sl, yr, sr

    def _walk(self, ops, y0, z):
        u, pt = complex(y0[0]), complex(y0[1])
        logs = 0.0
        for op in ops:
            if op[0] == "atom":
                pt = pt + op[1] * u
            else:
                _, a, b, (ca, cb, cbb, cV) = op
                u, pt, _, _ = kernels.rk8_piece(ca, cb, cbb, cV, a, b, u, pt, z, 1.0)
            s = max(abs(u), abs(pt))
            if s > 0:
                u /= s
                pt /= s
                logs += math.log(s)
        return np.array([u, pt]), logs

    def batch(self, lams):
        """(D_scaled, log_offset): true D = D_scaled * exp(log_offset - max)."""
        lams = np.asarray(lams, dtype=complex)
        yl, sl, yr, sr = self._states_at_zero(lams)
        what = yl[0] * yr[1] - yr[0] * yl[1]
        logs = sl + sr
        d = what / (2j * lams)
        return d, logs

    def rebased(self, lams):
        """D values with a common scale factor removed (analytic in lam)."""
        d, logs = self.batch(lams)
        off = float(np.max(logs))
        return d * np.exp(logs - off), off

    def __call__(self, lam):
        """D(lam) at true scale (overflows to inf beyond ~e^709; scans use
        the rebased/log accessors instead)."""
        d, logs = self.batch(np.array([lam]))
        return complex(d[0] * np.exp(np.float64(logs[0])))

    def log_abs_and_arg(self, lams):
        d, logs = self.batch(lams)
        mag = np.where(np.abs(d) > 0, np.log(np.abs(d) + 1e-320) + logs, -np.inf)
        return mag, np.angle(d)

    def raw_wronskian(self, lams):
        """W(0) = u_- pt_+ - u_+ pt_- without the 2 i lam normalization."""
        lams = np.asarray(lams, dtype=complex)
        yl, sl, yr, sr = self._states_at_zero(lams)
        return (yl[0] * yr[1] - yr[0] * yl[1]) * np.exp(sl + sr)

    def wronskian_at_zero_energy(self):
        """Direct lam = 0 matching with the bounded (constant) exterior pair."""
        y0 = np.array([[1.0 + 0j], [0.0 + 0j]])
        if self._const:
            yl, sl = kernels.propagate_events(self._ev_left, y0.copy(), np.array([0j]), 1.0)
            yr, sr = kernels.propagate_events(self._ev_right, y0.copy(), np.array([0j]), 1.0)
        else:
            a, la = self._walk(self._left, y0[:, 0], 0j)
            b, lb = self._walk(self._right, y0[:, 0], 0j)
            yl, sl = a[:, None], np.array([la])
            yr, sr = b[:, None], np.array([lb])
        w = yl[0, 0] * yr[1, 0] - yr[0, 0] * yl[1, 0]
        return complex(w * np.exp(float(sl[0] + sr[0])))


def _edge_phases(det: Determinant, za, zb, max_depth=12):
    """Accumulated phase change of D along the segment [za, zb], adaptively."""
    pts = np.array([za, zb], dtype=complex)
    mags, args = det.log_abs_and_arg(pts)
    total = 0.0
    stack = [(za, zb, args[0], args[1], mags[0], mags[1], 0)]
    while stack:
        a, b, arga, argb, maga, magb, depth = stack.pop()
        d = (argb - arga + np.pi) % (2 * np.pi) - np.pi
        if abs(d) < 0.45 * np.pi:
            total += d
            continue
        if depth >= max_depth:
            raise UnresolvedClusterError(
                f"phase step unresolved near segment [{a}, {b}] (|D| ~ e^{min(maga, magb):.1f})")
        m = 0.5 * (a + b)
        magm, argm = det.log_abs_and_arg(np.array([m]))
        stack.append((a, m, arga, argm[0], maga, magm[0], depth + 1))
        stack.append((m, b, argm[0], argb, magm[0], magb, depth + 1))
    return total


def winding_number(det: Determinant, rect, max_depth=12) -> int:
    """Argument-principle winding of D around the rectangle boundary."""
    re0, re1, im0, im1 = rect
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1),
               complex(re0, im1), complex(re0, im0)]
    total = 0.0
    for a, b in zip(corners[:-1], corners[1:]):
        total += _edge_phases(det, a, b, max_depth)
    w = total / (2 * np.pi)
    wi = int(round(w))
    if abs(w - wi) > 0.2:
        raise UnresolvedClusterError(f"non-integer winding {w:.3f} on {rect}")
    return wi


def _newton_polish(det: Determinant, lam0, tol, max_iter=60):
    lam = complex(lam0)
    delta = 1e-6 * max(1.0, abs(lam))
    for _ in range(max_iter):
        pts = np.array([lam, lam + delta, lam - delta])
        d, _ = det.rebased(pts)
        dp = (d[1] - d[2]) / (2 * delta)
        if dp == 0:
            break
        step = -d[0] / dp
        lam = lam + step
        if abs(step) < 1e-13 * max(1.0, abs(lam)):
            break
    d, _ = det.rebased(np.array([lam, lam + delta]))
    resid = abs(d[0]) / max(abs(d[1]), 1e-300)
    return lam, resid


@dataclass
class ResonanceReport:
    """Located poles, certified zero-free rectangles, strip and norm rows."""

    zeros: list = field(default_factory=list)
    verified_rectangles: list = field(default_factory=list)
    strip: dict | None = None
    norm_rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)


def find_resonances(spec: CoefficientSpec, rectangle, tolerance=1e-10,
                    min_box=0.02, max_depth=12) -> ResonanceReport:
    """Argument-principle search with adaptive subdivision and Newton polish."""
    det = Determinant(spec)
    report = ResonanceReport(notes={"rectangle": tuple(rectangle)})
    re0, re1, im0, im1 = rectangle
    if re0 < 0 < re1 and im0 < 0 < im1:
        raise ValueError("rectangle must avoid lam = 0 (D can carry a pole "
                         "there; use zero_resonance_test for the threshold)")
    queue = [tuple(rectangle)]
    while queue:
        rect = queue.pop()
        re0, re1, im0, im1 = rect
        try:
            w = winding_number(det, rect, max_depth)
        except UnresolvedClusterError:
            # a zero sits on (or hugs) the boundary: inflate and retry once
            eps = 0.013 * max(re1 - re0, im1 - im0)
            rect = (re0 - eps, re1 + 1.1 * eps, im0 - 1.3 * eps, im1 + 0.7 * eps)
            w = winding_number(det, rect, max_depth)
        if w == 0:
            report.verified_rectangles.append(rect)
            continue
        if max(re1 - re0, im1 - im0) <= min_box:
            lam0 = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
            lam, resid = _newton_polish(det, lam0, tolerance)
            report.zeros.append({"lam": lam, "multiplicity": w, "residual": resid})
            continue
        # split off-center so axis-symmetric zeros cannot sit on a seam
        rm = re0 + 0.5371 * (re1 - re0)
        im = im0 + 0.4713 * (im1 - im0)
        queue.extend([(re0, rm, im0, im), (rm, re1, im0, im),
                      (re0, rm, im, im1), (rm, re1, im, im1)])
    # deduplicate polished zeros that landed on subdivision seams
    uniq = []
    for zrec in sorted(report.zeros, key=lambda r: (r["lam"].real, r["lam"].imag)):
        if uniq and abs(uniq[-1]["lam"] - zrec["lam"]) < 1e-7:
            uniq[-1]["multiplicity"] = max(uniq[-1]["multiplicity"], zrec["multiplicity"])
            continue
        uniq.append(zrec)
    report.zeros = uniq
    return report


def cutoff_resolvent_norms(spec: CoefficientSpec, cutoff: CutoffSpec, lam: complex,
                           n_basis="auto", n_nodes=20, refine_check=True) -> list:
    """||chi (H - lam^2)^{-1} chi|| in the four H^{k1} -> H^{k2} variants.

    Galerkin lower bounds on a sine basis over the cutoff support, solved
    through the full-line continuation (outgoing exterior e^{+-i lam x}).
    Rows are accepted once basis refinement moves them by < 2%.
    """
    _require_resonance_spec(spec)
    if n_basis == "auto":
        # resolve input frequencies up to ~1.3 |Re lam| over the support
        n_basis = max(40, int(2.6 * cutoff.outer * abs(lam.real) / np.pi) + 12)

    def norms_with(nb, nn):
        z = lam * lam
        grid = spec_grid(spec, z, extra_edges=list(cutoff.chi.breakpoints),
                         domain_radius=cutoff.outer + 1.0, n_nodes=nn,
                         resolution=3.5)
        modes = (-1j * lam, -1j * lam, 1j * lam, 1j * lam)
        basis = build_basis(spec, z, grid, modes=modes)
        Xs = cutoff.outer
        chi_n = coeff_panel_values(cutoff.chi, grid)
        dchi_n = coeff_panel_values(cutoff.chi.derivative_measure().density, grid)
        alpha_n = coeff_panel_values(spec.alpha, grid)
        b_n = coeff_panel_values(spec.b, grid)
        J = np.arange(1, nb + 1)
        freqs = J * np.pi / (2 * Xs)
        W = np.zeros((nb,) + grid.x.shape, dtype=complex)
        Wp = np.zeros_like(W)
        for j, om in enumerate(freqs):
            phi = np.sin(om * (grid.x + Xs)) * (np.abs(grid.x) <= Xs)
            v, pt, _, _ = apply_basis(basis, chi_n * phi)
            vp = (pt - 1j * b_n * v) / alpha_n
            W[j] = chi_n * v
            Wp[j] = dchi_n * v + chi_n * vp
        M0 = np.empty((nb, nb), dtype=complex)
        M1 = np.empty_like(M0)
        for j in range(nb):
            for k in range(j, nb):
                m0 = complex(grid.integrate(np.conj(W[j]) * W[k]))
                m1 = m0 + complex(grid.integrate(np.conj(Wp[j]) * Wp[k]))
                M0[j, k] = m0
                M0[k, j] = np.conj(m0)
                M1[j, k] = m1
                M1[k, j] = np.conj(m1)
        g0 = np.full(nb, Xs)
        g1 = Xs * (1.0 + freqs ** 2)
        out = {}
        from scipy.linalg import eigh
        for (k1, k2), M in (((0, 0), M0), ((0, 1), M1), ((1, 0), M0), ((1, 1), M1)):
            g = g0 if k1 == 0 else g1
            vals = eigh((M + M.conj().T) / 2, np.diag(g), eigvals_only=True)
            out[(k1, k2)] = float(np.sqrt(max(vals[-1], 0.0)))
        return out

    base = norms_with(n_basis, n_nodes)
    accepted = True
    if refine_check:
        finer = norms_with(int(n_basis * 1.5), n_nodes + 4)
        for key in base:
            denom = max(base[key], 1e-300)
            if abs(finer[key] - base[key]) / denom > 0.02:
                accepted = False
        base = finer
    rows = []
    for (k1, k2), val in sorted(base.items()):
        rows.append({"lam": lam, "k1": k1, "k2": k2, "norm": val, "accepted": accepted})
    return rows


def strip_certificate(spec: CoefficientSpec, lambda0: float, re_max: float,
                      theta_grid, norm_samples=8, cutoff: CutoffSpec | None = None,
                      n_basis=48, scan_middle_below=None) -> ResonanceReport:
    """Largest grid theta with no zeros in {lambda0 <= |Re lam| <= re_max,
    |Im lam| <= theta}, certified by winding 0 on covering rectangles.

    Zeros come in pairs lam, -conj(lam) for real coefficients, so the right
    half-strip is scanned and the mirror is certified by symmetry.  With
    scan_middle_below = delta > 0, the middle rectangle
    [-lambda0, lambda0] x [-theta, -delta] is certified as well (the contour
    deformation for propagator decay crosses Re lam = 0; delta > 0 keeps the
    scan away from the normalization point lam = 0).  Norm rows sample the
    four H^{k1} -> H^{k2} operator norms on the real axis and on the
    certified lower edge.
    """
    if lambda0 <= 0:
        raise ValueError("need lambda0 > 0")
    det = Determinant(spec)
    report = ResonanceReport()
    theta0 = None
    failure = None
    for theta in sorted(theta_grid):
        rects = _cover_strip(lambda0, re_max, theta)
        if scan_middle_below is not None and theta > scan_middle_below:
            rects = rects + [(-lambda0, lambda0, -theta, -scan_middle_below)]
        ok = True
        for rect in rects:
            try:
                w = winding_number(det, rect)
            except UnresolvedClusterError:
                w = -1
            if w != 0:
                ok = False
                sub = find_resonances(spec, rect)
                failure = {"theta": theta, "rect": rect, "zeros": sub.zeros}
                break
        if not ok:
            break
        theta0 = theta
        report.verified_rectangles.extend(rects)
    report.strip = {"lambda0": lambda0, "re_max": re_max, "theta0": theta0,
                    "mirrored_by_symmetry": True}
    if failure:
        report.notes["first_failure"] = failure
    if theta0 is not None and cutoff is not None:
        lams = np.linspace(lambda0, re_max, norm_samples)
        for lr in lams:
            report.norm_rows.extend(
                cutoff_resolvent_norms(spec, cutoff, complex(lr, 0.0), n_basis=n_basis))
            report.norm_rows.extend(
                cutoff_resolvent_norms(spec, cutoff, complex(lr, -theta0), n_basis=n_basis))
    return report


def _cover_strip(lambda0, re_max, theta, max_width=2.0):
    edges = [lambda0]
    while edges[-1] < re_max:
        edges.append(min(edges[-1] + max_width, re_max))
    return [(a, b, -theta, theta) for a, b in zip(edges[:-1], edges[1:])]


def zero_resonance_test(spec: CoefficientSpec, rel_threshold=1e-6) -> dict:
    """Threshold-resonance detector: direct lam = 0 matching plus four-ray
    extrapolation of the raw Wronskian, cross-validated."""
    det = Determinant(spec)
    w_direct = det.wronskian_at_zero_energy()
    radii = (1e-2, 1e-3, 1e-4)
    rays = (1.0 + 0j, 1j, -1.0 + 0j, -1j)
    extraps = []
    for d in rays:
        vals = det.raw_wronskian(np.array([r * d for r in radii]))
        r1, r2 = radii[-2], radii[-1]
        w0 = (vals[-1] * r1 - vals[-2] * r2) / (r1 - r2)
        extraps.append(complex(w0))
    scale = float(np.max(np.abs(det.raw_wronskian(np.array([0.1, 0.1j])))))
    scale = max(scale, 1e-30)
    margin = abs(w_direct) / scale
    agree = all(abs(e - w_direct) <= 1e-3 * scale for e in extraps)
    result = {
        "has_zero_resonance": bool(margin <= rel_threshold),
        "margin": margin,
        "direct": w_direct,
        "ray_extrapolations": extraps,
        "inconclusive": not agree,
        "scale": scale,
    }
    barrier = _appendixlike_barrier_params(spec)
    if barrier is not None:
        result["weighted_estimate_check"] = _barrier_weighted_check(spec, barrier)
    return result


def _appendixlike_barrier_params(spec: CoefficientSpec):
    """Detect V = M 1_{[-1,1]}, b = 1_{[-1,1]}, alpha = beta = 1 specs."""
    if spec.V0.atoms or spec.V0.density.l1_norm() != 0.0:
        return None
    if not (_is_const_one(spec.alpha) and _is_const_one(spec.beta)):
        return None
    ind = PiecewiseBV.indicator(-1.0, 1.0)
    if _bv_equal(spec.b, ind) and spec.V1.breakpoints.tolist() == [-1.0, 1.0]:
        inside = spec.V1.pieces[1]
        if len(inside) == 1 and inside[0] > 0:
            return float(inside[0])
    return None


def _is_const_one(f: PiecewiseBV):
    return all(len(c) == 1 and c[0] == 1.0 for c in f.pieces)


def _bv_equal(f: PiecewiseBV, g: PiecewiseBV, tol=0.0):
    bp = np.union1d(f.breakpoints, g.breakpoints)
    fr, gr = f.refine(bp), g.refine(bp)
    return all(np.array_equal(a, b) for a, b in zip(fr.pieces, gr.pieces))


def _barrier_weighted_check(spec: CoefficientSpec, M: float, delta=1.0) -> dict:
    """Energy-identity chain for the barrier example at spectral point i*eps:

    Re<(H - i eps)u, u> >= (1/2)||u'||^2 + (M - 2)||u||^2_{L2[-1,1]}   and
    ((2+delta)/12) int (|x|+1)^{-3-delta}|u|^2 <= (1/2)||u||^2_{[-1,1]}
                                                + (1/2)||u'||^2.
    """
    from .operator import SpectralPoint
    from .solve import solve
    worst1 = np.inf
    worst2 = np.inf
    weight = lambda x: (np.abs(x) + 1.0) ** (-(3.0 + delta) / 2.0)
    sources = [lambda x: weight(x) * np.exp(-x * x),
               lambda x: weight(x) * np.cos(1.7 * x) * np.exp(-0.5 * x * x)]
    for eps in (1e-2, 1e-3):
        for fsrc in sources:
            sol = solve(spec, SpectralPoint(E=0.0, eps=eps), fsrc, domain_radius=14.0)
            g = sol.grid
            u = sol.v
            up = sol.v_prime()
            mask = (np.abs(g.mid) < 1.0)[:, None] * np.ones_like(g.x)
            l2_in = float(np.real(g.integrate(np.abs(u) ** 2 * mask)))
            grad = float(np.real(g.integrate(np.abs(up) ** 2))) + sol._tail_sq(0.0, which="p")
            fvals = g.sample(lambda x: np.asarray(fsrc(x), dtype=complex))
            re_pair = float(np.real(g.integrate(np.conj(u) * fvals)))
            lhs1 = re_pair - (0.5 * grad + (M - 2.0) * l2_in)
            wtd = float(np.real(g.integrate((np.abs(g.x) + 1.0) ** (-3.0 - delta)
                                            * np.abs(u) ** 2)))
            rhs2 = 0.5 * l2_in + 0.5 * grad
            lhs2 = rhs2 - (2.0 + delta) / 12.0 * wtd
            worst1 = min(worst1, lhs1)
            worst2 = min(worst2, lhs2)
    return {"energy_margin": worst1, "weighted_margin": worst2,
            "holds": bool(worst1 > -1e-9 and worst2 > -1e-9)}
