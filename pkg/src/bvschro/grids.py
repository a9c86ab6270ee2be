"""Panelized Chebyshev grids: spectral interpolation, differentiation,
prefix integration and quadrature on a partition of an interval.

Every panel carries the same Chebyshev-Lobatto nodes mapped affinely from
[-1, 1]; transforms are small dense matrices cached per node count.
Functions are stored as (n_panels, n_nodes) arrays; panel edges may carry
distinct left/right limits because edge nodes are duplicated between panels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.polynomial.chebyshev as npc


@lru_cache(maxsize=None)
def cheb_tools(n: int):
    """Cached transform matrices for n Chebyshev-Lobatto nodes on [-1, 1]."""
    if n < 4:
        raise ValueError("need at least 4 nodes per panel")
    k = np.arange(n)
    t = -np.cos(np.pi * k / (n - 1))
    t[0], t[-1] = -1.0, 1.0
    V = npc.chebvander(t, n - 1)                      # coeffs -> values
    C = np.linalg.inv(V)                              # values -> coeffs
    D_modal = np.zeros((n, n))
    A_modal = np.zeros((n + 1, n))
    I_modal = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        d = npc.chebder(e)
        D_modal[: len(d), j] = d
        a = npc.chebint(e)
        A_modal[: len(a), j] = a
        I_modal[j] = 0.0 if j % 2 else 2.0 / (1.0 - j * j)
    D1 = V @ D_modal @ C                              # values -> d/dt values
    V1 = npc.chebvander(t, n)
    P = V1 @ A_modal @ C                              # values -> antiderivative values
    P = P - P[0:1, :]                                 # F(-1) = 0
    wq = I_modal @ C                                  # quadrature weights on values
    return {"t": t, "V": V, "C": C, "D1": D1, "P": P, "wq": wq}


@dataclass
class PanelGrid:
    """Partition of [edges[0], edges[-1]] into spectral panels."""

    edges: np.ndarray
    n: int

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if not np.all(np.diff(self.edges) > 0):
            raise ValueError("panel edges must be strictly increasing")
        tools = cheb_tools(self.n)
        self.t = tools["t"]
        self._C = tools["C"]
        self._D1 = tools["D1"]
        self._P = tools["P"]
        self._wq = tools["wq"]
        self.mid = 0.5 * (self.edges[:-1] + self.edges[1:])
        self.half = 0.5 * np.diff(self.edges)
        self.x = self.mid[:, None] + self.half[:, None] * self.t[None, :]
        self.n_panels = len(self.half)
        # edge nodes nudged one ulp into the panel: callables with jumps at
        # panel edges then return the correct one-sided limits
        self.x_eval = self.x.copy()
        self.x_eval[:, 0] = np.nextafter(self.x[:, 0], np.inf)
        self.x_eval[:, -1] = np.nextafter(self.x[:, -1], -np.inf)

    @property
    def x_min(self):
        return self.edges[0]

    @property
    def x_max(self):
        return self.edges[-1]

    def sample(self, fn):
        """Evaluate a callable on all nodes -> (P, n) array (one-sided at edges)."""
        vals = fn(self.x_eval.ravel())
        return np.asarray(vals).reshape(self.x.shape)

    def coeffs(self, vals):
        return vals @ self._C.T

    def values_from_coeffs(self, coeffs):
        tools = cheb_tools(self.n)
        return coeffs @ tools["V"].T

    def diff(self, vals):
        """d/dx of the panel interpolants, sampled on the nodes."""
        return (vals @ self._D1.T) / self.half[:, None]

    def integrate(self, vals):
        """Integral over the whole grid of the panel interpolants."""
        return np.sum((vals @ self._wq) * self.half)

    def panel_integrals(self, vals):
        return (vals @ self._wq) * self.half

    def prefix(self, vals):
        """Cumulative integral from x_min, sampled on all nodes (continuous)."""
        per = (vals @ self._P.T) * self.half[:, None]
        offsets = np.concatenate(([0.0], np.cumsum(per[:, -1])))[:-1]
        return per + offsets[:, None].astype(per.dtype)

    def interp(self, vals, xq):
        """Evaluate the panel interpolants at arbitrary points xq."""
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        out = np.empty(xq.shape, dtype=np.asarray(vals).dtype)
        idx = np.clip(np.searchsorted(self.edges, xq, side="right") - 1, 0, self.n_panels - 1)
        cfs = self.coeffs(vals)
        for p in np.unique(idx):
            m = idx == p
            tq = (xq[m] - self.mid[p]) / self.half[p]
            out[m] = npc.chebval(tq, cfs[p])
        return out

    def interp_defect(self, vals, fn, oversample=2):
        """Max |interpolant - fn| on interior check nodes (a-posteriori defect).

        Check points avoid panel edges, where one-sided limits of piecewise
        data would be compared against averaged values.
        """
        m = self.n + 7 * oversample
        k = np.arange(m)
        tg = -np.cos(np.pi * (k + 0.5) / m)
        xf = self.mid[:, None] + self.half[:, None] * tg[None, :]
        exact = np.asarray(fn(xf.ravel()), dtype=complex).reshape(xf.shape)
        approx = np.empty(exact.shape, dtype=complex)
        cfs = self.coeffs(np.asarray(vals, dtype=complex))
        for p in range(self.n_panels):
            approx[p] = npc.chebval(tg, cfs[p])
        return float(np.max(np.abs(approx - exact)))

    def left_edge_values(self, vals):
        return vals[:, 0]

    def right_edge_values(self, vals):
        return vals[:, -1]


def build_panel_grid(required_edges, x_min, x_max, max_width=1.0, n=20) -> PanelGrid:
    """Panelize [x_min, x_max] honoring required edges and per-region widths.

    max_width may be a scalar or a callable (a, b) -> width giving the local
    resolution budget for the region between consecutive required edges.
    """
    req = np.asarray(sorted({float(x_min), float(x_max),
                             *(float(e) for e in required_edges
                               if x_min < e < x_max)}))
    edges = [req[0]]
    for a, b in zip(req[:-1], req[1:]):
        w = max_width(a, b) if callable(max_width) else max_width
        k = max(1, int(np.ceil((b - a) / max(w, 1e-12))))
        edges.extend(np.linspace(a, b, k + 1)[1:].tolist())
    return PanelGrid(np.asarray(edges), n)
