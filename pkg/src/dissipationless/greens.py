"""Real-time Green function from the poles and branch cuts of G̃(s).

    G(t) = Σ_k Ω_k (γ_k/ω_sk) sin(ω_sk t)  +  I(t),
    I(t) = -(2/π) ∫_bands B(y) sin(yt) dy,    B(y) = Im G̃(0⁺ + iy).

The pole terms come from the localized modes; the cut term is the transient.
Its derivatives are the cos- and y·sin-weighted integrals of the same B, so
Ġ and G̈ never involve numerical differencing.

B(y) vanishes at a band edge like the density itself.  Pieces with clean
√-edges use the trapezoid rule in θ (y = c - R cos θ), which converges
exponentially once the node count resolves sin(yt).  Other pieces (general
exponents, interior profile edges) use a graded trapezoid rule with
high-order algebraic convergence.  The node count is doubled until the sum rule
Ġ(0) = 1 and a set of probe times are stable to the requested tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .analysis import find_localized_modes, stability_scan
from .errors import QuadratureFailure, UnstableModel
from .kernels import KernelEvaluator
from .profiles import rule_size

_MAX_NODES = 1 << 17
_BLOCK_ELEMENTS = 1 << 22  # time×node entries per trig table block


@dataclass
class PropagatorBundle:
    t: np.ndarray
    G: np.ndarray
    Gdot: np.ndarray
    Gddot: np.ndarray | None  # None when computed with second=False
    pole: np.ndarray = field(repr=False)  # pole part of G
    transient: np.ndarray = field(repr=False)  # I(t)
    modes: list = field(default_factory=list)
    nodes: int = 0
    sum_rule_error: float = 0.0

    @property
    def n(self):
        return self.G.shape[-1]

    @property
    def phi(self):
        """Transition matrices Φ(t) = [[Ġ, G], [G̈, Ġ]], shape (M, 2N, 2N)."""
        top = np.concatenate([self.Gdot, self.G], axis=-1)
        bottom = np.concatenate([self.Gddot, self.Gdot], axis=-1)
        return np.concatenate([top, bottom], axis=-2)

    def index_of(self, t, atol=0.0):
        idx = np.flatnonzero(np.abs(self.t - t) <= atol)
        return int(idx[0]) if idx.size else None


@dataclass
class CutRule:
    """Quadrature nodes on the bands with B(y)·weight precomputed."""

    y: np.ndarray
    bw: np.ndarray  # (n, N, N): weight_j · B(y_j)

    def integrate(self, t, kind):
        """-(2/π)∫B sin, -(2/π)∫B y cos or (2/π)∫B y² sin at times t."""
        return self.integrate_all(t, kinds=(kind,))[0]

    def integrate_all(self, t, kinds=(0, 1, 2)):
        """The requested integrals of ``integrate`` sharing one sin/cos table."""
        t = np.asarray(t, dtype=float).ravel()
        n = self.bw.shape[-1]
        outs = [np.zeros((t.size, n, n)) for _ in kinds]
        if len(self.y) == 0:
            return outs
        flat = (2.0 / np.pi) * self.bw.reshape(len(self.y), -1)
        flat_y = flat * self.y[:, None]
        flat_yy = flat_y * self.y[:, None]
        rows = max(1, _BLOCK_ELEMENTS // len(self.y))
        for s in range(0, t.size, rows):
            tt = t[s : s + rows, None] * self.y[None, :]
            sin = np.sin(tt) if (0 in kinds or 2 in kinds) else None
            cos = np.cos(tt) if 1 in kinds else None
            for out, kind in zip(outs, kinds):
                if kind == 0:
                    val = -(sin @ flat)
                elif kind == 1:
                    val = -(cos @ flat_y)
                else:
                    val = sin @ flat_yy
                out[s : s + rows] = val.reshape(-1, n, n)
        return outs


    def integrate_progression(self, offsets, step, count, block=None):
        """Kinds 0 and 1 at t = k·step + offsets[a] (k-major order).

        Phases e^{iyt} are advanced by complex rotation instead of trig calls;
        the rotation is applied once per block of ``block`` steps, so rounding
        drift stays at the level of count/block products.
        """
        offsets = np.asarray(offsets, dtype=float)
        n = self.bw.shape[-1]
        p = offsets.size
        out0 = np.zeros((count * p, n, n))
        out1 = np.zeros_like(out0)
        if len(self.y) == 0 or count == 0:
            return out0, out1
        flat = (2.0 / np.pi) * self.bw.reshape(len(self.y), -1)
        flat_y = flat * self.y[:, None]
        if block is None:
            block = max(1, _BLOCK_ELEMENTS // (p * len(self.y)))
        kb = np.arange(min(block, count))
        rot = np.exp(1j * np.outer(kb * step, self.y))  # (B, Ny)
        advance = np.exp(1j * self.y * step * len(kb))
        start = np.exp(1j * np.outer(offsets, self.y))  # (p, Ny)
        for k0 in range(0, count, len(kb)):
            m = min(len(kb), count - k0)
            e = (rot[:m, None, :] * start[None, :, :]).reshape(m * p, -1)
            rows = slice(k0 * p, (k0 + m) * p)
            # contiguous copies keep the products on the BLAS path
            out0[rows] = (-(np.ascontiguousarray(e.imag) @ flat)).reshape(-1, n, n)
            out1[rows] = (-(np.ascontiguousarray(e.real) @ flat_y)).reshape(-1, n, n)
            start = start * advance
        return out0, out1


def _band_pieces(model):
    """Merged bands split at every profile edge.

    Each piece is ``(a, b, ea, eb)``.  ``ea``/``eb`` is the common edge
    exponent when the end is an outer band edge where every profile starting
    there shares one exponent, and ``None`` otherwise (interior cut points or
    mixed exponents, where B(y) is a sum of different powers).
    """
    declared = {}
    for prof, _, _ in model.profile_terms:
        for edge, ex in zip((prof.lo, prof.hi), prof.exponents):
            declared.setdefault(edge, set()).add(float(ex))
    pieces = []
    for lo, hi in model.bands:
        cuts = sorted({lo, hi} | {e for e in declared if lo < e < hi})
        for a, b in zip(cuts[:-1], cuts[1:]):
            ea = next(iter(declared[a])) if a == lo and len(declared[a]) == 1 else None
            eb = next(iter(declared[b])) if b == hi and len(declared[b]) == 1 else None
            pieces.append((a, b, ea, eb))
    return pieces


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_MAX_PANELS = 1 << 16


def _piece_map(a, b, ea, eb, declared):
    """Map u ∈ [0, 1] → y on a band piece; returns (y(u), dy/du, max slope).

    Clean √-edges use y = c - R cos(πu), which makes B(y(u))·y'(u) analytic.
    Other pieces use the graded map y = a + L·u^q/(u^q + (1-u)^q): an edge
    behaviour (y-a)^α becomes u^{q(α+1)-1}, smooth enough for Gauss panels.
    """
    length = b - a
    if ea == 0.5 and eb == 0.5:
        c, r = 0.5 * (a + b), 0.5 * length

        def fmap(u):
            return c - r * np.cos(np.pi * u), np.pi * r * np.sin(np.pi * u)

        return fmap, np.pi * r
    # weakest edge behaviour at either end; an interior cut adds a smooth part
    powers = [x for e in (a, b) for x in declared.get(e, ())]
    if ea is None or eb is None:
        powers.append(0.0)
    alpha = max(min(powers), -0.5)
    q = int(min(8, max(2, np.ceil(6.0 / (alpha + 1.0)))))

    def fmap(u):
        uq, vq = u**q, (1.0 - u) ** q
        return (a + length * uq / (uq + vq),
                length * q * (u * (1.0 - u)) ** (q - 1) / (uq + vq) ** 2)

    return fmap, q * length


def _panel_nodes(lo, hi):
    """16-point Gauss nodes on every panel [lo_i, hi_i]: arrays (m, 16)."""
    half = 0.5 * (hi - lo)[:, None]
    return 0.5 * (lo + hi)[:, None] + half * _GL_X, half * _GL_W


def _cut_rule(model, ev, g, n, tol=1e-10):
    """Adaptive Gauss-panel rule on every band piece.

    ``n`` sets the largest admissible panel (width ~ 15·W/n in y for total
    half width W) so sin(yt) is resolved; panels are bisected until the
    whole-panel and two-half estimates of ∫B and ∫B·y agree to ``tol``.
    Accepted panels contribute their whole-panel nodes; the half-panel sums
    only serve as the error estimate.
    """
    declared = {}
    for prof, _, _ in model.profile_terms:
        for edge, ex in zip((prof.lo, prof.hi), prof.exponents):
            declared.setdefault(edge, []).append(float(ex))
    # stay clear of the evaluator's edge guard
    gap = 4.0 * ev.edge_tol * max([1.0] + [hi for _, hi in model.bands])
    pieces = _band_pieces(model)
    width = 15.0 * max(0.5 * (b - a) for a, b, _, _ in pieces) / n
    eye = np.eye(model.n)

    def weighted_b(y, w):
        ok = (w != 0.0)
        out = np.zeros(y.shape + (model.n, model.n))
        if np.any(ok):
            eta = ev.boundary_values_prime(y[ok])
            inv = np.linalg.inv(model.v_matrix - (y[ok] ** 2)[:, None, None] * eye
                                - 2.0 * g**2 * eta)
            bmat = inv.imag
            out[ok] = w[ok, None, None] * 0.5 * (bmat + np.swapaxes(bmat, -1, -2))
        return out

    ys, bws = [], []
    for a, b, ea, eb in pieces:
        fmap, slope = _piece_map(a, b, ea, eb, declared)
        m0 = max(1, int(np.ceil(slope / width)))
        edges = np.linspace(0.0, 1.0, m0 + 1)
        lo, hi = edges[:-1], edges[1:]
        total = 0
        while lo.size:
            total += lo.size
            if total > _MAX_PANELS:
                raise QuadratureFailure(f"cut integral needs more than {_MAX_PANELS} panels")
            mid = 0.5 * (lo + hi)
            u = np.concatenate([_panel_nodes(lo, hi)[0], _panel_nodes(lo, mid)[0],
                                _panel_nodes(mid, hi)[0]], axis=1)
            wu = np.concatenate([_panel_nodes(lo, hi)[1], _panel_nodes(lo, mid)[1],
                                 _panel_nodes(mid, hi)[1]], axis=1)
            y, dy = fmap(u)
            w = wu * dy
            w[(y - a <= gap) | (b - y <= gap)] = 0.0
            bw = weighted_b(y.ravel(), w.ravel()).reshape(y.shape + (model.n, model.n))
            yb = bw * y[..., None, None]
            whole = np.abs(bw[:, :16].sum(1) - bw[:, 16:].sum(1)).max(axis=(1, 2))
            first = np.abs(yb[:, :16].sum(1) - yb[:, 16:].sum(1)).max(axis=(1, 2))
            err = np.maximum(whole, first)
            # narrow panels (resonances) get a fixed share of the budget, and
            # nothing below the rounding level of the panel sum is asked for
            scale = np.abs(bw[:, 16:]).sum(1).max(axis=(1, 2))
            budget = np.maximum(tol * np.maximum(hi - lo, 1e-2), 1e-14 * scale)
            done = (err <= budget) | (hi - lo < 1e-13)
            ys.append(y[done, :16].ravel())
            bws.append(bw[done, :16].reshape(-1, model.n, model.n))
            lo, hi = np.concatenate([lo[~done], mid[~done]]), np.concatenate([mid[~done], hi[~done]])
    keep = [k for k in range(len(ys)) if ys[k].size]
    if not keep:
        return CutRule(np.zeros(0), np.zeros((0, model.n, model.n)))
    y = np.concatenate([ys[k] for k in keep])
    bw = np.concatenate([bws[k] for k in keep])
    order = np.argsort(y, kind="stable")
    nz = np.any(bw[order] != 0.0, axis=(1, 2))
    return CutRule(y[order][nz], bw[order][nz])


def _pole_parts(modes, t, n):
    t = np.asarray(t, dtype=float)
    g0 = np.zeros((t.size, n, n))
    g1 = np.zeros_like(g0)
    g2 = np.zeros_like(g0)
    for m in modes:
        w, amp = m.frequency, m.gamma * m.projector
        s, c = np.sin(w * t), np.cos(w * t)
        g0 += (s / w)[:, None, None] * amp
        g1 += c[:, None, None] * amp
        g2 -= (w * s)[:, None, None] * amp
    return g0, g1, g2


def cut_rule(model, g=None, t_max=100.0, tol=1e-10, modes=None, nodes=None):
    """Adaptively sized CutRule for |t| ≤ t_max.  Returns (rule, sum-rule error)."""
    g = model.g if g is None else g
    n_osc = model.n
    if not model.reservoirs or g == 0.0:
        return CutRule(np.zeros(0), np.zeros((0, n_osc, n_osc))), 0.0
    ev = KernelEvaluator(model)
    if modes is None:
        modes = find_localized_modes(model, g)
    pole_sum = sum((m.gamma * m.projector for m in modes), np.zeros((n_osc, n_osc)))
    eye = np.eye(n_osc)
    if nodes is not None:
        rule = _cut_rule(model, ev, g, nodes, tol)
        err = np.max(np.abs(pole_sum + rule.integrate([0.0], 1)[0] - eye))
        return rule, err
    width = max(0.5 * (b - a) for a, b, _, _ in _band_pieces(model))
    probes = np.array([0.0, 0.25, 0.5, 1.0]) * t_max + np.array([0.0, 0.3, 0.7, 0.0])
    n = rule_size(width, t_max)
    prev = None
    while True:
        rule = _cut_rule(model, ev, g, n, tol)
        err = np.max(np.abs(pole_sum + rule.integrate([0.0], 1)[0] - eye))
        vals = rule.integrate(probes, 0)
        if prev is not None and prev[1] <= tol and np.max(np.abs(vals - prev[2])) <= tol:
            # the refinement certifies the coarser rule
            return prev[0], prev[1]
        if n > _MAX_NODES:
            raise QuadratureFailure(
                f"cut integral not converged with {n} nodes (sum-rule error {err:.2e})"
            )
        prev = (rule, err, vals)
        n = 2 * n + 1


def _prepare(model, g):
    g = model.g if g is None else g
    model = model.with_coupling(g) if g != model.g else model
    rep = stability_scan(model)
    if not rep.stable:
        raise UnstableModel(
            f"model unstable at g={g}: min λ(0,g) = {rep.min_eigenvalue:.6g}",
            rep.min_eigenvalue,
        )
    return model, g


def transient_part(model, g=None, t_grid=(), tol=1e-10):
    model, g = _prepare(model, g)
    t = np.asarray(t_grid, dtype=float)
    t_max = float(np.max(np.abs(t))) if t.size else 0.0
    rule, _ = cut_rule(model, g, t_max, tol)
    return rule.integrate(t, 0)


def green_function(model, g=None, t_grid=(), tol=1e-10, nodes=None, second=True):
    """G, Ġ, G̈ on an arbitrary time grid as a PropagatorBundle.

    With ``second=False`` G̈ is skipped and left as None.
    """
    model, g = _prepare(model, g)
    t = np.asarray(t_grid, dtype=float)
    n = model.n
    modes = find_localized_modes(model, g) if (model.reservoirs and g > 0) else _free_modes(model)
    t_max = float(np.max(np.abs(t))) if t.size else 0.0
    rule, err = cut_rule(model, g, t_max, tol, modes=modes, nodes=nodes)
    p0, p1, p2 = _pole_parts(modes, t, n)
    if second:
        c0, c1, c2 = rule.integrate_all(t)
        g2 = p2 + c2
        g2[t == 0.0] = 0.0  # G̈(0) = -V G(0) + 2(η*G)(0) = 0
    else:
        c0, c1 = rule.integrate_all(t, kinds=(0, 1))
        g2 = None
    return PropagatorBundle(t, p0 + c0, p1 + c1, g2, p0, c0, modes, len(rule.y), err)


def green_on_panels(model, g, offsets, step, count, extra=(), tol=1e-10):
    """G and Ġ at t = k·step + offsets[a] (k = 0..count-1, k-major), then at ``extra``.

    One cut rule serves all times; the progression uses phase rotation.
    """
    model, g = _prepare(model, g)
    offsets = np.asarray(offsets, dtype=float)
    extra = np.asarray(extra, dtype=float)
    prog = (np.arange(count)[:, None] * step + offsets[None, :]).ravel()
    t_all = np.concatenate([prog, extra])
    n = model.n
    modes = find_localized_modes(model, g) if (model.reservoirs and g > 0) else _free_modes(model)
    t_max = float(np.max(np.abs(t_all))) if t_all.size else 0.0
    rule, _ = cut_rule(model, g, t_max, tol, modes=modes)
    p0, p1, _ = _pole_parts(modes, t_all, n)
    c0, c1 = rule.integrate_progression(offsets, step, count)
    e0, e1 = rule.integrate_all(extra, kinds=(0, 1))
    return p0 + np.concatenate([c0, e0]), p1 + np.concatenate([c1, e1])


def _free_modes(model):
    """Without a bath every normal mode of V is an undamped 'localized' mode."""
    from .analysis import LocalizedMode

    out = []
    for k, (w, u) in enumerate(zip(model.effective_frequencies, model.eigenvectors.T)):
        out.append(LocalizedMode(k, float(w), 1.0, np.outer(u, u), (0.0, np.inf), u))
    return out


@dataclass
class LongTimeForm:
    """Pole-only transition matrix; Φ(t) → 0 when ``modes`` is empty."""

    modes: list
    n: int

    @property
    def empty(self):
        return not self.modes

    def green(self, t):
        return _pole_parts(self.modes, np.atleast_1d(t), self.n)

    def __call__(self, t):
        g0, g1, g2 = self.green(t)
        top = np.concatenate([g1, g0], axis=-1)
        bottom = np.concatenate([g2, g1], axis=-1)
        return np.concatenate([top, bottom], axis=-2)


def longtime_transition(model, g=None):
    model, g = _prepare(model, g)
    modes = find_localized_modes(model, g) if (model.reservoirs and g > 0) else _free_modes(model)
    return LongTimeForm(modes, model.n)


def upper_envelope(values):
    """Running maximum taken from the end: max over t' >= t of ``values``."""
    v = np.asarray(values, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def tail_exponent(t, values, t_min=None, resonances=1):
    """Power-law exponent of the upper envelope of ``values``.

    The envelope is fitted in log space by A t^p + Σ_r B_r exp(-Γ_r t).  The
    exponential terms absorb weakly damped in-band resonances, which can
    dominate the transient long before the algebraic band-edge tail does.
    ``resonances=0`` gives a plain log-log line.  Returns ``(p, log A, Γ)``.
    """
    t = np.asarray(t, dtype=float)
    env = upper_envelope(values)
    sel = (t > 0) & (env > 0)
    if t_min is not None:
        sel &= t >= t_min
    if sel.sum() < 3 + 2 * resonances:
        raise ValueError("too few positive samples for a tail fit")
    tt, le = t[sel], np.log(env[sel])
    slope, icpt = np.polyfit(np.log(tt), le, 1)
    if resonances == 0:
        return float(slope), float(icpt), np.zeros(0)
    lt = np.log(tt)

    def resid(p):
        parts = [p[0] + p[1] * lt]
        parts += [p[2 + 2 * r] - np.exp(p[3 + 2 * r]) * tt for r in range(resonances)]
        return np.logaddexp.reduce(np.stack(parts), axis=0) - le

    # start: tail anchored at the last sample, resonances at the first
    p0 = [le[-1] + 1.5 * lt[-1], -1.5]
    for r in range(resonances):
        p0 += [le[0] + r, np.log((r + 1) * 5.0 / (tt[-1] - tt[0]))]
    sol = least_squares(resid, p0)
    return float(sol.x[1]), float(sol.x[0]), np.exp(sol.x[3::2])
