"""Spectral analysis of the Laplace-domain inverse Green matrix.

    G̃⁻¹(s, g) = s² + V - 2 g² η̃'(s)

On the imaginary axis inside a gap this is real symmetric.  Its derivative in
y is ``-2y - 2g² ∫ I'(ω) 2yω/(ω² - y²)² dω``, negative semidefinite on every
gap, so each sorted eigenvalue is monotone decreasing there and has at most
one zero per gap.  Localized modes are located by bracketing the sorted
eigenvalues and labelled by their overlap with the eigenvectors of V.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh as gen_eigh
from scipy.optimize import brentq, linear_sum_assignment

from .errors import (
    RootBracketFailure,
    TrackingAmbiguity,
    UnstableBeforeCritical,
    UnstableModel,
)
from .kernels import KernelEvaluator

_CLUSTER_TOL = 1e-9
_MIN_OVERLAP = 0.9
_FAIL_OVERLAP = 0.5
_MAX_REFINE = 12


# -- matrices ---------------------------------------------------------------
def inverse_green_imag(model, y, g=None, evaluator=None):
    """G̃⁻¹(iy, g) for y in a gap (scalar or array of y)."""
    g = model.g if g is None else g
    ev = evaluator or KernelEvaluator(model)
    y = np.asarray(y, dtype=float)
    eta = ev.imag_axis_prime(y) if model.reservoirs else 0.0
    eye = np.eye(model.n)
    return model.v_matrix - (y**2)[..., None, None] * eye - 2.0 * g**2 * eta


def inverse_green_real(model, x, g=None, evaluator=None):
    """G̃⁻¹(x, g) for real x ≥ 0."""
    g = model.g if g is None else g
    ev = evaluator or KernelEvaluator(model)
    x = np.asarray(x, dtype=float)
    eta = ev.real_axis_prime(x) if model.reservoirs else 0.0
    eye = np.eye(model.n)
    return model.v_matrix + (x**2)[..., None, None] * eye - 2.0 * g**2 * eta


def _sign_fix(vecs):
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


# -- eigencurve tracking ----------------------------------------------------
def _clusters(vals, scale):
    groups, cur = [], [0]
    for i in range(1, len(vals)):
        if vals[i] - vals[i - 1] <= _CLUSTER_TOL * scale:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    return groups


def _match(prev_vecs, vals, vecs):
    """Order (vals, vecs) to continue the curves carried by ``prev_vecs``.

    Returns the reordered pair and the minimum matched overlap.  Nearly
    degenerate eigenvalues are matched as a subspace and rotated onto the
    previous vectors (orthogonal Procrustes).
    """
    n = len(vals)
    scale = max(1.0, np.max(np.abs(vals)))
    vecs = vecs.copy()
    for grp in _clusters(vals, scale):
        if len(grp) < 2:
            continue
        sub = vecs[:, grp]
        weight = np.sum((sub.T @ prev_vecs) ** 2, axis=0)
        chosen = np.sort(np.argsort(weight)[::-1][: len(grp)])
        u, _, wt = np.linalg.svd(sub.T @ prev_vecs[:, chosen])
        vecs[:, grp] = sub @ (u @ wt)
    overlap = np.abs(prev_vecs.T @ vecs)
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(n, dtype=int)
    perm[rows] = cols
    new_vecs = vecs[:, perm]
    signs = np.sign(np.sum(new_vecs * prev_vecs, axis=0))
    signs[signs == 0] = 1.0
    return vals[perm], new_vecs * signs, float(np.min(overlap[rows, cols]))


def track_eigencurves(matrix_fn, params, reference_vectors=None):
    """Track eigenpairs of ``matrix_fn(p)`` along ``params`` by continuity.

    The grid is bisected wherever adjacent eigenvectors overlap by less than
    0.9; after 12 levels an overlap below 0.5 raises TrackingAmbiguity.
    Returns ``(params, values, vectors, min_overlap)`` on the refined grid.
    """
    params = list(np.asarray(params, dtype=float))
    vals, vecs = np.linalg.eigh(matrix_fn(params[0]))
    vecs = _sign_fix(vecs)
    if reference_vectors is not None:
        vals, vecs, _ = _match(np.asarray(reference_vectors, dtype=float), vals, vecs)
    out_p, out_v, out_u = [params[0]], [vals], [vecs]
    worst = 1.0

    def step(p0, p1, prev_vecs, depth):
        nonlocal worst
        v1, u1 = np.linalg.eigh(matrix_fn(p1))
        v1, u1, ov = _match(prev_vecs, v1, u1)
        if ov >= _MIN_OVERLAP:
            worst = min(worst, ov)
            return [(p1, v1, u1)]
        if depth >= _MAX_REFINE:
            if ov < _FAIL_OVERLAP:
                raise TrackingAmbiguity(
                    f"eigenvector overlap {ov:.3f} between {p0} and {p1} after "
                    f"{_MAX_REFINE} refinements"
                )
            worst = min(worst, ov)
            return [(p1, v1, u1)]
        mid = 0.5 * (p0 + p1)
        left = step(p0, mid, prev_vecs, depth + 1)
        right = step(mid, p1, left[-1][2], depth + 1)
        return left + right

    for p0, p1 in zip(params[:-1], params[1:]):
        for p, v, u in step(p0, p1, out_u[-1], 0):
            out_p.append(p)
            out_v.append(v)
            out_u.append(u)
    return np.array(out_p), np.array(out_v), np.array(out_u), worst


@dataclass
class EigencurveSet:
    y: np.ndarray
    values: np.ndarray  # (M, N) tracked eigenvalues, column k = curve k
    vectors: np.ndarray  # (M, N, N)
    gap: tuple
    g: float
    min_overlap: float
    labels: np.ndarray  # bare-mode label of each tracked curve

    def monotone_decreasing(self, rtol=1e-12):
        """Per-curve flag: λ_k(iy) non-increasing along the grid."""
        d = np.diff(self.values, axis=0)
        tol = rtol * np.maximum(1.0, np.abs(self.values[1:]))
        return np.all(d <= tol, axis=0)

    def reconstruction_error(self):
        return self._recon


def _gap_grid(model, gap, spec):
    lo, hi = gap
    if not np.isfinite(hi):
        hi = max(2.0 * lo, 2.0 * float(np.max(model.effective_frequencies)), lo + 1.0)
    if np.ndim(spec) == 0:
        m = int(spec)
        # open interval: stay off the edges by a small relative margin
        eps = 1e-9 * max(hi, 1.0)
        return np.linspace(lo + eps, hi - eps, m)
    return np.asarray(spec, dtype=float)


def eigencurves(model, g=None, gap=None, grid_spec=200):
    """Eigenvalue curves λ_k(iy, g) over a gap, tracked from the low end."""
    g = model.g if g is None else g
    gap = model.gaps()[0] if gap is None else tuple(gap)
    ev = KernelEvaluator(model)
    y = _gap_grid(model, gap, grid_spec)

    def mat(yy):
        return inverse_green_imag(model, yy, g, ev)

    ys, vals, vecs, worst = track_eigencurves(mat, y, reference_vectors=model.eigenvectors)
    recon = max(
        np.max(np.abs(u @ np.diag(v) @ u.T - mat(yy))) / max(1.0, np.max(np.abs(v)))
        for yy, v, u in zip(ys[:: max(1, len(ys) // 20)], vals[:: max(1, len(ys) // 20)],
                            vecs[:: max(1, len(ys) // 20)])
    )
    out = EigencurveSet(ys, vals, vecs, gap, g, worst, np.arange(model.n))
    out._recon = recon
    return out


# -- localized modes --------------------------------------------------------
@dataclass
class LocalizedMode:
    index: int
    frequency: float
    gamma: float
    projector: np.ndarray
    gap: tuple
    vector: np.ndarray = field(repr=False)
    slope: float = field(default=np.nan, repr=False)  # dλ/dy at the root

    @property
    def residue(self):
        """Residue of G̃(s) at s = iω_s."""
        return self.gamma * self.projector / (2j * self.frequency)

    def to_dict(self):
        return {
            "index": int(self.index),
            "frequency": float(self.frequency),
            "gamma": float(self.gamma),
            "projector": self.projector.tolist(),
            "gap": [float(self.gap[0]), float(self.gap[1])],
        }


def _sorted_eig(model, y, g, ev, q):
    return np.linalg.eigvalsh(inverse_green_imag(model, y, g, ev))[q]


def _end_point(model, y_end, y_inner, g, ev, q, want_sign):
    """Bracket end near a gap boundary.

    Uses the edge itself when the kernel is finite there; otherwise steps
    towards the interior until the sorted eigenvalue is finite, preferring a
    point with the requested sign.  Returns ``(y, value)``.
    """
    m = inverse_green_imag(model, y_end, g, ev)
    if np.all(np.isfinite(m)):
        return y_end, np.linalg.eigvalsh(m)[q]
    d = y_end - y_inner
    y, val = y_inner, _sorted_eig(model, y_inner, g, ev, q)
    for k in range(1, 50):
        yk = y_end - d * 2.0**-k
        vk = _sorted_eig(model, yk, g, ev, q)
        if not np.isfinite(vk):
            break
        y, val = yk, vk
        if np.sign(vk) == want_sign:
            break
    return y, val


def _hf_slope(model, y, g, ev, vecs):
    """dλ/dy at y for the eigenvectors ``vecs`` (Hellmann–Feynman)."""
    d = -2.0 * y * np.eye(model.n)
    if model.reservoirs and g > 0:
        d = d - 2.0 * g**2 * ev.imag_axis_derivative_prime(y)
    sub = vecs.T @ d @ vecs
    return sub


def find_localized_modes(model, g=None, xtol_scale=1e-12):
    """All localized modes at coupling g (roots of λ_k(iy, g) in the gaps)."""
    g = model.g if g is None else g
    rep = stability_scan(model, g)
    if not rep.stable:
        raise UnstableModel(
            f"model unstable at g={g}: min λ(0,g) = {rep.min_eigenvalue:.6g}",
            rep.min_eigenvalue,
        )
    ev = KernelEvaluator(model)
    n = model.n
    omax = float(np.max(model.effective_frequencies))
    modes = []
    for gap in model.gaps():
        lo, hi = gap
        scale = hi if np.isfinite(hi) else max(lo, omax, 1.0)
        xtol = xtol_scale * scale
        if not np.isfinite(hi):
            hi_eval = max(2.0 * lo, 2.0 * omax, lo + 1.0)
            while np.linalg.eigvalsh(inverse_green_imag(model, hi_eval, g, ev))[-1] >= 0:
                hi_eval *= 2.0
        else:
            hi_eval = hi
        roots = []
        for q in range(n):
            mid = 0.5 * (lo + hi_eval)
            if lo > 0:
                a, a_val = _end_point(model, lo, mid, g, ev, q, 1.0)
            else:
                a, a_val = 0.0, rep.eigenvalues[q]
            b, b_val = _end_point(model, hi_eval, mid, g, ev, q, -1.0)
            if not (a_val > 0 and b_val < 0):
                continue
            y0 = brentq(lambda yy: _sorted_eig(model, yy, g, ev, q), a, b,
                        xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
            roots.append((q, y0))
        if not roots:
            continue
        # group coincident roots (degenerate localized modes)
        roots.sort(key=lambda r: r[1])
        groups, cur = [], [roots[0]]
        for r in roots[1:]:
            if abs(r[1] - cur[-1][1]) <= 1e3 * xtol:
                cur.append(r)
            else:
                groups.append(cur)
                cur = [r]
        groups.append(cur)
        gap_modes = []
        for grp in groups:
            y0 = float(np.mean([r[1] for r in grp]))
            vals, vecs = np.linalg.eigh(inverse_green_imag(model, y0, g, ev))
            null = vecs[:, [r[0] for r in grp]]
            sub = _hf_slope(model, y0, g, ev, null)
            slopes, rot = np.linalg.eigh(0.5 * (sub + sub.T))
            null = _sign_fix(null @ rot)
            for j in range(len(grp)):
                u = null[:, j]
                gamma = 2.0 * y0 / abs(slopes[j])
                gap_modes.append(LocalizedMode(-1, y0, gamma, np.outer(u, u), gap, u, slopes[j]))
        # labels: maximal overlap with the bare eigenvectors of V
        ov = np.abs(np.array([m.vector for m in gap_modes]) @ model.eigenvectors) ** 2
        rows, cols = linear_sum_assignment(-ov)
        for r, c in zip(rows, cols):
            gap_modes[r].index = int(c)
        modes.extend(gap_modes)
    return modes


def mode_existence(model, g, k, gap):
    """True when a localized mode labelled k sits in ``gap`` at coupling g."""
    gap = tuple(gap)
    return any(m.index == k and tuple(m.gap) == gap for m in find_localized_modes(model, g))


# -- stability --------------------------------------------------------------
@dataclass
class StabilityReport:
    stable: bool
    min_eigenvalue: float
    eigenvalues: np.ndarray
    g_unstable: float | None = None

    def to_dict(self):
        return {
            "stable": bool(self.stable),
            "min_eigenvalue": float(self.min_eigenvalue),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "g_unstable": None if self.g_unstable is None else float(self.g_unstable),
        }


def instability_threshold(model):
    """Smallest g with a vanishing eigenvalue of V - 2g² η̃'(0).

    η̃'(0) = ∫ I'(ω)/ω dω is PSD, so λ_k(0, g) decreases in g and the
    threshold solves the generalized problem η̃'(0) u = μ V u:
    g_unstable² = 1 / (2 μ_max).  Returns inf when no bath acts.
    """
    if not model.reservoirs:
        return np.inf
    e0 = KernelEvaluator(model).real_axis_prime(0.0)
    mu = gen_eigh(e0, model.v_matrix, eigvals_only=True)[-1]
    if mu <= 0:
        return np.inf
    return float(np.sqrt(1.0 / (2.0 * mu)))


def stability_scan(model, g=None, threshold=False):
    g = model.g if g is None else g
    vals = np.linalg.eigvalsh(inverse_green_real(model, 0.0, g))
    return StabilityReport(
        stable=bool(vals[0] > 0),
        min_eigenvalue=float(vals[0]),
        eigenvalues=vals,
        g_unstable=instability_threshold(model) if threshold else None,
    )


def growth_rates(model, g=None, return_vectors=False):
    """Positive real roots x* of λ_k(x, g) = 0 (exponential growth rates).

    λ(x, g) increases in x ≥ 0, so every negative eigenvalue at x = 0 gives
    exactly one root.  Rates are returned in decreasing order, optionally
    with the null vectors of G̃⁻¹(x*) as columns.
    """
    g = model.g if g is None else g
    ev = KernelEvaluator(model)
    lam0 = np.linalg.eigvalsh(inverse_green_real(model, 0.0, g, ev))
    rates, vecs = [], []
    for q in np.flatnonzero(lam0 < 0):
        f = lambda x: np.linalg.eigvalsh(inverse_green_real(model, x, g, ev))[q]
        b = 1.0
        while f(b) <= 0:
            b *= 2.0
        x = brentq(f, 0.0, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        rates.append(x)
        vecs.append(np.linalg.eigh(inverse_green_real(model, x, g, ev))[1][:, q])
    order = np.argsort(rates)[::-1]
    rates = np.array(rates)[order] if rates else np.zeros(0)
    if return_vectors:
        vecs = np.array(vecs)[order].T if vecs else np.zeros((model.n, 0))
        return rates, vecs
    return rates


# -- critical couplings -----------------------------------------------------
@dataclass
class CriticalCoupling:
    g: float
    k: int
    gap: tuple
    edge: float | None
    flag: str = "root"  # "root", "in_gap", "at_edge", "edge_divergence"

    def __float__(self):
        return float(self.g)

    def to_dict(self):
        return {"g": float(self.g), "k": int(self.k), "edge": self.edge,
                "gap": [float(self.gap[0]), float(self.gap[1])], "flag": self.flag}


def _locate_gap(model, gap):
    gaps = model.gaps()
    if gap is None:
        return gaps[0]
    if np.ndim(gap) == 0:
        return gaps[int(gap)]
    return tuple(gap)


def critical_coupling(model, k, gap=None, g_max=None, rtol=1e-8):
    """Critical coupling g_ck of curve k for the given gap (default: lowest).

    The curve is followed in g at the gap edge nearest ω_0k; the mode exists
    once λ_k(i·edge, g) has changed sign.  Returns a CriticalCoupling whose
    ``g`` is 0 (with a flag) when ω_0k already lies in the gap or the kernel
    diverges at the edge.
    """
    gap = _locate_gap(model, gap)
    lo, hi = gap
    w0 = float(model.effective_frequencies[k])
    if lo < w0 < hi:
        return CriticalCoupling(0.0, k, gap, None, "in_gap")
    if w0 >= hi:
        edge, sign0 = hi, 1.0  # exists once λ(i·hi) < 0
    else:
        edge, sign0 = lo, -1.0  # exists once λ(i·lo) > 0
    if w0 == edge:
        return CriticalCoupling(0.0, k, gap, edge, "at_edge")
    ev = KernelEvaluator(model)
    e_mat = ev.imag_axis_prime(edge)
    if not np.all(np.isfinite(e_mat)):
        return CriticalCoupling(0.0, k, gap, edge, "edge_divergence")
    base = model.v_matrix - edge**2 * np.eye(model.n)

    def mat(g):
        return base - 2.0 * g**2 * e_mat

    g_uns = instability_threshold(model)
    if g_max is None:
        g_max = g_uns if np.isfinite(g_uns) else None
    if g_max is None:
        # no instability bound: λ is quadratic in g, bound by the largest
        # g at which any eigenvalue of 2g²E can move ω_0k² - edge²
        spread = np.max(np.abs(np.linalg.eigvalsh(e_mat)))
        g_max = np.sqrt(abs(w0**2 - edge**2) / (2 * spread)) * 4.0 + 1.0 if spread > 0 else 1.0
    grid = np.linspace(0.0, g_max, 65)
    gs, vals, vecs, _ = track_eigencurves(mat, grid, reference_vectors=model.eigenvectors)
    curve = vals[:, k] * sign0
    hit = np.flatnonzero(curve <= 0)
    if hit.size == 0:
        if np.isfinite(g_uns) and g_max >= g_uns:
            raise UnstableBeforeCritical(
                f"instability at g={g_uns:.6g} precedes the critical coupling of mode {k}",
                g_uns,
            )
        raise RootBracketFailure(f"no sign change of curve {k} for g <= {g_max}")
    j = hit[0]
    a, b = gs[j - 1], gs[j]
    ref = vecs[j - 1][:, k]

    def f(g):
        w, u = np.linalg.eigh(mat(g))
        return w[np.argmax(np.abs(u.T @ ref))]

    gc = brentq(f, a, b, xtol=1e-15, rtol=rtol * 1e-2, maxiter=500)
    if np.isfinite(g_uns) and g_uns < gc:
        raise UnstableBeforeCritical(
            f"instability at g={g_uns:.6g} precedes g_c={gc:.6g} for mode {k}", g_uns
        )
    return CriticalCoupling(float(gc), k, gap, edge, "root")


def critical_coupling_bisection(model, k, gap=None, g_hi=None, tol=1e-9):
    """Critical coupling by bisection on the existence of the localized mode."""
    gap = _locate_gap(model, gap)
    if mode_existence(model, 0.0, k, gap):
        return 0.0
    if g_hi is None:
        g_hi = instability_threshold(model) * (1 - 1e-9)
    if not mode_existence(model, g_hi, k, gap):
        raise RootBracketFailure(f"mode {k} absent up to g={g_hi}")
    a, b = 0.0, g_hi
    while b - a > tol * max(b, 1e-300):
        m = 0.5 * (a + b)
        if mode_existence(model, m, k, gap):
            b = m
        else:
            a = m
    return 0.5 * (a + b)


# -- monotonicity -----------------------------------------------------------
def monotonicity_violations(model, g=None, n_points=200, rtol=1e-10):
    """Check the three monotonicity properties on dense grids.

    Returns a list of human-readable violations (empty when all hold):
    λ_k(iy, g) decreasing in y on every bounded gap, decreasing in g at fixed
    y, and λ_k(x, g) increasing in x ≥ 0.  Sorted eigenvalues are used; they
    inherit the monotonicity of the Loewner-ordered matrix family.
    """
    g = model.g if g is None else g
    ev = KernelEvaluator(model)
    out = []

    def check(vals, increasing, what):
        d = np.diff(vals, axis=0) * (1 if increasing else -1)
        tol = rtol * np.maximum(1.0, np.abs(vals[1:]))
        bad = np.argwhere(d < -tol)
        for i, q in bad[:5]:
            out.append(f"{what}: eigenvalue {q} at step {i} changes by {d[i, q] * (1 if increasing else -1):.3e}")

    for gap in model.gaps():
        y = _gap_grid(model, gap, n_points)
        mats = inverse_green_imag(model, y, g, ev)
        vals = np.linalg.eigvalsh(mats)
        check(vals, False, f"lambda(iy) in y on gap {gap}")
        gs = np.linspace(0.0, max(g, 1e-3) * 2.0, 20)
        mid = y[len(y) // 2]
        e_mat = ev.imag_axis_prime(mid)
        gv = np.linalg.eigvalsh(
            model.v_matrix[None] - mid**2 * np.eye(model.n) - 2.0 * (gs**2)[:, None, None] * e_mat
        )
        if gap[0] == 0.0:  # η̃' is PSD only below all bands
            check(gv, False, f"lambda(iy) in g at y={mid:.4g}")
    x = np.linspace(0.0, 4.0 * max(model.band_gap_edge if np.isfinite(model.band_gap_edge) else 1.0,
                                   float(np.max(model.effective_frequencies))), n_points)
    vals = np.linalg.eigvalsh(inverse_green_real(model, x, g, ev))
    check(vals, True, "lambda(x) in x")
    return out


# -- phase diagram ----------------------------------------------------------
@dataclass
class PhaseDiagram:
    omega0: np.ndarray
    couplings: np.ndarray
    stable: np.ndarray  # (n_w, n_g) bool
    min_eigenvalue: np.ndarray
    mode_counts: np.ndarray  # (n_w, n_g, n_gaps); -1 where unstable/failed
    frequencies: list  # rows of (i, j, [ω_s ...])
    gaps: list
    critical_lines: dict  # (k, gap index) -> array over omega0 (nan if none)
    stability_boundary: np.ndarray
    errors: dict


def _phase_point(args):
    family, w0, couplings = args
    base = family(w0)
    gaps = base.gaps()
    row = []
    for g in couplings:
        model = base.with_coupling(g)
        rep = stability_scan(model)
        counts = [-1] * len(gaps)
        freqs, err = [], None
        if rep.stable:
            try:
                modes = find_localized_modes(model)
                counts = [sum(1 for m in modes if tuple(m.gap) == gp) for gp in gaps]
                freqs = sorted(m.frequency for m in modes)
            except Exception as exc:  # recorded in-row, sweep continues
                err = f"{type(exc).__name__}: {exc}"
        row.append((rep.stable, rep.min_eigenvalue, counts, freqs, err))
    g_uns = instability_threshold(base)
    lines = {}
    for gi, gap in enumerate(gaps):
        for k in range(base.n):
            try:
                lines[(k, gi)] = critical_coupling(base, k, gap).g
            except Exception:
                lines[(k, gi)] = np.nan
    return row, g_uns, lines, len(gaps)


def phase_diagram(model_family, omega0_values, couplings, workers=None):
    """Mode counts and stability over an (ω₀, g) grid.

    ``model_family(ω₀)`` must return a SystemModel (its own coupling is
    ignored) and be picklable when ``workers`` > 1.  Critical lines are
    computed directly per ω₀ rather than contoured from the grid.
    """
    w = np.asarray(omega0_values, dtype=float)
    gs = np.asarray(couplings, dtype=float)
    tasks = [(model_family, float(w0), gs) for w0 in w]
    if workers is None:
        workers = min(len(tasks), os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_phase_point, tasks))
    else:
        results = [_phase_point(t) for t in tasks]
    n_gaps = max(r[3] for r in results)
    stable = np.zeros((len(w), len(gs)), dtype=bool)
    mineig = np.zeros((len(w), len(gs)))
    counts = -np.ones((len(w), len(gs), n_gaps), dtype=int)
    freqs, errors, lines = [], {}, {}
    boundary = np.empty(len(w))
    for i, (row, g_uns, crit, ng) in enumerate(results):
        boundary[i] = g_uns
        for j, (st, me, cnt, fr, err) in enumerate(row):
            stable[i, j] = st
            mineig[i, j] = me
            counts[i, j, :ng] = cnt
            freqs.append((i, j, fr))
            if err:
                errors[(i, j)] = err
        for key, val in crit.items():
            lines.setdefault(key, np.full(len(w), np.nan))[i] = val
    gaps = family_gaps = model_family(float(w[0])).gaps() if len(w) else []
    del family_gaps
    return PhaseDiagram(w, gs, stable, mineig, counts, freqs, gaps, lines, boundary, errors)
