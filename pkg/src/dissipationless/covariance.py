"""Thermal covariance Σ(t) and Gaussian-state propagation.

    σ^(n,m)(t) = ∫₀ᵗ∫₀ᵗ G^(n)(τ₁) ν(τ₁ - τ₂) G^(m)(τ₂)ᵀ dτ₁ dτ₂,
    Σ = [[σ^(0,0), σ^(0,1)], [σ^(1,0), σ^(1,1)]].

The double integral is done with Gauss-Legendre panels of fixed length L.
Stacking 𝒢 = [G; Ġ] at the weighted nodes of panel i into X_i gives

    Σ(KL) = Σ_{i,j<K} X_i Λ_{i-j} X_jᵀ,   Λ_m = [ν(mL + x_a - x_b)]_{ab},

a Gram form with a kernel matrix that is PSD by Bochner's theorem, so Σ is
PSD to rounding.  Σ((K+1)L) - Σ(KL) needs Y_K = Σ_{j<K} Λ_{K-j} X_jᵀ, which
for all K at once is one FFT convolution along the panel index.

A state evolves as mean(t) = Φ(t) mean(0), cov(t) = Φ(t) cov(0) Φ(t)ᵀ + Σ(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import GridMismatch, WindowTooShort
from .greens import _prepare, green_function, green_on_panels
from .kernels import KernelEvaluator
from .model import GaussianState

_PANEL_ORDER = 12


@dataclass
class CovarianceBundle:
    t: np.ndarray
    sigma: np.ndarray  # (M, 2N, 2N)
    panel: float = 0.0

    @property
    def n(self):
        return self.sigma.shape[-1] // 2

    def block(self, a, b):
        """σ^(a,b)(t) as (M, N, N)."""
        n = self.n
        return self.sigma[:, a * n : (a + 1) * n, b * n : (b + 1) * n]

    def index_of(self, t):
        return _index(self.t, t)


def _index(grid, t):
    tol = 1e-12 * max(1.0, abs(t))
    idx = np.flatnonzero(np.abs(grid - t) <= tol)
    if not idx.size:
        raise GridMismatch(f"t={t} is not on the computed grid")
    return int(idx[0])


def _panel_length(t, w_scale, l_max):
    """Largest L ≤ l_max dividing the common spacing of a uniform grid."""
    t = np.asarray(t, dtype=float)
    l_cap = min(l_max, np.pi / w_scale)
    pos = np.sort(t[t > 0])
    if pos.size == 0:
        return l_cap
    d = np.diff(pos) if pos.size > 1 else pos[:1]
    step = d[0]
    atol = 1e-12 * pos[-1]
    # uniform spacing whose first point is a whole number of steps from 0
    uniform = np.allclose(d, step, rtol=1e-9, atol=atol)
    offset = pos[0] / step
    if uniform and abs(offset - np.round(offset)) <= 1e-9 * max(1.0, offset):
        return step / np.ceil(step / l_cap)
    return l_cap


def thermal_covariance(model, g=None, t_grid=(), panel=None, order=_PANEL_ORDER, tol=1e-10):
    """Σ(t) on ``t_grid`` (any nonnegative times)."""
    model, g = _prepare(model, g)
    t = np.asarray(t_grid, dtype=float)
    n = model.n
    out = np.zeros((t.size, 2 * n, 2 * n))
    if t.size == 0 or not model.reservoirs or g == 0.0 or t.max() == 0.0:
        return CovarianceBundle(t, out, 0.0)
    ev = KernelEvaluator(model)
    w_scale = max(max(b for _, b in model.bands), float(np.max(model.effective_frequencies)))
    length = _panel_length(t, w_scale, 4.0) if panel is None else float(panel)
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * length * (x + 1.0)
    w = 0.5 * length * w
    t_max = float(t.max())
    k_tot = int(np.floor(t_max / length * (1 + 1e-12)))
    # times off the panel boundaries need a partial last piece each
    xg, wg = np.polynomial.legendre.leggauss(order)
    partial = {}
    for idx, tt in enumerate(t):
        kk = tt / length
        k = int(np.round(kk))
        if abs(kk - k) <= 1e-9 * max(1.0, kk) and k <= k_tot:
            continue
        k = min(int(np.floor(kk)), k_tot)
        piece = tt - k * length
        partial[idx] = (k, k * length + 0.5 * piece * (xg + 1.0), 0.5 * piece * wg)
    # G, Ġ at every node of the full panels and of the partial pieces, in one pass
    extra = np.concatenate([p[1] for p in partial.values()] + [[t_max]])
    g0, g1 = green_on_panels(model, g, x, length, k_tot, extra, tol=tol)
    calG = np.concatenate([g0[:-1], g1[:-1]], axis=1)  # (nodes, 2N, N)
    full, rest = calG[: k_tot * order], calG[k_tot * order :]
    # X_i: (2N, pN) with weights
    X = (full.reshape(k_tot, order, 2 * n, n) * w[None, :, None, None])
    X = X.transpose(0, 2, 1, 3).reshape(k_tot, 2 * n, order * n)
    # Λ_m for m = 0..K-1: (K, pN, pN)
    offs = x[:, None] - x[None, :]
    lags = np.arange(k_tot)[:, None, None] * length + offs[None]
    nu = ev.noise_kernel(lags.ravel(), g).reshape(k_tot, order, order, n, n)
    lam = nu.transpose(0, 1, 3, 2, 4).reshape(k_tot, order * n, order * n)
    # Y_K = Σ_{j<K} Λ_{K-j} X_jᵀ  via FFT along the panel index
    lam_shift = lam.copy()
    lam_shift[0] = 0.0
    nfft = 2 * k_tot
    lf = np.fft.rfft(lam_shift, nfft, axis=0)
    xf = np.fft.rfft(X.transpose(0, 2, 1), nfft, axis=0)
    Y = np.fft.irfft(lf @ xf, nfft, axis=0)[:k_tot]  # (K, pN, 2N)
    # cumulative Σ at panel boundaries
    incr = X @ lam[0] @ X.transpose(0, 2, 1)
    cross = X @ Y
    incr = incr + cross + cross.transpose(0, 2, 1)
    cum = np.concatenate([np.zeros((1, 2 * n, 2 * n)), np.cumsum(incr, axis=0)])
    for idx, tt in enumerate(t):
        if idx not in partial:
            out[idx] = cum[int(np.round(tt / length))]
    for j, (idx, (k, xp, wp)) in enumerate(partial.items()):
        cg = rest[j * order : (j + 1) * order] * wp[:, None, None]
        out[idx] = cum[k] + _partial(ev, g, X, k, length, xp, cg, x, order)
    out = 0.5 * (out + out.transpose(0, 2, 1))
    return CovarianceBundle(t, out, length)


def _partial(ev, g, X, k, length, xp, cg, x, order):
    """Σ(t) - Σ(kL) for kL < t < (k+1)L from the weighted piece nodes ``cg``."""
    n = cg.shape[-1]
    Xp = cg.transpose(1, 0, 2).reshape(2 * n, order * n)
    self_lag = ev.noise_kernel((xp[:, None] - xp[None, :]).ravel(), g).reshape(order, order, n, n)
    lam0 = self_lag.transpose(0, 2, 1, 3).reshape(order * n, order * n)
    res = Xp @ lam0 @ Xp.T
    if k > 0:
        old = (np.arange(k)[:, None] * length + x[None, :])  # (k, p)
        lags = xp[:, None, None] - old[None]  # (p', k, p)
        nu = ev.noise_kernel(lags.ravel(), g).reshape(order, k, order, n, n)
        # cross = Σ_j Xp Λ(p', j, p) X_jᵀ
        lam_c = nu.transpose(1, 0, 3, 2, 4).reshape(k, order * n, order * n)
        cross = Xp @ np.matmul(lam_c, X[:k].transpose(0, 2, 1)).sum(axis=0)
        res = res + cross + cross.T
    return res


# -- state propagation ------------------------------------------------------
def evolve_state(state0, bundle, cov, t):
    """Gaussian state at time t from the propagator and covariance bundles."""
    i = bundle.index_of(t, atol=1e-12 * max(1.0, abs(t)))
    if i is None:
        raise GridMismatch(f"t={t} is not on the propagator grid")
    j = cov.index_of(t)
    phi = bundle.phi[i]
    mean = phi @ state0.mean
    c = phi @ state0.covariance @ phi.T + cov.sigma[j]
    return GaussianState(mean, 0.5 * (c + c.T))


@dataclass
class Trajectory:
    t: np.ndarray
    means: np.ndarray  # (M, 2N)
    covariances: np.ndarray  # (M, 2N, 2N)
    propagator: object = field(repr=False, default=None)
    thermal: object = field(repr=False, default=None)

    def state(self, i):
        return GaussianState(self.means[i], self.covariances[i])


def propagate(model, state0, t_grid, g=None, with_noise=True, tol=1e-10):
    """Means and covariances of ``state0`` on ``t_grid``."""
    model, g = _prepare(model, g)
    t = np.asarray(t_grid, dtype=float)
    prop = green_function(model, g, t, tol=tol)
    phi = prop.phi
    means = phi @ state0.mean
    covs = phi @ state0.covariance @ phi.transpose(0, 2, 1)
    therm = None
    if with_noise:
        therm = thermal_covariance(model, g, t, tol=tol)
        covs = covs + therm.sigma
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    return Trajectory(t, means, covs, prop, therm)


# -- long-time structure ----------------------------------------------------
@dataclass
class LongTimeCovariance:
    sigma0: np.ndarray  # constant part (2N, 2N)
    frequencies: np.ndarray  # combination frequencies ω_sj ± ω_sk (> 0)
    cos_amplitudes: np.ndarray  # (F, 2N, 2N)
    sin_amplitudes: np.ndarray
    refined_modes: np.ndarray  # mode frequencies re-fitted from the data
    refined_frequencies: np.ndarray  # combinations of ``refined_modes``
    residual_rms: float
    signal_rms: float  # RMS of Σ - mean(Σ) over the window
    total_rms: float  # RMS of Σ itself
    window: tuple
    condition: float

    @property
    def relative_residual(self):
        return self.residual_rms / self.signal_rms if self.signal_rms > 0 else 0.0


def combination_frequencies(mode_frequencies, merge_tol=1e-9):
    """Distinct positive values of ω_j ± ω_k (j ≤ k)."""
    w = np.asarray(mode_frequencies, dtype=float)
    cand = []
    for j in range(len(w)):
        for k in range(j, len(w)):
            cand.append(w[j] + w[k])
            if k != j:
                cand.append(abs(w[j] - w[k]))
    cand = np.sort(np.array([c for c in cand if c > merge_tol]))
    out = []
    for c in cand:
        if not out or c - out[-1] > merge_tol:
            out.append(c)
    return np.array(out)


def _design(t, freqs):
    cols = [np.ones_like(t)]
    for f in freqs:
        cols.extend([np.cos(f * t), np.sin(f * t)])
    return np.stack(cols, axis=1)


def _edge_terms(t, modes, edges, powers):
    """Decaying mode/edge interference: t^-p cos((e ± ω_k) t), t^-p sin(...)."""
    cols = []
    for p in powers:
        tp = t**-p
        cols.append(tp)
        for e in edges:
            for f in np.concatenate([e - modes, e + modes]):
                cols.extend([tp * np.cos(f * t), tp * np.sin(f * t)])
    return np.stack(cols, axis=1) if cols else np.zeros((t.size, 0))


def longtime_covariance(cov, mode_frequencies, window=None, entries=None, refine=True,
                        band_edges=(), transient_powers=(1.5,), max_condition=1e8):
    """Harmonic regression of Σ(t) on a late window.

    The stationary part is a constant plus cos/sin at every ω_sj ± ω_sk.  When
    ``band_edges`` are given, decaying interference terms between each mode
    and each edge, t^-p × harmonics at (edge ± ω_sk), are fitted alongside as
    nuisance regressors; they are what remains of the transient at late times.
    ``refine`` re-fits the mode frequencies themselves (every regressor
    frequency is a function of them), so recovered combinations can be compared
    with the candidates.  Raises WindowTooShort when the column-normalized
    design matrix is too ill-conditioned to separate the frequencies.
    """
    t = cov.t
    if window is None:
        window = (0.5 * t[-1], t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    tw = t[sel]
    modes = np.asarray(mode_frequencies, dtype=float)
    edges = np.asarray([e for e in band_edges if np.isfinite(e) and e > 0], dtype=float)
    powers = tuple(transient_powers) if edges.size else ()
    m = 2 * cov.n
    data = cov.sigma[sel].reshape(len(tw), -1)
    mask = np.ones(m * m, dtype=bool)
    if entries is not None:
        mask[:] = False
        for a, b in entries:
            mask[a * m + b] = True
    y = data[:, mask]

    def design(w):
        return np.concatenate([_design(tw, combination_frequencies(w)),
                               _edge_terms(tw, w, edges, powers)], axis=1)

    freqs = combination_frequencies(modes)
    A = design(modes)
    cond = float(np.linalg.cond(A / np.linalg.norm(A, axis=0)))
    if not np.isfinite(cond) or cond > max_condition:
        raise WindowTooShort(
            f"window [{tw[0]:g}, {tw[-1]:g}] cannot separate the regressors "
            f"(condition number {cond:.3g})"
        )
    refined = modes.copy()
    if refine and modes.size:
        scale = max(np.abs(y - y.mean(axis=0)).max(), 1e-300)

        def fun(w):
            a = design(w)
            c, *_ = np.linalg.lstsq(a, y / scale, rcond=None)
            return (a @ c - y / scale).ravel()

        sol = least_squares(fun, modes, x_scale=1e-3, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        refined = sol.x
    coef, *_ = np.linalg.lstsq(A, data, rcond=None)
    resid = (data - A @ coef)[:, mask]
    nf = freqs.size
    c = coef[: 1 + 2 * nf].reshape(-1, m, m)
    return LongTimeCovariance(
        sigma0=c[0],
        frequencies=freqs,
        cos_amplitudes=c[1::2],
        sin_amplitudes=c[2::2],
        refined_modes=refined,
        refined_frequencies=combination_frequencies(refined),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        signal_rms=float(np.sqrt(np.mean((y - y.mean(axis=0)) ** 2))),
        total_rms=float(np.sqrt(np.mean(y**2))),
        window=(float(tw[0]), float(tw[-1])),
        condition=cond,
    )


def cauchy_spread(cov, t_start):
    """sup over t₁, t₂ ≥ t_start of ‖Σ(t₁) - Σ(t₂)‖ (entrywise max)."""
    sel = cov.t >= t_start
    s = cov.sigma[sel]
    return float(np.max(s.max(axis=0) - s.min(axis=0)))
