"""Brute-force references for the contour method.

* :func:`volterra_solve` integrates G̈ = -V G + 2 (η * G) directly in time.
* :func:`discretize_bath` replaces each band by finitely many oscillators;
  :class:`DiscretizedBath` then diagonalizes the closed quadratic form
  ``H = p²/2 + xᵀ K x / 2`` with ``K = [[V, C], [Cᵀ, diag ω_k²]]`` and evolves
  each normal mode exactly.

For the discrete bath the spectral density is ``I(ω) = Σ_k C_k C_kᵀ δ(ω - ω_k) / (2ω_k)``,
which matches the kernels module when C_k are the bath columns of K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import eigsh

from .analysis import stability_scan
from .errors import IndefiniteTotalForm, NonPSDBin, StepTooLarge
from .kernels import KernelEvaluator
from .model import GaussianState
from .profiles import thermal_factor


# -- Volterra time stepping -------------------------------------------------
@dataclass
class VolterraResult:
    t: np.ndarray
    G: np.ndarray
    Gdot: np.ndarray
    dt: float

    def growth_rate(self, vector=None, window=(0.5, 1.0)):
        """Exponential growth rate from a log-linear fit on a late window.

        With ``vector`` u the fit uses uᵀ G u, isolating one unstable mode.
        """
        t0, t1 = (w * self.t[-1] for w in window)
        sel = (self.t >= t0) & (self.t <= t1)
        if vector is None:
            amp = np.max(np.abs(self.G[sel]), axis=(1, 2))
        else:
            u = np.asarray(vector, dtype=float)
            amp = np.abs(np.einsum("i,tij,j->t", u, self.G[sel], u))
        slope, _ = np.polyfit(self.t[sel], np.log(amp), 1)
        return float(slope)


def _free_flow(v, dt):
    """Exact one-step flow of G̈ = -VG: blocks (C, S, D) with
    G' = C G + S Ġ and Ġ' = D G + C Ġ."""
    lam, p = np.linalg.eigh(v)
    w = np.sqrt(lam.astype(complex))
    wt = w * dt
    c = np.cos(wt).real
    s = np.where(np.abs(wt) > 1e-8, np.sin(wt) / np.where(w == 0, 1.0, w), dt).real
    d = (-w * np.sin(wt)).real
    flow = lambda x: (p * x) @ p.T
    return flow(c), flow(s), flow(d)


def volterra_solve(model, g=None, dt=0.01, t_max=100.0, kernel=None):
    """Strang splitting: exact free flow under V between half kicks by the memory force.

    The memory integral ``M_n = dt Σ_{j=1}^{n-1} η_{n-j} G_j`` is the exact
    trapezoid rule because ``G_0 = 0`` and ``η_0 = 0``, so the scheme is
    explicit and second order, and exact without a bath.  ``dt`` must still
    resolve the fastest bare oscillation (dt·ω_max < 2).  ``kernel`` may
    supply η on the step grid (shape (M+1, N, N)).
    """
    g = model.g if g is None else g
    n = model.n
    v = model.v_matrix
    steps = int(round(t_max / dt))
    t = dt * np.arange(steps + 1)
    wmax = np.sqrt(max(np.max(np.linalg.eigvalsh(v)), 0.0))
    if dt * wmax >= 2.0:
        raise StepTooLarge(f"dt*sqrt(max eig V) = {dt * wmax:.3g} >= 2")
    if kernel is None:
        if model.reservoirs and g > 0:
            kernel = KernelEvaluator(model).dissipation_kernel(t, g)
        else:
            kernel = np.zeros((steps + 1, n, n))
    eta = np.asarray(kernel, dtype=float)
    stable = stability_scan(model, g).stable
    cf, sf, df = _free_flow(v, dt)
    # row-stacked reversed kernel: eta_rev[:, (M-j)N:(M-j+1)N] = η_j
    eta_rev = np.ascontiguousarray(eta[::-1].transpose(1, 0, 2).reshape(n, -1))
    G = np.zeros((steps + 1, n, n))
    Gd = np.zeros_like(G)
    Gd[0] = np.eye(n)
    flatG = G.reshape(-1, n)  # stacked G_0; G_1; ...
    kick = np.zeros((n, n))  # 2 M_0 = 0
    limit = 1e6 * max(1.0, t_max)
    for k in range(steps):
        half = Gd[k] + 0.5 * dt * kick
        m = k + 1
        G[m] = cf @ G[k] + sf @ half
        # 2 M_m = 2 dt Σ_{j=1}^{m-1} η_{m-j} G_j
        lo = (steps - m + 1) * n
        conv = eta_rev[:, lo : lo + (m - 1) * n] @ flatG[n : m * n] if m > 1 else 0.0
        kick = 2.0 * dt * conv
        Gd[m] = df @ G[k] + cf @ half + 0.5 * dt * kick
        if stable and (not np.isfinite(G[m]).all() or np.abs(G[m]).max() > limit):
            raise StepTooLarge(f"norm growth at t={t[m]:.4g} in a stable model")
    return VolterraResult(t, G, Gd, dt)


# -- discretized bath -------------------------------------------------------
@dataclass
class DiscretizedBath:
    v_matrix: np.ndarray
    frequencies: np.ndarray  # bath oscillator frequencies ω_k
    couplings: np.ndarray  # (N, M): column k couples x to q_k (includes g)
    temperatures: np.ndarray  # per bath oscillator
    t_rec: float
    _eig: tuple = field(default=None, repr=False)

    @property
    def n(self):
        return self.v_matrix.shape[0]

    @property
    def size(self):
        return self.n + len(self.frequencies)

    def total_form(self, dense=True):
        d = self.frequencies**2
        if dense:
            k = np.zeros((self.size, self.size))
            k[: self.n, : self.n] = self.v_matrix
            k[: self.n, self.n :] = self.couplings
            k[self.n :, : self.n] = self.couplings.T
            k[np.arange(self.n, self.size), np.arange(self.n, self.size)] = d
            return k
        return sparse.bmat(
            [[sparse.csr_matrix(self.v_matrix), sparse.csr_matrix(self.couplings)],
             [sparse.csr_matrix(self.couplings.T), sparse.diags(d)]],
            format="csr",
        )

    def schur_complement(self):
        """V - C D⁻¹ Cᵀ; K is positive definite iff this is."""
        c = self.couplings
        return self.v_matrix - (c / self.frequencies**2) @ c.T

    def min_eigenvalue(self):
        """Smallest eigenvalue of the total form (sparse Lanczos)."""
        k = self.total_form(dense=False)
        val = eigsh(k, k=1, which="SA", return_eigenvectors=False, tol=1e-12,
                    v0=np.ones(self.size))
        return float(val[0])

    def check_positive(self):
        s = np.linalg.eigvalsh(self.schur_complement())[0]
        if s <= 0:
            raise IndefiniteTotalForm(
                f"total quadratic form is indefinite (Schur complement eigenvalue {s:.6g})",
                s,
            )

    def secular_matrix(self, omega):
        """V - ω² - C (D - ω²)⁻¹ Cᵀ; singular at normal-mode frequencies."""
        c = self.couplings
        w2 = omega**2
        return self.v_matrix - w2 * np.eye(self.n) - (c / (self.frequencies**2 - w2)) @ c.T

    def eigensystem(self):
        """Normal-mode frequencies Ω and orthogonal eigenvectors of K (cached)."""
        if self._eig is None:
            self.check_positive()
            vals, vecs = linalg.eigh(self.total_form(), driver="evd", overwrite_a=True,
                                     check_finite=False)
            if vals[0] <= 0:
                raise IndefiniteTotalForm(f"total form eigenvalue {vals[0]:.6g}", vals[0])
            object.__setattr__(self, "_eig", (np.sqrt(vals), vecs))
        return self._eig

    def normal_frequencies(self):
        return self.eigensystem()[0]

    def kernel(self, t):
        """η(t) of the discrete bath."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        w = self.frequencies
        c = self.couplings
        s = np.sin(t[:, None] * w[None, :]) / (2.0 * w)
        return np.einsum("tk,ik,jk->tij", s, c, c)

    def green(self, t):
        """G(t), Ġ(t) from the normal modes: O_s sin(Ωt)/Ω O_sᵀ."""
        freq, vecs = self.eigensystem()
        os_ = vecs[: self.n]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        G = np.empty((t.size, self.n, self.n))
        Gd = np.empty_like(G)
        for s in range(0, t.size, 256):
            tt = t[s : s + 256, None] * freq[None, :]
            sn = np.sin(tt) / freq
            cs = np.cos(tt)
            G[s : s + 256] = np.einsum("ik,tk,jk->tij", os_, sn, os_)
            Gd[s : s + 256] = np.einsum("ik,tk,jk->tij", os_, cs, os_)
        return G, Gd

    def initial_bath_covariance(self):
        """Diagonal x and p variances of the bare bath oscillators."""
        w = self.frequencies
        f = np.array([thermal_factor(wk, tk) for wk, tk in zip(w, self.temperatures)])
        return f / (2.0 * w), f * w / 2.0

    def evolve(self, state0, t):
        """System marginal at times ``t`` (list of GaussianState)."""
        return closed_system_evolve(self, state0, t)

    def energy(self, x, p):
        k = self.total_form()
        return 0.5 * p @ p + 0.5 * x @ k @ x


def discretize_bath(model, modes_per_band, g=None):
    """Midpoint sampling of every reservoir band with ``modes_per_band`` bins.

    Bin i of a profile term ``f(ω) M`` sits at the bin centre ω_i and carries
    weight ``w_i = ∫_bin f``.  Its couplings are the columns of
    ``√(2 ω_i w_i) L`` with ``L Lᵀ = M`` (one oscillator per nonzero
    eigenvalue of M).
    """
    if modes_per_band < 2:
        raise ValueError("modes_per_band must be at least 2")
    g = model.g if g is None else g
    freqs, cols, temps = [], [], []
    for prof, mat, temp in model.profile_terms:
        lam, u = np.linalg.eigh(mat)
        if lam[0] < -1e-12 * max(1.0, lam[-1]):
            raise NonPSDBin(f"density matrix has eigenvalue {lam[0]:.3g}")
        keep = lam > 1e-14 * max(1.0, lam[-1])
        root = u[:, keep] * np.sqrt(lam[keep])
        edges = np.linspace(prof.lo, prof.hi, modes_per_band + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        weights = np.array([prof.integral(a, b) for a, b in zip(edges[:-1], edges[1:])])
        if np.any(weights < 0):
            raise NonPSDBin("negative bin weight")
        for w, wt in zip(mids, weights):
            amp = g * np.sqrt(2.0 * w * wt)
            for r in range(root.shape[1]):
                freqs.append(w)
                cols.append(amp * root[:, r])
                temps.append(temp)
    freqs = np.array(freqs)
    couplings = np.array(cols).T if cols else np.zeros((model.n, 0))
    spacing = np.diff(np.unique(freqs))
    t_rec = 2.0 * np.pi / spacing.min() if spacing.size else np.inf
    return DiscretizedBath(model.v_matrix.copy(), freqs, couplings, np.array(temps), t_rec)


def closed_system_evolve(bath, state0, t):
    """Evolve (system state ⊗ thermal bath) exactly; return system marginals."""
    freq, vecs = bath.eigensystem()
    n = bath.n
    os_, ob = vecs[:n], vecs[n:]
    vx, vp = bath.initial_bath_covariance()
    s0 = np.asarray(state0.covariance)
    m0 = np.asarray(state0.mean)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # bath initial covariance in normal-mode coordinates
    bx = (ob.T * vx) @ ob
    bp = (ob.T * vp) @ ob
    out = []
    for tt in t:
        c, s = np.cos(freq * tt), np.sin(freq * tt)
        # system rows of the full propagator, in normal-mode coordinates
        xs_c = os_ * c  # x from normal-mode x(0)
        xs_s = os_ * (s / freq)  # x from normal-mode p(0)
        ps_c = -os_ * (freq * s)
        ps_s = os_ * c
        # system block: mode coords of the system initial data are os_ᵀ (x_s, p_s)
        phi = np.block([[xs_c @ os_.T, xs_s @ os_.T], [ps_c @ os_.T, ps_s @ os_.T]])
        mean = phi @ m0
        cov = phi @ s0 @ phi.T
        lx = np.vstack([xs_c, ps_c])
        lp = np.vstack([xs_s, ps_s])
        cov = cov + lx @ bx @ lx.T + lp @ bp @ lp.T
        out.append(GaussianState(mean, 0.5 * (cov + cov.T)))
    return out
