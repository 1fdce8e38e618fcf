"""Scalar band profiles f(ω) and the integral transforms the kernels need.

A spectral density is assembled from terms ``f(ω) * M`` where ``f`` is one of
the profiles below and ``M`` a constant PSD matrix.  Every profile lives on a
single bounded band ``[lo, hi]`` and behaves as ``(ω - lo)**a * (hi - ω)**b``
near its edges.  Each profile provides

* ``sine_transform(t)``        ∫ f(ω) sin(ωt) dω
* ``cosine_transform(t, T)``   ∫ f(ω) coth(ω/2T) cos(ωt) dω
* ``cauchy(z)``                ∫ f(ω) / (ω - z) dω for z off the open band
* ``pv(x)``                    principal value of the same integral on the band
* ``integral(u, v)``           ∫_u^v f(ω) dω

The generic implementations use Gauss-Jacobi rules matched to the edge
exponents (time transforms) and QUADPACK algebraic-weight rules (Cauchy
transforms).  :class:`Semicircle` overrides them with closed forms.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ModelError, OnBandEvaluation, QuadratureFailure

_TRANSFORM_RTOL = 1e-12
_MAX_RULE_NODES = 1 << 16


def thermal_factor(omega, temperature):
    """coth(ω / 2T), with the exact T = 0 limit of 1."""
    omega = np.asarray(omega, dtype=float)
    if temperature <= 0.0:
        return np.ones_like(omega)
    return 1.0 / np.tanh(omega / (2.0 * temperature))


@lru_cache(maxsize=64)
def _reference_rule(a, b, n):
    # nodes x and weights for ∫_{-1}^{1} (1+x)^a (1-x)^b φ(x) dx
    if a == 0.5 and b == 0.5:
        theta = np.arange(1, n + 1) * np.pi / (n + 1)
        x = -np.cos(theta)
        w = np.pi / (n + 1) * np.sin(theta) ** 2
    elif a == 0.0 and b == 0.0:
        x, w = np.polynomial.legendre.leggauss(n)
    else:
        x, w = special.roots_jacobi(n, b, a)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def band_rule(lo, hi, a, b, n):
    """Quadrature rule on ``[lo, hi]`` for integrands ``(ω-lo)^a (hi-ω)^b · smooth``.

    Returns nodes ``y`` and weights ``W`` such that ``Σ W_j F(y_j) ≈ ∫ F dy``
    when ``F`` carries the stated edge behaviour.
    """
    x, w = _reference_rule(float(a), float(b), int(n))
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    y = c + r * x
    if a == 0.5 and b == 0.5:
        # trapezoid rule in θ for y = c - R cos θ
        weights = r * np.pi / (n + 1) * np.sqrt(1.0 - x * x)
    else:
        weights = r * w / ((1.0 + x) ** a * (1.0 - x) ** b)
    return y, weights


def rule_size(half_width, t_max, minimum=64):
    """Smallest power-of-two-minus-one node count resolving e^{iωt} on a band."""
    need = 1.25 * half_width * abs(t_max) + minimum
    n = 1 << int(np.ceil(np.log2(need + 1)))
    return n - 1


class BandProfile:
    """Scalar profile ``f(ω) = (ω-lo)^a (hi-ω)^b h(ω)`` on one band.

    Subclasses implement :meth:`smooth` (the factor ``h``) and may override
    any transform with a closed form.
    """

    kind = "generic"

    def __init__(self, lo, hi, exponents):
        lo, hi = float(lo), float(hi)
        a, b = (float(e) for e in exponents)
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise ModelError(f"band [{lo}, {hi}] is not a bounded interval")
        if a <= -1.0 or b <= -1.0:
            raise ModelError("edge exponents must exceed -1 for an integrable density")
        self.lo, self.hi = lo, hi
        self.exponents = (a, b)

    # -- definition ------------------------------------------------------
    def smooth(self, omega):
        raise NotImplementedError

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        a, b = self.exponents
        inside = (omega > self.lo) & (omega < self.hi)
        out = np.zeros_like(omega)
        om = omega[inside]
        out[inside] = (om - self.lo) ** a * (self.hi - om) ** b * self.smooth(om)
        return out

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self):
        return 0.5 * (self.hi - self.lo)

    def to_dict(self):
        raise NotImplementedError(f"{type(self).__name__} is not serializable")

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted(self.to_dict().items())))

    # -- quadrature primitives ------------------------------------------
    def _weighted_nodes(self, n):
        y, wts = band_rule(self.lo, self.hi, *self.exponents, n)
        return y, wts * self(y)

    def _transform(self, t, kernel):
        """Adaptive ∫ f(ω) kernel(ω, t) dω for an array of t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape)
        scale = max(abs(self.integral(self.lo, self.hi)), 1e-300)
        order = np.argsort(np.abs(t))
        # process in blocks of similar |t| so the node count tracks the oscillation
        for block in np.array_split(order, max(1, len(order) // 256)):
            if block.size == 0:
                continue
            tb = t[block]
            n = rule_size(self.half_width, np.max(np.abs(tb)), minimum=32)
            prev = None
            while True:
                y, wf = self._weighted_nodes(n)
                val = kernel(y[None, :], tb[:, None]) @ wf
                if prev is not None and np.max(np.abs(val - prev)) <= _TRANSFORM_RTOL * scale:
                    break
                if n > _MAX_RULE_NODES:
                    raise QuadratureFailure(
                        f"{self.kind} transform did not converge with {n} nodes"
                    )
                prev = val
                n = 2 * n + 1
            out[block] = val
        return out

    # -- transforms --------------------------------------------------------
    def sine_transform(self, t):
        return self._transform(t, lambda w, tt: np.sin(w * tt))

    def cosine_transform(self, t, temperature=0.0):
        return self._transform(
            t, lambda w, tt: thermal_factor(w, temperature) * np.cos(w * tt)
        )

    def integral(self, u, v):
        u, v = max(float(u), self.lo), min(float(v), self.hi)
        if v <= u:
            return 0.0
        a, b = self.exponents
        val, err = integrate.quad(
            lambda w: self.smooth(np.array([w]))[0] * (w - self.lo) ** a * (self.hi - w) ** b,
            u, v, epsrel=1e-12, epsabs=0.0, limit=200,
        )
        return val

    def edge_cauchy(self, edge):
        """∫ f/(ω - edge) at a band edge; ±inf where the integral diverges."""
        a, b = self.exponents
        if edge == self.lo:
            if a <= 0.0:
                return np.inf
            val, _ = integrate.quad(
                lambda w: self.smooth(np.array([w]))[0],
                self.lo, self.hi, weight="alg", wvar=(a - 1.0, b), epsrel=1e-12, limit=200,
            )
            return val
        if edge == self.hi:
            if b <= 0.0:
                return -np.inf
            val, _ = integrate.quad(
                lambda w: self.smooth(np.array([w]))[0],
                self.lo, self.hi, weight="alg", wvar=(a, b - 1.0), epsrel=1e-12, limit=200,
            )
            return -val
        raise ValueError("edge must be one of the band endpoints")

    def _cauchy_scalar(self, z):
        a, b = self.exponents
        # natural size of the transform, so near-zero values are not misjudged
        ref = abs(self.integral(self.lo, self.hi)) / max(abs(z - self.center), self.half_width)

        def part(fn):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(
                    fn, self.lo, self.hi, weight="alg", wvar=(a, b),
                    epsrel=1e-12, epsabs=0.0, limit=400,
                )
            if not np.isfinite(val) or err > 1e-8 * max(abs(val), ref) + 1e-15:
                raise QuadratureFailure("Cauchy transform quadrature diverged")
            return val

        sm = lambda w: self.smooth(np.array([w]))[0]
        if z.imag == 0.0:
            return complex(part(lambda w: sm(w) / (w - z.real)))
        d = lambda w: (w - z.real) ** 2 + z.imag ** 2
        re = part(lambda w: sm(w) * (w - z.real) / d(w))
        im = part(lambda w: sm(w) * z.imag / d(w))
        return complex(re, im)

    def cauchy(self, z):
        """∫ f(ω)/(ω - z) dω; real ``z`` must lie outside the open band."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        for idx, zz in np.ndenumerate(z):
            if zz.imag == 0.0:
                x = zz.real
                if x == self.lo or x == self.hi:
                    out[idx] = self.edge_cauchy(x)
                    continue
                if self.lo < x < self.hi:
                    raise OnBandEvaluation(f"real point {x} lies inside band [{self.lo}, {self.hi}]")
            out[idx] = self._cauchy_scalar(zz)
        return out

    def cauchy_derivative(self, x):
        """d/dx ∫ f(ω)/(ω - x) dω = ∫ f(ω)/(ω - x)² dω for real x off the band.

        Infinite at an edge whose exponent is ≤ 1.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a, b = self.exponents
        out = np.empty(x.shape)
        sm = lambda w: self.smooth(np.array([w]))[0]
        for idx, xx in np.ndenumerate(x):
            if self.lo < xx < self.hi:
                raise OnBandEvaluation(f"real point {xx} lies inside band [{self.lo}, {self.hi}]")
            if xx == self.lo or xx == self.hi:
                ex = a if xx == self.lo else b
                if ex <= 1.0:
                    out[idx] = np.inf
                    continue
                wv = (a - 2.0, b) if xx == self.lo else (a, b - 2.0)
                fn = sm
            else:
                wv = (a, b)
                fn = lambda w, xx=xx: sm(w) / (w - xx) ** 2
            out[idx], _ = integrate.quad(fn, self.lo, self.hi, weight="alg", wvar=wv,
                                         epsrel=1e-12, epsabs=0.0, limit=400)
        return out

    def pv(self, x):
        """Principal value ∫ f(ω)/(ω - x) dω for x strictly inside the band.

        Uses symmetric-interval subtraction around the pole: the interval
        ``[x-δ, x+δ]`` contributes ∫ (f(ω) - f(x))/(ω - x) dω, the remainder
        is integrated with the edge-exponent weights.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a, b = self.exponents
        out = np.empty(x.shape)
        sm = lambda w: self.smooth(np.array([w]))[0]
        for idx, xx in np.ndenumerate(x):
            if not self.lo < xx < self.hi:
                raise ValueError(f"pv point {xx} is not inside the band")
            delta = 0.5 * min(xx - self.lo, self.hi - xx)
            fx = self(np.array([xx]))[0]
            left, _ = integrate.quad(
                lambda w: sm(w) * (self.hi - w) ** b / (w - xx),
                self.lo, xx - delta, weight="alg", wvar=(a, 0.0), epsrel=1e-12, limit=200,
            )
            right, _ = integrate.quad(
                lambda w: sm(w) * (w - self.lo) ** a / (w - xx),
                xx + delta, self.hi, weight="alg", wvar=(0.0, b), epsrel=1e-12, limit=200,
            )

            def core(w):
                if w == xx:
                    return 0.0
                return (self(np.array([w]))[0] - fx) / (w - xx)

            mid, _ = integrate.quad(core, xx - delta, xx + delta, points=[xx],
                                    epsrel=1e-12, limit=200)
            out[idx] = left + right + mid
        return out


class Semicircle(BandProfile):
    """f(ω) = scale · sqrt(R² - (ω - c)²) on [c - R, c + R]."""

    kind = "semicircle"

    def __init__(self, center, half_width, scale=1.0):
        center, half_width = float(center), float(half_width)
        if half_width <= 0:
            raise ModelError("semicircle half width must be positive")
        super().__init__(center - half_width, center + half_width, (0.5, 0.5))
        self.c = center
        self.r = half_width
        self.scale = float(scale)

    def smooth(self, omega):
        return np.full(np.shape(omega), self.scale)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        d = np.clip(self.r**2 - (omega - self.c) ** 2, 0.0, None)
        return self.scale * np.sqrt(d)

    def to_dict(self):
        return {"kind": self.kind, "center": self.c, "half_width": self.r, "scale": self.scale}

    def _fourier(self, t):
        # ∫ f e^{iωt} = scale · π R J1(R t)/t · e^{i c t}
        t = np.asarray(t, dtype=float)
        rt = self.r * t
        small = np.abs(rt) < 1e-8
        safe = np.where(small, 1.0, t)
        env = np.where(small, 0.5 * np.pi * self.r**2 * (1.0 - rt**2 / 8.0),
                       np.pi * self.r * special.j1(rt) / safe)
        return self.scale * env

    def sine_transform(self, t):
        t = np.asarray(t, dtype=float)
        return self._fourier(t) * np.sin(self.c * t)

    def cosine_transform(self, t, temperature=0.0):
        if temperature > 0.0:
            return super().cosine_transform(t, temperature)
        t = np.asarray(t, dtype=float)
        return self._fourier(t) * np.cos(self.c * t)

    def integral(self, u, v):
        u, v = max(float(u), self.lo), min(float(v), self.hi)
        if v <= u:
            return 0.0

        def prim(w):
            d = np.clip((w - self.c) / self.r, -1.0, 1.0)
            return 0.5 * self.r**2 * (d * np.sqrt(1.0 - d * d) + np.arcsin(d))

        return self.scale * (prim(v) - prim(u))

    def edge_cauchy(self, edge):
        if edge == self.lo:
            return self.scale * np.pi * self.r
        if edge == self.hi:
            return -self.scale * np.pi * self.r
        raise ValueError("edge must be one of the band endpoints")

    def cauchy(self, z):
        z = np.asarray(z, dtype=complex)
        real = z.imag == 0.0
        on_band = real & (z.real > self.lo) & (z.real < self.hi)
        if np.any(on_band):
            raise OnBandEvaluation(f"real point inside band [{self.lo}, {self.hi}]")
        w = z - self.c
        # stable form of π[sqrt(w-R) sqrt(w+R) - w]
        root = np.sqrt(w - self.r) * np.sqrt(w + self.r)
        # real points off the band: exact real branch, no rounding leak at the edge
        wr = w.real[real]
        root[real] = np.sign(wr) * np.sqrt(np.clip(wr * wr - self.r**2, 0.0, None))
        return -self.scale * np.pi * self.r**2 / (root + w)

    def pv(self, x):
        x = np.asarray(x, dtype=float)
        return -self.scale * np.pi * (x - self.c)

    def cauchy_derivative(self, x):
        # C(x) = -scale·π (w - sign(w) sqrt(w² - R²)), w = x - c
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = x - self.c
        if np.any((x > self.lo) & (x < self.hi)):
            raise OnBandEvaluation(f"real point inside band [{self.lo}, {self.hi}]")
        root = np.sqrt(np.clip(w * w - self.r**2, 0.0, None))
        root[(x == self.lo) | (x == self.hi)] = 0.0
        # |w|/root - 1 without cancellation far from the band
        with np.errstate(divide="ignore"):
            return self.scale * np.pi * self.r**2 / (root * (np.abs(w) + root))


class PowerLawBand(BandProfile):
    """f(ω) = scale · (ω - lo)^a (hi - ω)^b on [lo, hi]."""

    kind = "power_law"

    def __init__(self, lo, hi, exponents=(0.5, 0.5), scale=1.0):
        super().__init__(lo, hi, exponents)
        self.scale = float(scale)

    def smooth(self, omega):
        return np.full(np.shape(omega), self.scale)

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi,
                "exponents": list(self.exponents), "scale": self.scale}

    def integral(self, u, v):
        u, v = max(float(u), self.lo), min(float(v), self.hi)
        if v <= u:
            return 0.0
        a, b = self.exponents
        length = self.hi - self.lo
        total = self.scale * length ** (a + b + 1.0) * special.beta(a + 1.0, b + 1.0)
        cu = special.betainc(a + 1.0, b + 1.0, (u - self.lo) / length)
        cv = special.betainc(a + 1.0, b + 1.0, (v - self.lo) / length)
        return total * (cv - cu)

    def edge_cauchy(self, edge):
        a, b = self.exponents
        length = self.hi - self.lo
        if edge == self.lo:
            if a <= 0.0:
                return np.inf
            return self.scale * length ** (a + b) * special.beta(a, b + 1.0)
        if edge == self.hi:
            if b <= 0.0:
                return -np.inf
            return -self.scale * length ** (a + b) * special.beta(a + 1.0, b)
        raise ValueError("edge must be one of the band endpoints")

    # Closed forms in u = (ω - lo)/L, with B = Beta function:
    #   off band   ∫ u^a (1-u)^b/(u-ζ) du = -(B(a+1,b+1)/ζ) ₂F₁(1, a+1; a+b+2; 1/ζ)
    #   on band PV                        = -π cot(πa) ζ^a (1-ζ)^b + B(a,b+1) ₂F₁(1, -a-b; 1-a; ζ)
    def cauchy(self, z):
        z = np.asarray(z, dtype=complex)
        if np.any(z.imag != 0.0):
            return super().cauchy(z)
        x = z.real
        a, b = self.exponents
        if np.any((x > self.lo) & (x < self.hi)):
            bad = x[(x > self.lo) & (x < self.hi)].flat[0]
            raise OnBandEvaluation(f"real point {bad} lies inside band [{self.lo}, {self.hi}]")
        length = self.hi - self.lo
        out = np.empty(x.shape, dtype=complex)
        at_lo, at_hi = x == self.lo, x == self.hi
        off = ~(at_lo | at_hi)
        zeta = (x[off] - self.lo) / length
        out[off] = (-self.scale * length ** (a + b) * special.beta(a + 1.0, b + 1.0) / zeta
                    * special.hyp2f1(1.0, a + 1.0, a + b + 2.0, 1.0 / zeta))
        out[at_lo] = self.edge_cauchy(self.lo)
        out[at_hi] = self.edge_cauchy(self.hi)
        return out

    def cauchy_derivative(self, x):
        # d/dζ of -(B/ζ) F(1/ζ) is (B/ζ²)[F(w) + w F'(w)], w = 1/ζ
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any((x > self.lo) & (x < self.hi)):
            raise OnBandEvaluation(f"real point inside band [{self.lo}, {self.hi}]")
        a, b = self.exponents
        length = self.hi - self.lo
        out = np.empty(x.shape)
        edge = (x == self.lo) | (x == self.hi)
        if np.any(edge):
            out[edge] = BandProfile.cauchy_derivative(self, x[edge])
        zeta = (x[~edge] - self.lo) / length
        w = 1.0 / zeta
        c = a + b + 2.0
        val = special.hyp2f1(1.0, a + 1.0, c, w) + w * (a + 1.0) / c * special.hyp2f1(2.0, a + 2.0, c + 1.0, w)
        out[~edge] = self.scale * length ** (a + b - 1.0) * special.beta(a + 1.0, b + 1.0) * w * w * val
        return out

    def pv(self, x):
        a, b = self.exponents
        if a == round(a):
            return super().pv(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any((x <= self.lo) | (x >= self.hi)):
            raise ValueError("pv point is not inside the band")
        length = self.hi - self.lo
        zeta = (x - self.lo) / length
        val = (-np.pi / np.tan(np.pi * a) * zeta**a * (1.0 - zeta) ** b
               + special.beta(a, b + 1.0) * special.hyp2f1(1.0, -a - b, 1.0 - a, zeta))
        return self.scale * length ** (a + b) * val


_PROFILE_KINDS = {"semicircle": Semicircle, "power_law": PowerLawBand}


def profile_from_dict(data):
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _PROFILE_KINDS:
        raise ModelError(f"unknown profile kind {kind!r}; expected one of {sorted(_PROFILE_KINDS)}")
    cls = _PROFILE_KINDS[kind]
    try:
        if kind == "power_law" and "exponents" in data:
            data["exponents"] = tuple(data["exponents"])
        return cls(**data)
    except TypeError as exc:
        raise ModelError(f"bad parameters for {kind} profile: {exc}") from None
