"""Anisotropic dyadic decomposition, empirical Hölder and ``C^m`` norms, and
numerical checks of the scaling and Fourier-decay laws built on them.

Everything here lives on the parabolic geometry of :mod:`renewalab.geometry`:
``w(x) = -i x_1 + |x'|^2``, dilations ``D_k`` and the fixed annulus
``G = {1/8 <= |w| <= 2}``.  A bump ``gamma = eta(|w|)`` with ``eta = 1`` on
``[1/4, 1]`` generates the partition ``rho(D_{-k} x)``, ``k in Z``, and any
quotient ``q = theta / v`` that is singular at the origin splits into dilated
copies of functions supported in ``G``:

    q_hat(a) = sum_{k >= k0} 2^{-k(d+1)} psi_k_hat(D_k a),
    psi_k(x) = rho(x) q(D_k x).

Functions are represented by :class:`HolderFunctionHandle`, whose expression
is written once against :class:`~renewalab.jets.Jet` so that values, first
and second derivatives come from the same code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .errors import (CapabilityError, DomainCoverageError, DomainError, EnvelopeError,
                     HypothesisViolationError)
from .geometry import Annulus, annulus_contains, w_abs
from .jets import Jet, smoothstep
from .quadrature import TensorGrid, singular_fourier
from .rng import stream

LN4 = math.log(4.0)
ANNULUS_LO, ANNULUS_HI = 0.125, 2.0
SLOPE_SLACK = 0.15
DEFAULT_M = 2.5

Expr = Callable[[list], object]


# ---------------------------------------------------------------------------
# bump, partition of unity
# ---------------------------------------------------------------------------

def eta(s):
    """Radial profile: 1 on ``[1/4, 1]``, 0 outside ``(1/8, 2)``, smooth in between."""
    return smoothstep(8.0 * s - 1.0) * (1.0 - smoothstep(s - 1.0))


def _w_abs_expr(xs: list):
    tail = xs[1] * xs[1]
    for xj in xs[2:]:
        tail = tail + xj * xj
    return jets.sqrt(xs[0] * xs[0] + tail * tail)


def gamma_eval(x: np.ndarray) -> np.ndarray:
    """``gamma(x) = eta(|w(x)|)``."""
    return eta(w_abs(np.atleast_2d(x)))


def window(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive range of ``k`` with possibly nonzero ``gamma(D_{-k} x)`` for ``|w(x)| = s``."""
    ls = np.log(s)
    lo = np.ceil((-math.log(8.0) - ls) / LN4).astype(int) - 1
    hi = np.floor((math.log(2.0) - ls) / LN4).astype(int) + 1
    return lo, hi


def _phi_from_s(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi`` and the number of nonzero terms, from ``s = |w(x)| > 0``."""
    lo, hi = window(s)
    width = int((hi - lo).max()) + 1 if s.size else 0
    total = np.zeros_like(s)
    count = np.zeros(s.shape, dtype=int)
    for j in range(width):
        k = lo + j
        active = k <= hi
        # |w(D_{-k} x)| = 4^k |w(x)| exactly in binary floating point
        term = np.where(active, eta(np.ldexp(s, 2 * k)), 0.0)
        total += term
        count += term > 0
    return total, count


def _positive_s(x: np.ndarray) -> np.ndarray:
    s = w_abs(np.atleast_2d(np.asarray(x, dtype=float)))
    if np.any(s == 0):
        raise DomainError("the partition is defined away from the origin only")
    return s


def phi_eval(x: np.ndarray) -> np.ndarray:
    """``phi(x) = sum_k gamma(D_{-k} x)`` over the finite window; raises at ``x = 0``."""
    return _phi_from_s(_positive_s(x))[0]


def window_census(x: np.ndarray) -> np.ndarray:
    """Number of nonzero window terms at every point."""
    return _phi_from_s(_positive_s(x))[1]


def rho_eval(x: np.ndarray) -> np.ndarray:
    s = _positive_s(x)
    return eta(s) / _phi_from_s(s)[0]


def partition_sum(x: np.ndarray) -> np.ndarray:
    """``sum_k rho(D_{-k} x)``; equals 1 for every ``x != 0``."""
    s = _positive_s(x)
    lo, hi = window(s)
    total = np.zeros_like(s)
    for j in range(int((hi - lo).max()) + 1):
        k = lo + j
        sk = np.ldexp(s, 2 * k)
        g = np.where(k <= hi, eta(sk), 0.0)
        nz = g > 0
        term = np.zeros_like(s)
        term[nz] = g[nz] / _phi_from_s(sk[nz])[0]
        total += term
    return total


def rho_expr(xs: list):
    """``rho = gamma / phi`` as an expression (values or jets) for points of ``G``."""
    s = _w_abs_expr(xs)
    sval = np.asarray(s.val if isinstance(s, Jet) else s, dtype=float)
    if np.any(sval == 0):
        raise DomainError("the partition is defined away from the origin only")
    lo, hi = window(sval)
    phi = 0.0
    for k in range(int(lo.min()), int(hi.max()) + 1):
        phi = phi + eta(s * 4.0 ** k)
    return eta(s) / phi


# ---------------------------------------------------------------------------
# regions and function handles
# ---------------------------------------------------------------------------

class Region:
    d: int
    scale: float

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class AnnulusRegion(Region):
    """The fixed annulus ``G = {1/8 <= |w| <= 2}`` in dimension ``d``."""
    d: int
    scale: float = 1.0

    def contains(self, x):
        return np.atleast_1d(annulus_contains(Annulus(0, "gamma_tilde"), np.atleast_2d(x)))

    def sample(self, n, gen):
        half = np.array([ANNULUS_HI] + [math.sqrt(ANNULUS_HI)] * (self.d - 1))
        out = np.empty((0, self.d))
        while len(out) < n:
            cand = gen.uniform(-half, half, size=(2 * n + 16, self.d))
            out = np.concatenate([out, cand[self.contains(cand)]])
        return out[:n]


@dataclass(frozen=True)
class BallRegion(Region):
    center: np.ndarray
    radius: float = 1.0

    @property
    def d(self):
        return len(self.center)

    @property
    def scale(self):
        return self.radius

    def contains(self, x):
        return np.linalg.norm(np.atleast_2d(x) - self.center, axis=1) <= self.radius

    def sample(self, n, gen):
        g = gen.standard_normal((n, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * gen.uniform(size=(n, 1)) ** (1.0 / self.d)
        return np.asarray(self.center) + r * g


@dataclass(frozen=True)
class BoxRegion(Region):
    lo: np.ndarray
    hi: np.ndarray

    @property
    def d(self):
        return len(self.lo)

    @property
    def scale(self):
        return float(np.max(np.asarray(self.hi) - np.asarray(self.lo)))

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def sample(self, n, gen):
        return gen.uniform(self.lo, self.hi, size=(n, self.d))


def ball(d: int, radius: float = 1.0, center=None) -> BallRegion:
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    return BallRegion(c, float(radius))


def box(lo, hi) -> BoxRegion:
    return BoxRegion(np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float)))


@dataclass(frozen=True)
class HolderFunctionHandle:
    """A scalar function with optional analytic derivatives up to order 2.

    Parameters
    ----------
    name : str
    expr : callable, optional
        ``expr(xs)`` where ``xs`` is the list of coordinate arrays or jets;
        written with arithmetic, :func:`renewalab.jets.sqrt` and
        :func:`renewalab.jets.smoothstep` so it runs on both.
    value : callable, optional
        Plain ``(N, d) -> (N,)`` evaluation for functions without ``expr``.
    m : float
        Regularity order the function is used with.
    radius : float
        Radius of the ball around 0 the function is defined on.
    """
    name: str
    expr: Expr | None = None
    value: Callable[[np.ndarray], np.ndarray] | None = None
    m: float = DEFAULT_M
    radius: float = math.inf
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def order(self) -> int:
        return 2 if self.expr is not None else 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.expr is not None:
            out = self.expr([x[:, j] for j in range(x.shape[1])])
            return np.broadcast_to(np.asarray(out), (len(x),))
        return np.asarray(self.value(x))

    def jet(self, x: np.ndarray) -> Jet:
        if self.expr is None:
            raise CapabilityError(f"{self.name}: no derivatives declared")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self.expr(Jet.variables(x))
        if not isinstance(out, Jet):
            out = Jet.constant(out, *x.shape)
        return out

    def dilated(self, k: int) -> "HolderFunctionHandle":
        """``x -> u(D_k x)``."""
        if self.expr is None:
            raise CapabilityError(f"{self.name}: dilation needs an expression")
        expr = self.expr

        def dk(xs):
            return expr([xs[0] * 4.0 ** -k] + [xj * 2.0 ** -k for xj in xs[1:]])

        return HolderFunctionHandle(f"{self.name}@D{k}", dk, m=self.m, radius=math.inf)

    def reciprocal(self) -> "HolderFunctionHandle":
        expr = self.expr
        return HolderFunctionHandle(f"1/{self.name}", lambda xs: 1.0 / expr(xs), m=self.m, radius=self.radius)


def multi_indices(d: int, order: int) -> list[tuple[int, ...]]:
    """Multi-indices of exactly ``order`` in ``d`` variables, in lexicographic order."""
    if order == 0:
        return [(0,) * d]
    out = []
    for i in range(d):
        for rest in multi_indices(d, order - 1):
            beta = list(rest)
            beta[i] += 1
            t = tuple(beta)
            if t not in out:
                out.append(t)
    return sorted(out, reverse=True)


def check_derivatives(handle: HolderFunctionHandle, region: Region, n: int = 10, seed: int = 0,
                      rel_tol: float = 1e-4) -> float:
    """Largest finite-difference mismatch of the declared derivatives, relative to scale.

    Raises :class:`HypothesisViolationError` above ``rel_tol``.
    """
    x = region.sample(n, stream(seed, 0))
    jt = handle.jet(x)
    d = x.shape[1]
    h = 1e-5 * region.scale
    worst = 0.0
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        jp, jm = handle.jet(x + e), handle.jet(x - e)
        fd_grad = (jp.val - jm.val) / (2 * h)
        fd_hess = (jp.grad - jm.grad) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(jt.val))), float(np.max(np.abs(jt.grad))))
        worst = max(worst, float(np.max(np.abs(fd_grad - jt.grad[:, j]))) / scale)
        scale2 = max(scale, float(np.max(np.abs(jt.hess))))
        worst = max(worst, float(np.max(np.abs(fd_hess - jt.hess[:, j, :]))) / scale2)
    if worst > rel_tol:
        raise HypothesisViolationError(f"{handle.name}: declared derivatives off by {worst:.2e}")
    return worst


# ---------------------------------------------------------------------------
# empirical norms
# ---------------------------------------------------------------------------

PAIR_BLOCK = 4096
NEAR_SCALES = 24


def _pair_block(region: Region, gen: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    n_uni = n // 2
    x = region.sample(n, gen)
    y = np.empty_like(x)
    y[:n_uni] = region.sample(n_uni, gen)
    # near-diagonal pairs at scales 2^-j; pairs leaving the region fall back to x
    m = n - n_uni
    u = gen.standard_normal((m, region.d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    j = gen.integers(1, NEAR_SCALES + 1, size=m)
    y_near = x[n_uni:] + region.scale * np.ldexp(1.0, -j)[:, None] * u
    inside = region.contains(y_near)
    y[n_uni:] = np.where(inside[:, None], y_near, x[n_uni:])
    return x, y


def _pair_blocks(region: Region, budget: int, seed: int):
    done = 0
    i = 0
    while done < budget:
        n = min(PAIR_BLOCK, budget - done)
        # a fixed block size keeps every prefix identical across budgets
        x, y = _pair_block(region, stream(seed, i), PAIR_BLOCK)
        yield x[:n], y[:n]
        done += n
        i += 1


def holder_seminorm(g, tau: float, region: Region, budget: int = 20000, seed: int = 0) -> float:
    """Sampled lower bound of ``sup |g(x) - g(y)| / |x - y|^tau`` over ``region``.

    Pairs come in fixed seeded blocks, so a larger budget only appends pairs
    and the estimate is non-decreasing in ``budget``.
    """
    if not 0 < tau <= 1:
        raise ValueError("Hölder order must lie in (0, 1]")
    best = 0.0
    for x, y in _pair_blocks(region, budget, seed):
        dist = np.linalg.norm(x - y, axis=1)
        keep = dist > 0
        if not keep.any():
            continue
        num = np.abs(np.asarray(g(x[keep])) - np.asarray(g(y[keep])))
        best = max(best, float(np.max(num / dist[keep] ** tau)))
    return best


def _sup_refine(fn: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, f0: float, region: Region,
                levels: int = 24, sweeps: int = 4) -> float:
    """Coordinate ascent of ``|fn|`` from ``x0`` with geometrically shrinking steps."""
    x, best = x0.copy(), f0
    d = len(x)
    steps = np.concatenate([np.eye(d), -np.eye(d)])
    for lvl in range(levels):
        h = region.scale * 2.0 ** (-3 - lvl)
        for _ in range(sweeps):
            cand = x + h * steps
            cand = cand[region.contains(cand)]
            if not len(cand):
                break
            vals = np.abs(fn(cand))
            i = int(np.argmax(vals))
            if vals[i] <= best:
                break
            x, best = cand[i], float(vals[i])
    return best


@dataclass(frozen=True)
class CbmNorm:
    m: float
    total: float
    sup_terms: dict
    seminorm_terms: dict


def cbm_norm(handle: HolderFunctionHandle, m: float, region: Region, budget: int = 20000,
             seed: int = 0, refine: bool = True) -> CbmNorm:
    """Sampled estimate of ``sum_{|b|<=[m]} |d^b f|_0 + sum_{|b|=[m]} [d^b f]_{m-[m]}``."""
    if m < 0:
        raise ValueError("m must be non-negative")
    top = int(math.floor(m))
    frac = m - top
    if top > 2:
        raise CapabilityError("derivatives are available up to order 2 only")
    if top > handle.order:
        raise CapabilityError(f"{handle.name}: order-{top} derivatives are not declared")
    gen = stream(seed, 1 << 20)
    x = region.sample(budget, gen)
    d = x.shape[1]

    def deriv(beta):
        if sum(beta) == 0 and handle.expr is None:
            return lambda p: handle(p)
        return lambda p: handle.jet(p).derivative(beta)

    jt = handle.jet(x) if handle.expr is not None else None
    sups: dict = {}
    for order in range(top + 1):
        for beta in multi_indices(d, order):
            vals = np.abs(jt.derivative(beta) if jt is not None else handle(x))
            i = int(np.argmax(vals))
            best = float(vals[i])
            if refine and best > 0:
                best = _sup_refine(deriv(beta), x[i], best, region)
            sups[beta] = best
    semis: dict = {}
    if frac > 0:
        for beta in multi_indices(d, top):
            semis[beta] = holder_seminorm(deriv(beta), frac, region, budget, seed)
    total = float(sum(sups.values()) + sum(semis.values()))
    return CbmNorm(m, total, sups, semis)


# ---------------------------------------------------------------------------
# catalog building blocks
# ---------------------------------------------------------------------------

def k0_for_radius(r: float) -> int:
    """Smallest ``k0 >= 1`` with ``sqrt(2) / 2^(k0 - 1) < r``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    k = 1
    while math.sqrt(2.0) / 2.0 ** (k - 1) >= r:
        k += 1
    return k


def cutoff_expr(inner: float, outer: float) -> Expr:
    """``1`` on ``B(0, inner)``, ``0`` outside ``B(0, outer)``; smooth in ``|x|^2``."""
    a, b = inner ** 2, outer ** 2

    def chi(xs):
        r2 = xs[0] * xs[0]
        for xj in xs[1:]:
            r2 = r2 + xj * xj
        return 1.0 - smoothstep((r2 - a) / (b - a))

    return chi


def theta_handle(kind: str, r: float = 0.5, m: float = DEFAULT_M) -> HolderFunctionHandle:
    """Numerators ``theta = chi * p`` with ``chi = 1`` on every ``D_k G``, ``k >= k0(r)``.

    ``kind`` is one of ``"x2"`` (vanishes at 0), ``"x2^2x3"`` and ``"x2^3"``
    (vanishing first and second derivatives at 0), ``"x1+x2"`` and ``"zero"``.
    """
    k0 = k0_for_radius(r)
    chi = cutoff_expr(math.sqrt(2.0) / 2.0 ** (k0 - 1), r)
    polys = {
        "x2": lambda xs: xs[1],
        "x2^2x3": lambda xs: xs[1] * xs[1] * xs[2],
        "x2^3": lambda xs: xs[1] * xs[1] * xs[1],
        "x1+x2": lambda xs: xs[0] + xs[1],
        "zero": lambda xs: 0.0 * xs[0],
    }
    if kind not in polys:
        raise KeyError(f"unknown numerator {kind!r}")
    p = polys[kind]
    return HolderFunctionHandle(f"theta[{kind}]", lambda xs: chi(xs) * p(xs), m=m, radius=r,
                                meta={"k0": k0, "kind": kind})


def v_handle(m: float = DEFAULT_M) -> HolderFunctionHandle:
    """The model denominator ``v(x) = -i x_1 + |x|^2``."""

    def v(xs):
        r2 = xs[0] * xs[0]
        for xj in xs[1:]:
            r2 = r2 + xj * xj
        return r2 - 1j * xs[0]

    return HolderFunctionHandle("v", v, m=m)


def bump_handle(center=None, radius: float = 1.0) -> HolderFunctionHandle:
    """Mollifier ``exp(1 - 1/(1 - |x - c|^2 / R^2))`` on the ball ``B(c, R)``."""

    def value(x):
        c = np.zeros(x.shape[1]) if center is None else np.asarray(center, dtype=float)
        t = np.sum((x - c) ** 2, axis=1) / radius ** 2
        out = np.zeros(len(x))
        inside = t < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside]))
        return out

    return HolderFunctionHandle("bump", value=value)


# ---------------------------------------------------------------------------
# scaling laws
# ---------------------------------------------------------------------------

LAW_EXPONENTS = {"theta": lambda nu: -1.0, "theta2": lambda nu: -(2.0 + nu),
                 "v": lambda nu: -2.0, "inv_v": lambda nu: 2.0,
                 "psi": lambda nu: 1.0, "psi_tilde": lambda nu: 2.0 - nu}


def nu_of(m: float) -> float:
    return min(m - 2.0, 1.0)


@dataclass(frozen=True)
class ScalingTable:
    kind: str
    m: float
    ks: np.ndarray
    norms: np.ndarray
    sup_norms: np.ndarray
    slope: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.slope <= self.bound + SLOPE_SLACK

    def rows(self) -> list[tuple]:
        return [(int(k), float(n), float(s), self.slope) for k, n, s in zip(self.ks, self.norms, self.sup_norms)]


def fit_log2_slope(ks, values) -> float:
    ks = np.asarray(ks, dtype=float)
    y = np.log2(np.asarray(values, dtype=float))
    return float(np.polyfit(ks, y, 1)[0])


def _k_range(k_range, k0: int) -> list[int]:
    ks = list(range(k0, k0 + 7)) if k_range is None else [int(k) for k in k_range]
    if min(ks) < k0:
        raise DomainCoverageError(f"k = {min(ks)} is below k0 = {k0}: D_k G leaves the domain")
    return ks


def _table(kind, m, ks, builder, d, budget, seed, workers=1) -> ScalingTable:
    region = AnnulusRegion(d)

    def one(k):
        return cbm_norm(builder(k), m, region, budget, seed)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(one, ks))
    else:
        res = [one(k) for k in ks]
    norms = np.array([r.total for r in res])
    sups = np.array([r.sup_terms[(0,) * d] for r in res])
    if np.all(norms == 0):
        slope = -math.inf
    else:
        slope = fit_log2_slope(ks, norms)
    bound = LAW_EXPONENTS[kind](nu_of(m))
    return ScalingTable(kind, m, np.array(ks), norms, sups, slope, bound)


def scaled_norm_table(u: HolderFunctionHandle, kind: str, k_range=None, m: float = DEFAULT_M,
                      d: int = 2, budget: int = 20000, seed: int = 0, workers: int = 1) -> ScalingTable:
    """``C^m(G)`` norms of ``u_k = u o D_k`` (``kind = "inv_v"`` uses ``1/u``) and their log2 slope."""
    if kind not in ("theta", "theta2", "v", "inv_v"):
        raise KeyError(f"unknown law {kind!r}")
    k0 = k0_for_radius(u.radius) if math.isfinite(u.radius) else 1
    ks = _k_range(k_range, k0)
    base = u.reciprocal() if kind == "inv_v" else u
    return _table(kind, m, ks, lambda k: base.dilated(k), d, budget, seed, workers)


def _check_band(v: HolderFunctionHandle, d: int, ks: Sequence[int], seed: int) -> None:
    at0 = v.jet(np.zeros((1, d)))
    if d > 1 and np.max(np.abs(at0.grad[0, 1:])) > 1e-12:
        raise HypothesisViolationError("v must have vanishing transverse derivatives at 0")
    pts = AnnulusRegion(d).sample(4096, stream(seed, 7))
    for k in ks:
        low = float(np.min(np.abs(v.dilated(k)(pts)))) * 4.0 ** k
        if not low > 1e-8:
            raise HypothesisViolationError(f"|v_k| degenerates on the annulus at k = {k}")


def psi_handle(theta: HolderFunctionHandle, v: HolderFunctionHandle, k: int,
               v_tilde: HolderFunctionHandle | None = None) -> HolderFunctionHandle:
    """``rho * theta_k / v_k`` (or ``/(v_k v~_k)``) on the annulus."""
    tk, vk = theta.dilated(k).expr, v.dilated(k).expr
    vtk = v_tilde.dilated(k).expr if v_tilde is not None else None

    def psi(xs):
        den = vk(xs) if vtk is None else vk(xs) * vtk(xs)
        return rho_expr(xs) * tk(xs) / den

    return HolderFunctionHandle(f"psi_{k}", psi, m=theta.m)


def psi_k_norm_law(theta: HolderFunctionHandle, v: HolderFunctionHandle,
                   v_tilde: HolderFunctionHandle | None = None, k_range=None, m: float = DEFAULT_M,
                   d: int = 2, budget: int = 20000, seed: int = 0, workers: int = 1) -> ScalingTable:
    """Norms of ``psi_k`` on the annulus; the bound is ``2^k`` (``2^{k(2-nu)}`` with ``v_tilde``)."""
    k0 = k0_for_radius(theta.radius)
    ks = _k_range(k_range, k0)
    _check_band(v, d, ks, seed)
    if v_tilde is not None:
        _check_band(v_tilde, d, ks, seed)
    kind = "psi" if v_tilde is None else "psi_tilde"
    return _table(kind, m, ks, lambda k: psi_handle(theta, v, k, v_tilde), d, budget, seed, workers)


# ---------------------------------------------------------------------------
# Fourier transforms of singular quotients
# ---------------------------------------------------------------------------

def cone_cutoff_expr(k0: int) -> Expr:
    """``1`` on ``|w| <= 3/4 * 4^-(k0+1)``, ``0`` beyond ``4^-(k0+1)``.

    The inner level contains ``B(0, 2^{-1/2} 4^{-(k0+1)})`` for ``k0 >= 1``.
    """
    top = 4.0 ** -(k0 + 1)

    def eta_c(xs):
        return 1.0 - smoothstep((_w_abs_expr(xs) - 0.75 * top) / (0.25 * top))

    return eta_c


@dataclass
class SingularQuotient:
    """``q = eta_C * theta / v`` (times ``1 / v_tilde`` if given), supported near 0."""
    theta: HolderFunctionHandle
    v: HolderFunctionHandle
    v_tilde: HolderFunctionHandle | None = None

    def __post_init__(self):
        self.k0 = k0_for_radius(self.theta.radius)
        self.top = 4.0 ** -(self.k0 + 1)
        self._eta = cone_cutoff_expr(self.k0)

    def expr(self, xs):
        den = self.v.expr(xs)
        if self.v_tilde is not None:
            den = den * self.v_tilde.expr(xs)
        return self._eta(xs) * self.theta.expr(xs) / den

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        xs = [x[:, j] for j in range(x.shape[1])]
        out = np.zeros(len(x), dtype=complex)
        nz = w_abs(x) > 0
        out[nz] = self.expr([c[nz] for c in xs])
        return out

    def psi_values(self, x: np.ndarray, k: int) -> np.ndarray:
        """``rho(x) q(D_k x)`` at points of the annulus box."""
        xs = [x[:, j] for j in range(x.shape[1])]
        out = np.zeros(len(x), dtype=complex)
        s = w_abs(x)
        inside = (s > ANNULUS_LO) & (s < ANNULUS_HI)
        xi = [c[inside] for c in xs]
        dk = [xi[0] * 4.0 ** -k] + [c * 2.0 ** -k for c in xi[1:]]
        out[inside] = rho_expr(xi) * self.expr(dk)
        return out


@dataclass(frozen=True)
class DyadicTransform:
    a: np.ndarray
    value: complex
    terms: np.ndarray
    ks: np.ndarray
    tail_bound: float


class DyadicFourier:
    """``q_hat`` through the dyadic sum, with the annulus integrands cached per ``k``."""

    def __init__(self, q: SingularQuotient, d: int = 2, width: float = 0.05, nodes: int = 16,
                 tail_rtol: float = 1e-4, k_max: int = 60, max_points: int = 1 << 24):
        self.q, self.d = q, d
        half = np.array([ANNULUS_HI] + [math.sqrt(ANNULUS_HI)] * (d - 1))
        self.grid = TensorGrid(-half, half, width, nodes)
        if int(np.prod(self.grid.shape)) > max_points:
            raise CapabilityError(f"annulus grid {self.grid.shape} exceeds {max_points} points")
        self._pts = self.grid.points()
        self.tail_rtol, self.k_max = tail_rtol, k_max
        self._vals: dict[int, np.ndarray] = {}
        self._mass: dict[int, float] = {}

    def psi(self, k: int) -> np.ndarray:
        if k not in self._vals:
            self._vals[k] = self.q.psi_values(self._pts, k).reshape(self.grid.shape)
        return self._vals[k]

    def shell_mass(self, k: int) -> float:
        """``int rho(D_{-k} x) |q(x)| dx = 2^{-k(d+1)} int |psi_k|``."""
        if k not in self._mass:
            self._mass[k] = 2.0 ** (-k * (self.d + 1)) * self.grid.integral(np.abs(self.psi(k))).real
        return self._mass[k]

    def _ks(self):
        """Dyadic indices until the geometric tail of the shell masses is negligible."""
        k0 = self.q.k0
        total = 0.0
        k = k0
        while k < k0 + self.k_max:
            e = self.shell_mass(k)
            total += e
            if k >= k0 + 2:
                prev = self.shell_mass(k - 1)
                ratio = e / prev if prev > 0 else 0.0
                if ratio >= 1:
                    raise EnvelopeError(f"shell masses stopped decaying at k = {k}")
                tail = e * ratio / (1 - ratio)
                if tail <= self.tail_rtol * total:
                    return list(range(k0, k + 1)), tail
            k += 1
        raise EnvelopeError(f"k-tail did not settle within {self.k_max} shells")

    def transform(self, a) -> DyadicTransform:
        a = np.asarray(a, dtype=float)
        ks, tail = self._ks()
        terms = []
        for k in ks:
            dka = np.concatenate([[a[0] * 4.0 ** -k], a[1:] * 2.0 ** -k])
            terms.append(2.0 ** (-k * (self.d + 1)) * self.grid.fourier(self.psi(k), dka))
        terms = np.array(terms)
        return DyadicTransform(a, complex(terms.sum()), terms, np.array(ks), tail)

    def l1_mass(self) -> float:
        ks, tail = self._ks()
        return float(sum(self.shell_mass(k) for k in ks))


def direct_fourier(q: SingularQuotient, a, refine: int = 1, tol: float = 1e-9) -> complex:
    """``q_hat(a)`` by graded quadrature around the singular point."""
    top = q.top
    res = singular_fourier(q, a, R1=top, R2=math.sqrt(top), c1=1.0, feature=top / 8,
                           refine=refine, tol=tol)
    return res.value


def direct_l1(q: SingularQuotient, d: int = 2, refine: int = 1) -> float:
    top = q.top
    res = singular_fourier(lambda x: np.abs(q(x)), np.zeros(d), R1=top, R2=math.sqrt(top), c1=1.0,
                           feature=top / 8, refine=refine, tol=1e-9)
    return res.value.real


@dataclass(frozen=True)
class DecayReport:
    direction: np.ndarray
    magnitudes: np.ndarray
    values: np.ndarray
    scaled: np.ndarray

    @property
    def decrease(self) -> float:
        return 1.0 - self.scaled[-1] / self.scaled[0] if self.scaled[0] > 0 else 0.0

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.scaled) < 0))

    @property
    def ok(self) -> bool:
        return self.decrease >= 0.3

    def rows(self) -> list[tuple]:
        return [(float(r), float(abs(v)), float(s)) for r, v, s in zip(self.magnitudes, self.values, self.scaled)]


def fourier_decay_check(theta: HolderFunctionHandle, v: HolderFunctionHandle,
                        v_tilde: HolderFunctionHandle | None = None, directions=None,
                        magnitudes=(50.0, 100.0, 200.0, 400.0), d: int = 2,
                        engine: DyadicFourier | None = None) -> list[DecayReport]:
    """``|a|^{(d-1)/2} |q_hat(a)|`` along rays, from the dyadic sum."""
    q = SingularQuotient(theta, v, v_tilde)
    eng = engine or DyadicFourier(q, d=d)
    if directions is None:
        directions = [np.eye(d)[0]]
    out = []
    mags = np.asarray(magnitudes, dtype=float)
    for u in directions:
        u = np.asarray(u, dtype=float) / np.linalg.norm(u)
        vals = np.array([eng.transform(r * u).value for r in mags])
        out.append(DecayReport(u, mags, vals, mags ** ((d - 1) / 2) * np.abs(vals)))
    return out


# ---------------------------------------------------------------------------
# smooth compactly supported functions and products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CmFourierReport:
    m: float
    magnitudes: np.ndarray
    scaled: np.ndarray

    @property
    def constant(self) -> float:
        return float(np.max(self.scaled)) if len(self.scaled) else 0.0


def cm_fourier_bound_check(u: HolderFunctionHandle, m: float, a_samples, half_width: float = 1.0,
                           center=None, width: float = 0.05, nodes: int = 16) -> CmFourierReport:
    """``|a|^m |u_hat(a)|`` over sample frequencies, ``u`` supported in a box around ``center``."""
    a_samples = np.atleast_2d(np.asarray(a_samples, dtype=float))
    d = a_samples.shape[1]
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    amax = float(np.max(np.abs(a_samples)))
    h = min(width, 2 * math.pi * 2 / amax) if amax > 0 else width
    grid = TensorGrid(c - half_width, c + half_width, h, nodes)
    vals = grid.sample(u)
    mags = np.linalg.norm(a_samples, axis=1)
    scaled = np.array([r ** m * abs(grid.fourier(vals, a)) for r, a in zip(mags, a_samples)])
    return CmFourierReport(m, mags, scaled)


@dataclass(frozen=True)
class ProductReport:
    fg: float
    f_sup: float
    g_sup: float
    f_semi: float
    g_semi: float

    @property
    def rhs(self) -> float:
        return self.f_sup * self.g_semi + self.g_sup * self.f_semi

    @property
    def ok(self) -> bool:
        return self.fg <= 1.02 * self.rhs + 1e-300


def product_holder_check(f, g, sigma: float, region: Region, budget: int = 20000,
                         seed: int = 0) -> ProductReport:
    """``[fg] <= |f|_0 [g] + |g|_0 [f]`` with all five quantities on shared samples."""
    if not 0 < sigma <= 1:
        raise ValueError("Hölder order must lie in (0, 1]")
    fg = holder_seminorm(lambda x: f(x) * g(x), sigma, region, budget, seed)
    fs = holder_seminorm(f, sigma, region, budget, seed)
    gs = holder_seminorm(g, sigma, region, budget, seed)
    pts = [np.concatenate(p) for p in _pair_blocks(region, budget, seed)]
    pts = np.concatenate(pts)
    return ProductReport(fg, float(np.max(np.abs(f(pts)))), float(np.max(np.abs(g(pts)))), fs, gs)
