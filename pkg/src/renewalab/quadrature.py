"""Composite Gauss-Legendre rules and a graded Fourier quadrature for integrands
with an anisotropic singularity at the origin.

The singular integrands handled here behave like ``1 / (-i c1 v_1 + |v'|^2)``
near ``v = 0``.  Writing ``v = (v_1, s * omega)`` with ``s = |v'|`` and
``omega`` on the unit sphere of the transverse space, the region around the
origin is cut into box-shells

    max(|v_1| / L1, (s / L2)^2) in (4^-(k+1), 4^-k],      k = 0, 1, 2, ...

which are parabolic images of one another (the same geometry as the annuli
``|w(v)| ~ 4^-k``).  Each shell is the union of two rectangles in ``(v_1, s)``
on which the integrand is smooth, so tensor Gauss-Legendre panels converge
fast.  Shells are added until their contribution stalls below a relative
tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import SingularityError

MAX_POINTS = 1 << 21


@lru_cache(maxsize=64)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_breaks(a: float, b: float, max_width: float, min_panels: int = 1) -> np.ndarray:
    n = max(min_panels, int(math.ceil((b - a) / max_width)) if math.isfinite(max_width) else 1)
    return np.linspace(a, b, n + 1)


def composite_gl(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of ``n``-point Gauss-Legendre on every panel."""
    x0, w0 = _leggauss(n)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    half = (hi - lo) / 2
    x = (lo + hi) / 2 + half * x0[None, :]
    w = half * w0[None, :]
    return x.ravel(), w.ravel()


def _osc_width(rate: float, periods: float = 2.0) -> float:
    return 2 * math.pi * periods / rate if rate > 0 else math.inf


@dataclass(frozen=True)
class ShellQuadResult:
    value: complex
    outer: complex
    shells: np.ndarray
    converged: bool


class SingularFourier:
    """``int g(v) exp(-i <b, v>) dv`` over ``|v_1| <= R1, |v'| <= R2``.

    Parameters
    ----------
    g : callable
        Vectorized integrand, ``(N, d) -> (N,)`` complex; must vanish (or be
        negligible) outside the integration box and be smooth away from 0.
    b : array
        Frequency vector.
    c1 : float
        Anisotropy constant: near 0, ``g ~ 1 / (-i c1 v_1 + |v'|^2)``.
    feature : float
        Smallest length scale of ``g`` away from the origin.
    nodes : int
        Gauss-Legendre nodes per panel.
    refine : int
        Divides every panel width (used for node-doubling audits).
    """

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], b, R1: float, R2: float,
                 c1: float = 1.0, feature: float | None = None, nodes: int = 16,
                 refine: int = 1, tol: float = 1e-7, k_max: int = 80, stall: int = 3):
        self.g = g
        self.b = np.asarray(b, dtype=float)
        self.d = self.b.size
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        self.R1, self.R2, self.c1 = float(R1), float(R2), float(c1)
        self.feature = float(feature) if feature is not None else min(R1, R2) / 4
        self.nodes, self.refine = int(nodes), int(refine)
        self.tol, self.k_max, self.stall = tol, k_max, stall
        self.L1 = 0.5 * min(self.R1, self.R2 ** 2 / self.c1)
        self.L2 = math.sqrt(self.c1 * self.L1)
        self.h1 = min(_osc_width(abs(self.b[0])), self.feature) / self.refine
        self.hs = min(_osc_width(float(np.linalg.norm(self.b[1:]))), self.feature) / self.refine

    # -- angular rule on the transverse sphere
    def _omega(self, s_max: float) -> tuple[np.ndarray, np.ndarray]:
        if self.d == 2:
            return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
        if self.d == 3:
            bw = float(np.linalg.norm(self.b[1:])) * s_max + 4 * s_max / self.feature
            n = (24 + 2 * int(math.ceil(bw))) * self.refine
            psi = 2 * math.pi * np.arange(n) / n
            return np.stack([np.cos(psi), np.sin(psi)], axis=1), np.full(n, 2 * math.pi / n)
        raise ValueError("only d = 2 and d = 3 are supported")

    def _rect(self, v1_breaks: np.ndarray, s_breaks: np.ndarray) -> complex:
        x1, w1 = composite_gl(v1_breaks, self.nodes)
        s, ws = composite_gl(s_breaks, self.nodes)
        om, wom = self._omega(float(s_breaks[-1]))
        ws = ws * s ** (self.d - 2)
        # transverse points (Ns * Nom, d - 1) with weights
        vt = (s[:, None, None] * om[None, :, :]).reshape(-1, self.d - 1)
        wt = (ws[:, None] * wom[None, :]).ravel()
        phase_t = np.exp(-1j * (vt @ self.b[1:]))
        total = 0.0j
        step = max(1, MAX_POINTS // max(len(wt), 1))
        for lo in range(0, len(x1), step):
            xs = x1[lo:lo + step]
            pts = np.empty((len(xs), len(wt), self.d))
            pts[:, :, 0] = xs[:, None]
            pts[:, :, 1:] = vt[None, :, :]
            vals = self.g(pts.reshape(-1, self.d)).reshape(len(xs), len(wt))
            vals = vals * phase_t[None, :] * np.exp(-1j * self.b[0] * xs)[:, None]
            total += (w1[lo:lo + step] @ vals) @ wt
        return complex(total)

    def _v1_breaks(self, a: float, b: float, scale: float) -> np.ndarray:
        return panel_breaks(a, b, min(self.h1, scale / self.refine), min_panels=self.refine)

    def _s_breaks(self, a: float, b: float, scale: float) -> np.ndarray:
        return panel_breaks(a, b, min(self.hs, scale / self.refine), min_panels=2 * self.refine)

    def outer(self) -> complex:
        L1, L2, R1, R2 = self.L1, self.L2, self.R1, self.R2
        total = 0.0j
        # |v1| in [L1, R1], all s
        if R1 > L1:
            sb = self._s_breaks(0.0, R2, L2 / 2)
            total += self._rect(self._v1_breaks(L1, R1, L1 / 2), sb)
            total += self._rect(self._v1_breaks(-R1, -L1, L1 / 2), sb)
        # |v1| < L1, s in [L2, R2]
        if R2 > L2:
            total += self._rect(self._v1_breaks(-L1, L1, L1 / 2), self._s_breaks(L2, R2, L2 / 2))
        return total

    def shell(self, k: int) -> complex:
        L1, L2 = self.L1 * 4.0 ** -k, self.L2 * 2.0 ** -k
        a1 = L1 / 4
        sb = self._s_breaks(0.0, L2, L2 / 2)
        val = self._rect(self._v1_breaks(a1, L1, L1), sb)
        val += self._rect(self._v1_breaks(-L1, -a1, L1), sb)
        val += self._rect(self._v1_breaks(-a1, a1, a1), self._s_breaks(L2 / 2, L2, L2))
        return val

    def run(self) -> ShellQuadResult:
        out = self.outer()
        total = out
        shells = []
        quiet = 0
        for k in range(self.k_max):
            c = self.shell(k)
            shells.append(c)
            total += c
            if abs(c) <= self.tol * abs(total) or (c == 0 and total == 0):
                quiet += 1
                if quiet >= self.stall:
                    return ShellQuadResult(total, out, np.array(shells), True)
            else:
                quiet = 0
        raise SingularityError(f"shell contributions did not settle within {self.k_max} shells")


def singular_fourier(g, b, R1: float, R2: float, c1: float = 1.0, **kw) -> ShellQuadResult:
    return SingularFourier(g, b, R1, R2, c1=c1, **kw).run()


def box_fourier(u: Callable[[np.ndarray], np.ndarray], a, radius: float, nodes: int = 16,
                feature: float | None = None, refine: int = 1) -> complex:
    """``int u(x) exp(-i <a, x>) dx`` over the cube ``[-radius, radius]^d`` (smooth ``u``)."""
    a = np.asarray(a, dtype=float)
    d = a.size
    feature = radius / 4 if feature is None else feature
    axes = []
    for j in range(d):
        h = min(_osc_width(abs(a[j])), feature) / refine
        axes.append(composite_gl(panel_breaks(-radius, radius, h), nodes))
    # loop over the first axis to bound memory
    rest = np.stack(np.meshgrid(*[ax[0] for ax in axes[1:]], indexing="ij"), axis=-1).reshape(-1, d - 1)
    wrest = np.ones(1)
    for ax in axes[1:]:
        wrest = np.multiply.outer(wrest, ax[1]).ravel()
    phase_rest = np.exp(-1j * (rest @ a[1:]))
    x1, w1 = axes[0]
    total = 0.0j
    step = max(1, MAX_POINTS // len(wrest))
    for lo in range(0, len(x1), step):
        xs = x1[lo:lo + step]
        pts = np.empty((len(xs), len(wrest), d))
        pts[:, :, 0] = xs[:, None]
        pts[:, :, 1:] = rest[None]
        vals = u(pts.reshape(-1, d)).reshape(len(xs), len(wrest)) * phase_rest[None, :]
        vals = vals * np.exp(-1j * a[0] * xs)[:, None]
        total += (w1[lo:lo + step] @ vals) @ wrest
    return complex(total)


class TensorGrid:
    """Tensor Gauss-Legendre grid on a box, reusable across frequencies.

    The integrand is sampled once; ``fourier(b)`` then contracts the sampled
    values against the separable phase ``prod_j exp(-i b_j x_j)``, which costs
    one pass over the grid per frequency.
    """

    def __init__(self, lo, hi, width: float, nodes: int = 16):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.axes = [composite_gl(panel_breaks(a, b, width), nodes) for a, b in zip(self.lo, self.hi)]
        self.d = len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(x) for x, _ in self.axes)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*[x for x, _ in self.axes], indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.d)

    def sample(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Values of ``f`` on the grid, shaped like the grid."""
        return np.asarray(f(self.points())).reshape(self.shape)

    def fourier(self, values: np.ndarray, b) -> complex:
        b = np.asarray(b, dtype=float)
        out = values
        # contract the last axis first so the remaining axes keep their order
        for j in reversed(range(self.d)):
            x, w = self.axes[j]
            out = out @ (w * np.exp(-1j * b[j] * x))
        return complex(out)

    def integral(self, values: np.ndarray) -> complex:
        out = values
        for j in reversed(range(self.d)):
            out = out @ self.axes[j][1]
        return complex(out)
