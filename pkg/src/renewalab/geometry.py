"""Vector and matrix primitives for anisotropic (parabolic) analysis.

Points are plain ``numpy`` arrays whose last axis holds the ``d`` coordinates,
so every function here accepts a single point of shape ``(d,)`` or a batch of
shape ``(..., d)``.  The first coordinate plays the role of the drift axis and
the remaining ``d - 1`` coordinates are the transverse part.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, SingularMatrixError, ZeroDriftError

AnnulusKind = Literal["gamma", "gamma_tilde", "general"]


def first(x: np.ndarray) -> np.ndarray:
    """Drift-axis coordinate ``x_1``."""
    return np.asarray(x)[..., 0]


def tail(x: np.ndarray) -> np.ndarray:
    """Transverse coordinates ``(x_2, ..., x_d)``."""
    return np.asarray(x)[..., 1:]


def _check_dim(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise DimensionError(f"points must have dimension d >= 2, got shape {x.shape}")
    return x


def w_eval(x: np.ndarray) -> np.ndarray | complex:
    """Anisotropic weight ``w(x) = -i x_1 + |x'|^2``."""
    x = _check_dim(x)
    out = -1j * x[..., 0] + np.sum(x[..., 1:] ** 2, axis=-1)
    return complex(out) if np.ndim(out) == 0 else out


def w_abs(x: np.ndarray) -> np.ndarray:
    """``|w(x)| = sqrt(x_1^2 + |x'|^4)`` without forming the complex number."""
    x = _check_dim(x)
    return np.hypot(x[..., 0], np.sum(x[..., 1:] ** 2, axis=-1))


def dilate(x: np.ndarray, k: int) -> np.ndarray:
    """Parabolic dilation ``D_k x = (x_1 / 4^k, x_2 / 2^k, ..., x_d / 2^k)``.

    Negative ``k`` gives the inverse dilation.  Powers of two are exact in
    binary floating point, so ``w(D_k x) = 4^{-k} w(x)`` holds to rounding.
    """
    x = np.asarray(x, dtype=float)
    scale = np.full(x.shape[-1], np.ldexp(1.0, -int(k)))
    scale[0] = np.ldexp(1.0, -2 * int(k))
    return x * scale


def dilation_factors(d: int, k: float) -> np.ndarray:
    """Diagonal of ``D_k`` as an array (``k`` may be fractional)."""
    f = np.full(d, 2.0 ** (-k))
    f[0] = 4.0 ** (-k)
    return f


def rotation_to_e1(m: np.ndarray) -> np.ndarray:
    """Orthogonal ``T`` with ``T m = |m| e_1`` (Householder reflection).

    When ``m`` is already a positive multiple of ``e_1`` the identity is
    returned; a negative multiple gives ``-I``.
    """
    m = _check_dim(m)
    if m.ndim != 1:
        raise DimensionError("rotation_to_e1 expects a single vector")
    norm = np.linalg.norm(m)
    if norm == 0.0:
        raise ZeroDriftError("cannot rotate the zero vector onto e1")
    d = m.size
    u = m / norm
    e1 = np.zeros(d)
    e1[0] = 1.0
    if np.linalg.norm(u + e1) < 1e-15:
        return -np.eye(d)
    v = u - e1
    tail2 = float(u[1:] @ u[1:])
    if u[0] > 0:
        # u_0 - 1 without cancellation when u is close to e_1
        v[0] = -tail2 / (u[0] + 1.0)
    vv = v @ v
    if vv < 1e-30:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(v, v) / vv


def sym_eig(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition ``sigma = P diag(lam) P^T`` of a symmetric matrix."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {sigma.shape}")
    sym = 0.5 * (sigma + sigma.T)
    if not np.allclose(sym, sigma, atol=1e-12, rtol=0.0):
        raise SingularMatrixError("matrix is not symmetric to 1e-12")
    return np.linalg.eigh(sym)


def check_spd(sigma: np.ndarray, rel_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Return the eigen-factors of ``sigma`` or raise if it is near-singular."""
    lam, P = sym_eig(sigma)
    if lam[-1] <= 0.0 or lam[0] <= rel_tol * lam[-1]:
        raise SingularMatrixError(
            f"matrix is not positive-definite (eigenvalues {lam[0]:.3g} .. {lam[-1]:.3g})"
        )
    return lam, P


def inv_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root ``S = sigma^{-1/2}``."""
    lam, P = check_spd(sigma)
    S = (P / np.sqrt(lam)) @ P.T
    return 0.5 * (S + S.T)


def sqrt_psd(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a positive semi-definite matrix (zero allowed)."""
    lam, P = sym_eig(cov)
    if lam[0] < -1e-12 * max(1.0, abs(lam[-1])):
        raise SingularMatrixError("covariance has a negative eigenvalue")
    root = (P * np.sqrt(np.clip(lam, 0.0, None))) @ P.T
    return 0.5 * (root + root.T)


@dataclass(frozen=True)
class Annulus:
    """Anisotropic annulus ``{lo / 4^k <= |w(x)| <= hi / 4^k}``.

    ``gamma`` uses the band ``[1/4, 1]``, ``gamma_tilde`` the enlarged band
    ``[1/8, 2]``; ``general`` takes ``omega``/``omega_prime`` explicitly.
    """

    k: int = 0
    kind: AnnulusKind = "gamma"
    omega: float | None = None
    omega_prime: float | None = None

    def band(self) -> tuple[float, float]:
        if self.kind == "gamma":
            lo, hi = 0.25, 1.0
        elif self.kind == "gamma_tilde":
            lo, hi = 0.125, 2.0
        elif self.kind == "general":
            if self.omega is None or self.omega_prime is None:
                raise ValueError("general annulus needs omega and omega_prime")
            if not 0.0 < self.omega < self.omega_prime:
                raise ValueError("need 0 < omega < omega_prime")
            lo, hi = float(self.omega), float(self.omega_prime)
        else:
            raise ValueError(f"unknown annulus kind {self.kind!r}")
        s = 4.0 ** (-self.k)
        return lo * s, hi * s

    def contains(self, x: np.ndarray) -> np.ndarray | bool:
        return annulus_contains(self, x)


def annulus_contains(ann: Annulus, x: np.ndarray) -> np.ndarray | bool:
    """Closed band test on ``|w(x)|``; the origin belongs to no annulus."""
    lo, hi = ann.band()
    r = w_abs(x)
    out = (r >= lo) & (r <= hi)
    return bool(out) if np.ndim(out) == 0 else out
