"""Oscillatory integrals with a ``1/w``-type singularity and their large-``tau`` limits.

Three routes are provided and cross-checked against each other:

* the reduced form of ``J_mu(tau)`` (an error-function inner integral and
  a Gauss-Hermite outer integral),
* direct graded quadrature of ``int k(u) exp(-i <u, tau w + p>) / (-i <w, u> + |u|^2) du``,
* closed-form limits of ``tau^((d-1)/2)`` times those integrals.

The main part ``I_1(a)`` and the error term ``E_1(a)`` of the renewal
Fourier decomposition are evaluated with the same graded quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfc

from .errors import DomainError, SingularMatrixError
from .geometry import check_spd, rotation_to_e1
from .quadrature import singular_fourier
from .renewal import renewal_constant


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """``C^infinity`` step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffFunction:
    """Radial cutoff: 1 on ``|t| <= rho``, 0 on ``|t| >= R``, smooth in between."""

    rho: float = 0.5
    R: float = 1.0

    def __post_init__(self):
        if not 0 < self.rho < self.R:
            raise ValueError("need 0 < rho < R")

    def __call__(self, t: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(t, dtype=float), axis=-1)
        return _smoothstep((self.R - r) / (self.R - self.rho))


# ------------------------------------------------------- Gaussian identity


def gauss_fourier_identity_check(n: int, b, nodes: int = 64) -> float:
    """``|(2 pi)^(-n/2) int exp(-|x|^2/2 - i <x, b>) dx - exp(-|b|^2/2)|`` by tensor Gauss-Hermite."""
    b = np.asarray(b, dtype=float).reshape(n)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    # the integral factorizes over coordinates
    val = 1.0 + 0.0j
    for bj in b:
        val *= (w @ np.exp(-1j * bj * x)) / math.sqrt(2 * math.pi)
    return float(abs(val - math.exp(-0.5 * float(b @ b))))


# ----------------------------------------------------------- J_mu reduced


def _as_fn(u, default):
    if u is None:
        return lambda tau: default
    if callable(u):
        return u
    return lambda tau: u


def J_mu_reduced(mu: float, tau: float, u1=None, uprime=None, d: int = 2, nodes: int = 64) -> complex:
    """``J_mu(tau)`` through its reduced one-sided representation.

    ``J_mu(tau) = int exp(-(mu^2 v_1^2 + |v'|^4)/2) exp(-i (tau mu + u_1) v_1 - i <u', v'>)
    / (-i mu v_1 + |v'|^2) dv``.  The substitution ``w_1 = mu v_1`` reduces to
    ``mu = 1`` with ``u_1 -> u_1 / mu``; for ``mu = 1`` and ``T = tau + u_1 > 0``

    ``J_1 = pi (2T)^(-(d-1)/2) int exp(-i <u' / sqrt(2T), y>) exp(-|y|^2/2)
    erfc((|y|^2/(2T) - T)/sqrt 2) dy``,

    evaluated with tensor Gauss-Hermite nodes.  ``u1`` and ``uprime`` may be
    constants or callables of ``tau``.
    """
    if mu == 0:
        raise DomainError("mu must be nonzero")
    if d not in (2, 3):
        raise DomainError("d must be 2 or 3")
    u1_val = float(_as_fn(u1, 0.0)(tau))
    up = np.asarray(_as_fn(uprime, np.zeros(d - 1))(tau), dtype=float).reshape(d - 1)
    T = tau + u1_val / mu
    if not T > 0:
        raise DomainError("tau + u_1/mu must be positive")
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    grids = np.meshgrid(*([x] * (d - 1)), indexing="ij")
    y = np.stack(grids, axis=-1).reshape(-1, d - 1)
    wy = np.ones(1)
    for _ in range(d - 1):
        wy = np.multiply.outer(wy, w).ravel()
    r2 = np.sum(y * y, axis=1)
    vals = np.exp(-1j * (y @ up) / math.sqrt(2 * T)) * erfc((r2 / (2 * T) - T) / math.sqrt(2))
    J1 = math.pi * (2 * T) ** (-(d - 1) / 2) * (wy @ vals)
    return complex(J1 / abs(mu))


def J_mu_limit(mu: float, tau: float, ell_prime, d: int) -> float:
    """Asymptote ``2 pi^((d+1)/2) exp(-|l'|^2/4) / (|mu| tau^((d-1)/2))``."""
    lp = np.asarray(ell_prime, dtype=float)
    return 2 * math.pi ** ((d + 1) / 2) * math.exp(-0.25 * float(lp @ lp)) / (abs(mu) * tau ** ((d - 1) / 2))


def J_mu_direct(mu: float, tau: float, u1=None, uprime=None, d: int = 2, **kw) -> complex:
    """``J_mu(tau)`` by graded quadrature of its defining integral (no reduction)."""
    if mu == 0:
        raise DomainError("mu must be nonzero")
    u1_val = float(_as_fn(u1, 0.0)(tau))
    up = np.asarray(_as_fn(uprime, np.zeros(d - 1))(tau), dtype=float).reshape(d - 1)

    def g(v):
        s2 = np.sum(v[:, 1:] ** 2, axis=1)
        den = -1j * mu * v[:, 0] + s2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-0.5 * ((mu * v[:, 0]) ** 2 + s2 * s2)) / den
        return np.where(den == 0, 0.0, out)

    b = np.concatenate([[tau * mu + u1_val], up])
    R1 = 9.0 / abs(mu)
    return singular_fourier(g, b, R1=R1, R2=2.6, c1=abs(mu), feature=0.5, **kw).value


# -------------------------------------------------- generic oscillatory form


def prop_equivalent_limit(w_vec, frak_P, k0: float) -> float:
    """``2 pi^((d+1)/2) / |w| * k0 * exp(-(|P|^2 |w|^2 - <P, w>^2) / (4 |w|^2))``."""
    w = np.asarray(w_vec, dtype=float).reshape(-1)
    P = np.asarray(frak_P, dtype=float).reshape(w.shape)
    nw2 = float(w @ w)
    if nw2 == 0.0:
        raise DomainError("w must be nonzero")
    d = w.size
    expo = min(-(float(P @ P) * nw2 - float(P @ w) ** 2) / (4 * nw2), 0.0)
    return 2 * math.pi ** ((d + 1) / 2) / math.sqrt(nw2) * k0 * math.exp(expo)


def oscillatory_integral_direct(k: Callable[[np.ndarray], np.ndarray], w_vec, tau: float,
                                p=None, support: float = 1.0, feature: float | None = None,
                                **kw) -> complex:
    """``int k(u) exp(-i <u, tau w + p(tau)>) / (-i <w, u> + |u|^2) du`` by graded quadrature.

    ``k`` is vectorized over rows and vanishes (or is negligible) outside the
    ball of radius ``support``.  Coordinates are rotated so that ``w`` lies on
    the first axis, where the singular factor is ``1/(-i |w| v_1 + |v|^2)``.
    """
    w = np.asarray(w_vec, dtype=float).reshape(-1)
    d = w.size
    if d not in (2, 3):
        raise DomainError("direct quadrature supports d = 2 and d = 3")
    if np.linalg.norm(w) == 0:
        raise DomainError("w must be nonzero")
    if tau > 1e3:
        raise DomainError("direct quadrature is limited to tau <= 1e3")
    pv = np.asarray(_as_fn(p, np.zeros(d))(tau), dtype=float).reshape(d)
    U = rotation_to_e1(w)
    nw = float(np.linalg.norm(w))

    def g(v):
        den = -1j * nw * v[:, 0] + np.sum(v * v, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = k(v @ U) / den
        return np.where(den == 0, 0.0, out)

    b = U @ (tau * w + pv)
    return singular_fourier(g, b, R1=support, R2=support, c1=nw,
                            feature=feature if feature is not None else support / 4, **kw).value


# --------------------------------------------------------- main part I_1


@dataclass(frozen=True)
class LadderReport:
    taus: np.ndarray
    scaled: np.ndarray
    limit: float

    @property
    def ratios(self) -> np.ndarray:
        return self.scaled / self.limit

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.ratios - 1.0)

    def rows(self) -> list[tuple]:
        return [(float(t), float(s), self.limit, float(s / self.limit))
                for t, s in zip(self.taus, self.scaled)]


def _eig_factors(sigma):
    try:
        lam, P = check_spd(sigma)
    except SingularMatrixError as exc:
        raise DomainError(str(exc)) from exc
    return lam, P


def I1_main_part(L0: float, m, sigma, chi: CutoffFunction, a, h0: complex = 1.0, **kw) -> complex:
    """``h0 L0 int chi(t) exp(-i <t, a>) / (-i <m, t> + <Sigma t, t>/2) dt``.

    Uses ``t = P Delta^{-1} u`` (``Sigma = P Delta^2 P^T``), which turns the
    denominator into ``(-i <w, u> + |u|^2)/2`` with ``w = 2 Delta^{-1} P^T m``,
    and then the graded quadrature in coordinates aligned with ``w``.
    """
    m = np.asarray(m, dtype=float).reshape(-1)
    if h0 == 0:
        return 0.0j
    lam, P = _eig_factors(sigma)
    Dinv = 1.0 / np.sqrt(lam)
    M = P * Dinv[None, :]            # t = M u
    w = 2 * Dinv * (P.T @ m)
    b = M.T @ np.asarray(a, dtype=float)   # <t, a> = <u, M^T a>
    U = rotation_to_e1(w)
    nw = float(np.linalg.norm(w))
    support = chi.R * float(np.sqrt(lam.max()))

    def g(v):
        u = v @ U
        den = -1j * nw * v[:, 0] + np.sum(v * v, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = chi(u @ M.T) / den
        return np.where(den == 0, 0.0, out)

    feature = (chi.R - chi.rho) * float(np.sqrt(lam.min())) / 2
    val = singular_fourier(g, U @ b, R1=support, R2=support, c1=nw, feature=feature, **kw).value
    return complex(2 * h0 * L0 * np.prod(Dinv) * val)


def i1_limit_check(L0: float, m, sigma, chi: CutoffFunction, frak_A=None,
                   taus: Sequence[float] = (50, 100, 200, 400), h0: float = 1.0, **kw) -> LadderReport:
    """Ladder of ``tau^((d-1)/2) |I_1(a(tau))|`` against ``(2 pi)^((d+1)/2) C h0``."""
    m = np.asarray(m, dtype=float).reshape(-1)
    d = m.size
    fa = np.zeros(d) if frak_A is None else np.asarray(frak_A, dtype=float)
    limit = (2 * math.pi) ** ((d + 1) / 2) * renewal_constant(L0, m, sigma, fa) * h0
    scaled = []
    for tau in taus:
        a = tau * m + math.sqrt(tau) * fa
        scaled.append(tau ** ((d - 1) / 2) * abs(I1_main_part(L0, m, sigma, chi, a, h0, **kw)))
    return LadderReport(np.asarray(taus, dtype=float), np.array(scaled), limit)


# ------------------------------------------------------------ error term E_1


@dataclass(frozen=True)
class GaussianSurrogate:
    """``lambda(t) = exp(i <t, m> - <Sigma_c t, t>/2)`` with ``Sigma_c = Sigma - m m^T``."""

    m: np.ndarray
    sigma: np.ndarray

    @property
    def sigma_c(self) -> np.ndarray:
        return np.asarray(self.sigma) - np.outer(self.m, self.m)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(t)
        q = np.einsum("ni,ij,nj->n", t, self.sigma_c, t)
        return np.exp(1j * (t @ self.m) - 0.5 * q)


def _phi3(z: np.ndarray) -> np.ndarray:
    """``exp(z) - 1 - z - z^2/2`` without cancellation for small ``|z|``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    # Taylor series to order 12 is exact to rounding for |z| < 0.1
    term = zs ** 3 / 6
    acc = term.copy()
    for n in range(4, 13):
        term = term * zs / n
        acc += term
    out[small] = acc
    zb = z[~small]
    out[~small] = np.expm1(zb) - zb - zb * zb / 2
    return out


def e1_integrand(lam: GaussianSurrogate, chi: CutoffFunction, h0: float = 1.0):
    """Integrand of ``E_1`` for the surrogate with ``h_hat = h0``, ``L = 1``.

    The first piece reduces to ``-h0 chi``; the second is
    ``h0 chi N / ((1 - lambda) v~)`` with ``N = lambda - 1 - i<m,t> + <Sigma t,t>/2``
    computed as ``phi3(z) - i <m,t> q / 2 + q^2 / 8``.
    """
    m = np.asarray(lam.m, dtype=float)
    sigma = np.asarray(lam.sigma, dtype=float)
    sc = lam.sigma_c

    def g(t):
        mt = t @ m
        q = np.einsum("ni,ij,nj->n", t, sc, t)
        z = 1j * mt - 0.5 * q
        num = _phi3(z) - 0.5j * mt * q + q * q / 8
        one_minus = -np.expm1(z)
        vt = -1j * mt + 0.5 * np.einsum("ni,ij,nj->n", t, sigma, t)
        den = one_minus * vt
        with np.errstate(divide="ignore", invalid="ignore"):
            second = num / den
        second = np.where(den == 0, 0.0, second)
        return h0 * chi(t) * (second - 1.0)

    return g


def E1_value(lam: GaussianSurrogate, chi: CutoffFunction, a, h0: float = 1.0, **kw) -> complex:
    m = np.asarray(lam.m, dtype=float)
    sigma = np.asarray(lam.sigma, dtype=float)
    T = rotation_to_e1(m)
    rot = GaussianSurrogate(T @ m, T @ sigma @ T.T)
    g = e1_integrand(rot, chi, h0)
    nm = float(np.linalg.norm(m))
    c1 = nm / max(0.5 * float(np.linalg.eigvalsh(rot.sigma[1:, 1:])[0]), 1e-300) if m.size > 1 else nm
    b = T @ np.asarray(a, dtype=float)
    return singular_fourier(g, b, R1=chi.R, R2=chi.R, c1=c1,
                            feature=(chi.R - chi.rho) / 2, **kw).value


@dataclass(frozen=True)
class DecayReport:
    taus: np.ndarray
    scaled: np.ndarray

    @property
    def decrease(self) -> float:
        """Relative drop from the first to the last ladder point."""
        return float(1.0 - self.scaled[-1] / self.scaled[0])

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.scaled) < 0))

    def rows(self) -> list[tuple]:
        return [(float(t), float(s)) for t, s in zip(self.taus, self.scaled)]


def E1_decay_check(lam: GaussianSurrogate, chi: CutoffFunction,
                   taus: Sequence[float] = (50, 100, 200), h0: float = 1.0, **kw) -> DecayReport:
    """``|a|^((d-1)/2) |E_1(a)|`` along ``a = tau m``."""
    m = np.asarray(lam.m, dtype=float)
    d = m.size
    scaled = []
    for tau in taus:
        a = tau * m
        scaled.append(np.linalg.norm(a) ** ((d - 1) / 2) * abs(E1_value(lam, chi, a, h0, **kw)))
    return DecayReport(np.asarray(taus, dtype=float), np.array(scaled))
