"""Fourier operators of finite chains and their dominant eigenvalue.

For a frequency ``t`` the operator ``M(t)[x, y] = P[x, y] exp(i <t, xi(y)>)``
satisfies ``E_mu[exp(i <t, S_n>) f(X_n)] = mu^T M(t)^n f``.  Near ``t = 0``
it has a simple dominant eigenvalue ``lambda(t)`` with ``-i grad lambda(0) = m``
and ``-Hess lambda(0) = Sigma``; the routines here extract ``lambda(t)`` by
power iteration and check those identities by finite differences.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (BandError, ConsistencyError, DecompositionError,
                     DifferentiationError, SpectralGapError)
from .geometry import rotation_to_e1, w_abs
from .markov_models import FiniteChain, longrun_sigma, mean_vector, stationary_dist

GAP_RATIO = 0.999
EIG_TOL = 1e-12
MAX_ITER = 100_000
FD_STEP = 1e-4


@dataclass(frozen=True)
class FourierOperator:
    t: np.ndarray
    M: np.ndarray
    pi: np.ndarray

    @property
    def n_states(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class EigenTriple:
    """Dominant eigen-data, normalized by ``pi . right = 1`` and ``left . right = 1``."""

    lam: complex
    right: np.ndarray
    left: np.ndarray
    gap_ratio: float
    second_modulus: float
    iterations: int

    def residual(self, M: np.ndarray) -> float:
        return float(np.linalg.norm(M @ self.right - self.lam * self.right))


def fourier_operator(chain: FiniteChain, t) -> FourierOperator:
    t = np.asarray(t, dtype=float).reshape(chain.d)
    phase = np.exp(1j * (chain.xi @ t))
    M = chain.P * phase[None, :]
    return FourierOperator(t=t, M=M, pi=stationary_dist(chain))


def _power(M: np.ndarray, x: np.ndarray, max_iter: int) -> tuple[complex, np.ndarray, int]:
    """Power iteration returning ``(rayleigh estimate, unit vector, iterations)``."""
    x = x / np.linalg.norm(x)
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        y = M @ x
        lam = np.vdot(x, y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0j, x, it
        x_new = y / ny
        # fix the phase so that the iterate converges as a vector
        k = np.argmax(np.abs(x_new))
        x_new = x_new * (abs(x_new[k]) / x_new[k])
        resid = np.linalg.norm(M @ x_new - lam * x_new)
        done = abs(lam - lam_old) <= EIG_TOL * max(1.0, abs(lam)) and resid <= 1e-11 * max(1.0, abs(lam))
        x, lam_old = x_new, lam
        if done:
            return complex(np.vdot(x, M @ x)), x, it
    raise SpectralGapError(f"power iteration did not converge in {max_iter} iterations")


def _growth_rate(B: np.ndarray, n_burn: int = 64, n_span: int = 64, seed_vec=None) -> float:
    """Spectral radius of ``B`` from the norm growth of ``B^n x``."""
    n = B.shape[0]
    x = np.ones(n, dtype=complex) if seed_vec is None else seed_vec.astype(complex)
    x = x + 0.37j * np.arange(n)  # avoid accidental orthogonality to eigenvectors
    x /= np.linalg.norm(x)
    log_norm = 0.0
    for _ in range(n_burn):
        x = B @ x
        nx = np.linalg.norm(x)
        if nx < 1e-300:
            return 0.0
        x /= nx
    for _ in range(n_span):
        x = B @ x
        nx = np.linalg.norm(x)
        if nx < 1e-300:
            return 0.0
        log_norm += np.log(nx)
        x /= nx
    return float(np.exp(log_norm / n_span))


def dominant_eig(op: FourierOperator, max_iter: int = MAX_ITER) -> EigenTriple:
    """Dominant eigenvalue and eigenvectors of ``M(t)`` by power iteration.

    The left vector is obtained by power iteration on ``M^T``; the spectral
    gap is measured on the deflated operator ``M - lambda r l^T``.

    Raises
    ------
    SpectralGapError
        If iteration does not converge or ``|lambda_2| / |lambda| >= 0.999``.
    """
    M = op.M
    n = M.shape[0]
    lam_r, right, it_r = _power(M, np.ones(n, dtype=complex), max_iter)
    lam_l, left, it_l = _power(M.T, op.pi.astype(complex), max_iter)
    norm_r = op.pi @ right
    if abs(norm_r) < 1e-14:
        raise SpectralGapError("right eigenvector is orthogonal to pi")
    right = right / norm_r
    pair = left @ right
    if abs(pair) < 1e-14:
        raise SpectralGapError("left and right eigenvectors are orthogonal")
    left = left / pair
    lam = complex(left @ (M @ right))
    second = _growth_rate(M - lam * np.outer(right, left)) if n > 1 else 0.0
    ratio = second / abs(lam) if lam != 0 else np.inf
    if ratio >= GAP_RATIO:
        raise SpectralGapError(f"no spectral gap: |lambda_2|/|lambda| = {ratio:.6f}")
    return EigenTriple(lam=lam, right=right, left=left, gap_ratio=float(ratio),
                       second_modulus=float(second), iterations=max(it_r, it_l))


def eigenvalue(chain: FiniteChain, t) -> complex:
    return dominant_eig(fourier_operator(chain, t)).lam


def fourier_expectations(chain: FiniteChain, t, n_max: int, f=None, mu=None) -> np.ndarray:
    """``E_n(t) = mu^T M(t)^n f`` for ``n = 0..n_max``."""
    M = fourier_operator(chain, t).M
    f = chain.f if f is None else np.asarray(f, dtype=float)
    row = (chain.initial_law() if mu is None else np.asarray(mu, dtype=float)).astype(complex)
    out = np.empty(n_max + 1, dtype=complex)
    for n in range(n_max + 1):
        out[n] = row @ f
        row = row @ M
    return out


@dataclass(frozen=True)
class DecompositionReport:
    lam: complex
    L: complex
    remainders: np.ndarray
    second_modulus: float
    fitted_rate: float
    fit_points: int


def decomposition_check(chain: FiniteChain, f=None, t=None, n_max: int = 60) -> DecompositionReport:
    """Split ``E_n(t) = lambda(t)^n L(t) + R_n(t)`` and fit the decay of ``R_n``.

    ``L(t) = (mu . right)(left . f)``.  The geometric rate of ``|R_n|`` is
    fitted by least squares on ``log |R_n|`` over the terms that stand above
    the rounding floor; a rate above ``|lambda_2(t)| + 0.01`` is a failure.
    """
    t = np.zeros(chain.d) if t is None else np.asarray(t, dtype=float)
    f = chain.f if f is None else np.asarray(f, dtype=float)
    op = fourier_operator(chain, t)
    eig = dominant_eig(op)
    mu = chain.initial_law()
    L = complex((mu @ eig.right) * (eig.left @ f))
    E = fourier_expectations(chain, t, n_max, f=f, mu=mu)
    n = np.arange(n_max + 1)
    R = E - eig.lam ** n * L
    floor = 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(E))))
    keep = (np.abs(R) > floor) & (n >= 3)
    if keep.sum() < 3:
        rate = 0.0
    else:
        slope = np.polyfit(n[keep], np.log(np.abs(R[keep])), 1)[0]
        rate = float(np.exp(slope))
    if rate > eig.second_modulus + 0.01:
        raise DecompositionError(
            f"remainder decays at rate {rate:.4f} > |lambda_2| + 0.01 = {eig.second_modulus + 0.01:.4f}")
    return DecompositionReport(lam=eig.lam, L=L, remainders=R, second_modulus=eig.second_modulus,
                               fitted_rate=rate, fit_points=int(keep.sum()))


def _central_grad(lam_fn, d: int, h: float) -> np.ndarray:
    g = np.empty(d, dtype=complex)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        g[j] = (lam_fn(e) - lam_fn(-e)) / (2 * h)
    return g


def grad_lambda_zero(chain: FiniteChain, h: float = FD_STEP) -> np.ndarray:
    """``-i grad lambda(0)`` by central differences with one Richardson step.

    Raises ``ConsistencyError`` when it differs from the stationary mean by
    more than ``1e-4``.
    """
    lam_fn = lambda t: eigenvalue(chain, t)  # noqa: E731
    d = chain.d
    g = (4 * _central_grad(lam_fn, d, h / 2) - _central_grad(lam_fn, d, h)) / 3
    m_fd = (-1j * g).real
    m = np.asarray(chain.xi).T @ stationary_dist(chain)
    if np.linalg.norm(m_fd - m) > 1e-4:
        raise ConsistencyError(f"-i grad lambda(0) = {m_fd} disagrees with the stationary mean {m}")
    return m_fd


def hess_lambda_zero(chain: FiniteChain, h: float = FD_STEP) -> np.ndarray:
    """``-Hess lambda(0)`` by nested central differences.

    Each column is differenced independently, so the raw estimate need not
    be symmetric; asymmetry or an imaginary part above ``1e-6`` signals an
    unstable step.  The symmetrized result must match the long-run
    covariance within ``1e-4`` (Frobenius).
    """
    lam_fn = lambda t: eigenvalue(chain, t)  # noqa: E731
    d = chain.d
    H = np.empty((d, d), dtype=complex)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        plus = _central_grad(lambda s: lam_fn(s + e), d, h)
        minus = _central_grad(lambda s: lam_fn(s - e), d, h)
        H[i] = (plus - minus) / (2 * h)
    if np.max(np.abs(H - H.T)) > 1e-6 or np.max(np.abs(H.imag)) > 1e-6:
        raise DifferentiationError("finite-difference Hessian is unstable (asymmetric or complex)")
    sigma_fd = -0.5 * (H.real + H.real.T)
    sigma = longrun_sigma(chain)
    if np.linalg.norm(sigma_fd - sigma) > 1e-4:
        raise ConsistencyError("-Hess lambda(0) disagrees with the long-run covariance")
    return sigma_fd


@dataclass(frozen=True)
class TaylorReport:
    radii: np.ndarray
    residuals: np.ndarray   # max over directions of |lambda - quadratic model| / |t|^2
    fitted_order: float


def _rotated_lambda(chain: FiniteChain):
    m = mean_vector(chain)
    T = rotation_to_e1(m)
    sigma = T @ longrun_sigma(chain) @ T.T
    return (lambda s: eigenvalue(chain, T.T @ s)), float(np.linalg.norm(m)), sigma


def _default_directions(d: int) -> np.ndarray:
    dirs = [np.eye(d)[j] for j in range(d)]
    dirs.append(np.ones(d) / np.sqrt(d))
    alt = np.ones(d)
    alt[0] = -1.0
    dirs.append(alt / np.sqrt(d))
    return np.array(dirs)


def taylor_check(chain: FiniteChain, t_samples=None, radii=(1e-1, 1e-2, 1e-3)) -> TaylorReport:
    """Second-order expansion ``1 + i|m| t_1 - <Sigma t, t>/2`` in drift-aligned coordinates.

    ``t_samples`` are unit directions (defaults to the axes and two diagonals);
    the fitted order is the log-log slope of ``|residual|`` against ``|t|``,
    so a value near 3 means an ``O(|t|^3)`` remainder.
    """
    lam_fn, mnorm, sigma = _rotated_lambda(chain)
    d = chain.d
    dirs = _default_directions(d) if t_samples is None else np.atleast_2d(t_samples)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.asarray(radii, dtype=float)
    raw = np.zeros(len(radii))
    for i, r in enumerate(radii):
        if r == 0.0:
            continue
        for u in dirs:
            s = r * u
            model = 1 + 1j * mnorm * s[0] - 0.5 * s @ sigma @ s
            raw[i] = max(raw[i], abs(lam_fn(s) - model))
    pos = (radii > 0) & (raw > 0)
    order = float(np.polyfit(np.log(radii[pos]), np.log(raw[pos]), 1)[0]) if pos.sum() >= 2 else np.inf
    scaled = np.where(radii > 0, raw / np.where(radii > 0, radii, 1.0) ** 2, 0.0)
    return TaylorReport(radii=radii, residuals=scaled, fitted_order=order)


def v0_band_constants(chain: FiniteChain, R: float, n_radii: int = 24, n_dirs: int = 24,
                      r_min: float = 1e-4) -> tuple[float, float]:
    """Empirical ``(alpha, beta)`` with ``alpha |w(t)| <= |1 - lambda(t)| <= beta |w(t)|``.

    The punctured ball ``0 < |t| <= R`` is sampled on a log-radial grid in
    drift-aligned coordinates.
    """
    if not R > r_min:
        raise ValueError("need R > r_min")
    lam_fn, _, _ = _rotated_lambda(chain)
    d = chain.d
    if d == 2:
        ang = 2 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        # Fibonacci points on the sphere, padded with zeros beyond three coordinates
        k = np.arange(n_dirs) + 0.5
        z = 1 - 2 * k / n_dirs
        phi = np.pi * (1 + 5 ** 0.5) * k
        rho = np.sqrt(1 - z ** 2)
        dirs = np.zeros((n_dirs, d))
        dirs[:, :3] = np.stack([z, rho * np.cos(phi), rho * np.sin(phi)], axis=1)
    radii = np.geomspace(r_min, R, n_radii)
    ratios = []
    for r in radii:
        for u in dirs:
            s = r * u
            ratios.append(abs(1 - lam_fn(s)) / w_abs(s))
    alpha, beta = float(np.min(ratios)), float(np.max(ratios))
    if alpha < 1e-8:
        raise BandError(f"band constant alpha = {alpha:.3g}; R is too large")
    return alpha, beta


def lambda_grid(chain: FiniteChain, t_grid, workers: int = 1) -> list[tuple]:
    """Rows ``(t..., Re lambda, Im lambda, |lambda|, Re L, Im L)`` in grid order."""
    t_grid = np.atleast_2d(np.asarray(t_grid, dtype=float))
    mu = chain.initial_law()
    f = chain.f

    def row(t):
        eig = dominant_eig(fourier_operator(chain, t))
        L = (mu @ eig.right) * (eig.left @ f)
        return (*t.tolist(), eig.lam.real, eig.lam.imag, abs(eig.lam), L.real, L.imag)

    if workers <= 1:
        return [row(t) for t in t_grid]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(row, t_grid))
