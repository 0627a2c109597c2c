"""Markov random walk generators with analytic drift and long-run covariance.

Two families are provided:

* :class:`FiniteChain` -- a finite ergodic chain with a vector-valued
  functional ``xi`` attached to each state,
* :class:`ARModel` -- the Gaussian autoregressive model
  ``X_n = A X_{n-1} + noise_n`` with ``xi(x) = x``.

In both cases the additive component is ``S_n = xi(X_1) + ... + xi(X_n)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from . import rng as rng_mod
from .errors import ContractionError, ErgodicityError, ZeroDriftError
from .geometry import sqrt_psd

LATTICE_THRESHOLD = 1.0 - 1e-9


class DegenerateCovarianceWarning(UserWarning):
    """Long-run covariance is singular; the nonlattice prerequisite fails."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteChain:
    """Finite-state Markov chain with per-state increments ``xi``.

    ``mu`` defaults to the stationary law and ``f`` to the all-ones weight.
    """

    P: np.ndarray
    xi: np.ndarray
    mu: np.ndarray | None = None
    f: np.ndarray | None = None

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"P must be square, got shape {P.shape}")
        n = P.shape[0]
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValueError("P must be row-stochastic (rows sum to 1 +- 1e-12)")
        if xi.ndim == 1:
            xi = xi[:, None]
        if xi.shape[0] != n:
            raise ValueError(f"xi needs one row per state ({n}), got {xi.shape[0]}")
        object.__setattr__(self, "P", _frozen(P))
        object.__setattr__(self, "xi", _frozen(xi))
        if self.mu is not None:
            mu = np.asarray(self.mu, dtype=float)
            if mu.shape != (n,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
                raise ValueError("mu must be a probability vector over the states")
            object.__setattr__(self, "mu", _frozen(mu))
        f = np.ones(n) if self.f is None else np.asarray(self.f, dtype=float)
        if f.shape != (n,) or np.any(f < 0):
            raise ValueError("f must be a nonnegative weight per state")
        object.__setattr__(self, "f", _frozen(f))

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def d(self) -> int:
        return self.xi.shape[1]

    def initial_law(self) -> np.ndarray:
        return stationary_dist(self) if self.mu is None else np.asarray(self.mu)


@dataclass(frozen=True)
class ARModel:
    """Gaussian AR(1) model ``X_n = A X_{n-1} + noise_n`` with ``xi(x) = x``.

    ``x0=None`` starts from the exact Gaussian stationary law.
    """

    A: np.ndarray
    noise_mean: np.ndarray
    noise_cov: np.ndarray
    x0: np.ndarray | None = None
    noise_law: str = "gaussian"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d):
            raise ValueError(f"A must be square, got shape {A.shape}")
        mean = np.asarray(self.noise_mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ValueError("noise_mean/noise_cov do not match the dimension of A")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("noise_cov must be symmetric")
        if self.noise_law != "gaussian":
            raise ValueError(f"unsupported noise law {self.noise_law!r}")
        if np.linalg.norm(A, 2) >= 1.0:
            raise ContractionError(f"|A|_op = {np.linalg.norm(A, 2):.6g} >= 1")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "noise_mean", _frozen(mean))
        object.__setattr__(self, "noise_cov", _frozen(cov))
        if self.x0 is not None:
            object.__setattr__(self, "x0", _frozen(np.asarray(self.x0).reshape(d)))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def stationary_cov(self) -> np.ndarray:
        """``Gamma_0`` solving ``Gamma_0 = A Gamma_0 A^T + noise_cov``."""
        g = solve_discrete_lyapunov(self.A, self.noise_cov)
        return 0.5 * (g + g.T)


Model = Union[FiniteChain, ARModel]


@dataclass(frozen=True)
class Trajectory:
    """States ``X_0..X_N`` and partial sums ``S_0..S_N`` (``S_0 = 0``)."""

    states: np.ndarray
    sums: np.ndarray
    increments: np.ndarray = field(repr=False)

    @property
    def n_steps(self) -> int:
        return self.sums.shape[0] - 1


# ---------------------------------------------------------------- chains


def _is_primitive(P: np.ndarray) -> bool:
    n = P.shape[0]
    pattern = (P > 0).astype(np.int64)
    power = pattern.copy()
    for _ in range(n * n):
        if np.all(power > 0):
            return True
        power = np.minimum(power @ pattern, 1)
    return bool(np.all(power > 0))


def stationary_dist(chain: FiniteChain) -> np.ndarray:
    """Invariant law ``pi`` of an irreducible aperiodic chain."""
    P = np.asarray(chain.P)
    if not _is_primitive(P):
        raise ErgodicityError("chain is reducible or periodic (no strictly positive power)")
    n = P.shape[0]
    system = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    # one step of iterative refinement
    resid = rhs - system @ pi
    pi = pi + np.linalg.lstsq(system, resid, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def fundamental_matrix(chain: FiniteChain) -> np.ndarray:
    """``Z = (I - P + 1 pi^T)^{-1}``."""
    P = np.asarray(chain.P)
    pi = stationary_dist(chain)
    n = P.shape[0]
    return np.linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))


def _check_drift(m: np.ndarray, scale: float) -> np.ndarray:
    if np.linalg.norm(m) <= 1e-14 * max(scale, 1.0):
        raise ZeroDriftError("drift vector m is zero (centered case is out of scope)")
    return m


def mean_vector(model: Model) -> np.ndarray:
    """Drift ``m``: stationary mean of the increment functional."""
    if isinstance(model, FiniteChain):
        pi = stationary_dist(model)
        m = pi @ model.xi
        return _check_drift(m, float(np.abs(model.xi).max()))
    if isinstance(model, ARModel):
        d = model.d
        m = np.linalg.solve(np.eye(d) - model.A, model.noise_mean)
        return _check_drift(m, float(np.abs(model.noise_mean).max()))
    raise TypeError(f"unsupported model type {type(model).__name__}")


def centered_longrun_cov(model: Model) -> np.ndarray:
    """``lim (1/n) E[S_{n,c} S_{n,c}^T]`` for the centered sums."""
    if isinstance(model, FiniteChain):
        pi = stationary_dist(model)
        m = pi @ model.xi
        xic = model.xi - m
        D = np.diag(pi)
        Z = fundamental_matrix(model)
        gamma0 = xic.T @ D @ xic
        cross = xic.T @ D @ (Z - np.eye(model.n_states)) @ xic
        out = gamma0 + cross + cross.T
    elif isinstance(model, ARModel):
        g0 = model.stationary_cov()
        inv = np.linalg.inv(np.eye(model.d) - model.A)
        out = inv @ g0 + g0 @ inv.T - g0
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return 0.5 * (out + out.T)


def is_positive_definite(sigma: np.ndarray, rel_tol: float = 1e-12) -> bool:
    lam = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    return bool(lam[-1] > 0 and lam[0] > rel_tol * lam[-1])


def longrun_sigma(model: Model) -> np.ndarray:
    """``Sigma = m m^T + Sigma_c``; warns when the result is singular."""
    m = mean_vector(model)
    sigma = np.outer(m, m) + centered_longrun_cov(model)
    sigma = 0.5 * (sigma + sigma.T)
    if not is_positive_definite(sigma):
        warnings.warn(
            "long-run covariance is not positive-definite; the walk is degenerate",
            DegenerateCovarianceWarning,
            stacklevel=2,
        )
    return sigma


# ------------------------------------------------------------ simulation


def _chain_sampler(chain: FiniteChain):
    cum = np.cumsum(chain.P, axis=1)
    cum[:, -1] = np.inf
    return cum


def _sample_categorical(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return (u[:, None] < cum_rows).argmax(axis=1)


def iter_steps(model: Model, n_steps: int, n_paths: int, gen: np.random.Generator
               ) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Simulate ``n_paths`` independent paths, yielding ``(n, X_n, S_n)``.

    Yields ``n = 0`` first.  For chains ``X_n`` is an integer state array of
    shape ``(n_paths,)``; for AR models it has shape ``(n_paths, d)``.  The
    arrays are reused between steps, so copy them if they must be kept.
    """
    if isinstance(model, FiniteChain):
        cum = _chain_sampler(model)
        mu = model.initial_law()
        mu_cum = np.cumsum(mu)
        mu_cum[-1] = np.inf
        x = _sample_categorical(mu_cum[None, :], gen.random(n_paths))
        s = np.zeros((n_paths, model.d))
        yield 0, x, s
        xi = np.asarray(model.xi)
        for n in range(1, n_steps + 1):
            x = _sample_categorical(cum[x], gen.random(n_paths))
            s += xi[x]
            yield n, x, s
    elif isinstance(model, ARModel):
        d = model.d
        A_T = np.asarray(model.A).T
        noise_root = sqrt_psd(model.noise_cov)
        mean = np.asarray(model.noise_mean)
        if model.x0 is None:
            m = np.linalg.solve(np.eye(d) - model.A, mean)
            x = m + gen.standard_normal((n_paths, d)) @ sqrt_psd(model.stationary_cov())
        else:
            x = np.broadcast_to(np.asarray(model.x0), (n_paths, d)).copy()
        s = np.zeros((n_paths, d))
        yield 0, x, s
        for n in range(1, n_steps + 1):
            x = x @ A_T + mean + gen.standard_normal((n_paths, d)) @ noise_root
            s += x
            yield n, x, s
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")


def simulate_path(model: Model, n_max: int, seed: int, path_index: int = 0) -> Trajectory:
    """One trajectory of length ``n_max`` drawn from stream ``(seed, path_index)``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    gen = rng_mod.stream(seed, path_index)
    states, sums = [], []
    for _, x, s in iter_steps(model, n_max, 1, gen):
        states.append(np.array(x[0], copy=True))
        sums.append(s[0].copy())
    sums_arr = np.array(sums)
    return Trajectory(states=np.array(states), sums=sums_arr, increments=np.diff(sums_arr, axis=0))


def xi_of_states(model: Model, states: np.ndarray) -> np.ndarray:
    if isinstance(model, FiniteChain):
        return np.asarray(model.xi)[np.asarray(states, dtype=int)]
    return np.asarray(states, dtype=float)


# ------------------------------------------------------------ diagnostics


@dataclass(frozen=True)
class NonlatticeReport:
    t: np.ndarray
    spectral_radius: np.ndarray
    flagged: np.ndarray

    @property
    def lattice(self) -> bool:
        """True when some nonzero frequency has spectral radius ~ 1."""
        return bool(self.flagged.any())


def _candidate_frequencies(chain: FiniteChain, radius: float) -> list[np.ndarray]:
    """Frequencies where lattice structure of the increments shows up."""
    d = chain.d
    out = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 2 * np.pi
        out.append(e)
    diffs = chain.xi[1:] - chain.xi[0]
    if diffs.size:
        rank = np.linalg.matrix_rank(diffs, tol=1e-10)
        if rank < d:
            # any direction orthogonal to all differences has a unimodular eigenvalue
            _, _, vt = np.linalg.svd(diffs)
            out.append(0.5 * radius * vt[-1])
        else:
            idx = []
            for i in range(diffs.shape[0]):
                if np.linalg.matrix_rank(diffs[idx + [i]], tol=1e-10) > len(idx):
                    idx.append(i)
                if len(idx) == d:
                    break
            B = diffs[idx].T
            dual = 2 * np.pi * np.linalg.inv(B).T
            out.extend(dual[:, j] for j in range(d))
    else:
        out.append(np.eye(d)[0] * 0.5 * radius)
    return [t for t in out if np.linalg.norm(t) <= radius]


def default_frequency_grid(d: int, radius: float, n_per_axis: int = 9) -> np.ndarray:
    axis = np.linspace(-radius, radius, n_per_axis)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return grid[np.linalg.norm(grid, axis=1) <= radius]


def nonlattice_diagnostic(model: Model, t_grid: np.ndarray | None = None,
                          radius: float = 7.0, n_per_axis: int = 9) -> NonlatticeReport:
    """Spectral-radius scan of the Fourier operators over a frequency grid.

    For a chain, ``Q(t)[x, y] = P[x, y] exp(i <t, xi(y)>)``; for the Gaussian
    AR model the noise characteristic function modulus is used as surrogate.
    A nonzero ``t`` with spectral radius ``>= 1 - 1e-9`` is lattice evidence.
    This is a diagnostic, not a decision procedure.
    """
    if isinstance(model, FiniteChain):
        d = model.d
        if t_grid is None:
            extra = _candidate_frequencies(model, radius)
            t_grid = np.vstack([default_frequency_grid(d, radius, n_per_axis)] + [np.atleast_2d(e) for e in extra])
        t_grid = np.atleast_2d(np.asarray(t_grid, dtype=float))
        P = np.asarray(model.P)
        rad = np.empty(len(t_grid))
        for i, t in enumerate(t_grid):
            M = P * np.exp(1j * (model.xi @ t))[None, :]
            rad[i] = np.max(np.abs(np.linalg.eigvals(M)))
    elif isinstance(model, ARModel):
        d = model.d
        if t_grid is None:
            t_grid = default_frequency_grid(d, radius, n_per_axis)
        t_grid = np.atleast_2d(np.asarray(t_grid, dtype=float))
        C = np.asarray(model.noise_cov)
        rad = np.exp(-0.5 * np.einsum("ni,ij,nj->n", t_grid, C, t_grid))
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    nonzero = np.linalg.norm(t_grid, axis=1) > 0
    flagged = nonzero & (rad >= LATTICE_THRESHOLD)
    return NonlatticeReport(t=t_grid, spectral_radius=rad, flagged=flagged)


def moment_order_md(d: int) -> float:
    """``m_d = max((d - 1) / 2, 2)``."""
    return max((d - 1) / 2.0, 2.0)


@dataclass(frozen=True)
class LimReport:
    contraction: float
    m_d: float
    required_order: float
    moment_estimate: float
    moment_std_err: float
    passed: bool


def lim_hypothesis_report(model: ARModel, eps0: float = 0.5, n_samples: int = 100_000,
                          seed: int = 0, x0: np.ndarray | None = None) -> LimReport:
    """Contraction factor and moment condition for the AR iterative model.

    ``xi(x) = x`` is Lipschitz with constant 1 and no growth (``s = 0``), so
    the required moment order of the one-step displacement is ``m_d + eps0``.
    """
    if not isinstance(model, ARModel):
        raise TypeError("lim_hypothesis_report expects an ARModel")
    contraction = float(np.linalg.norm(model.A, 2))
    if contraction >= 1.0:
        raise ContractionError(f"contraction factor {contraction:.6g} >= 1")
    d = model.d
    md = moment_order_md(d)
    s = 0
    order = (s + 1) * md + eps0
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    gen = rng_mod.stream(seed, 0)
    noise = model.noise_mean + gen.standard_normal((n_samples, d)) @ sqrt_psd(model.noise_cov)
    disp = np.linalg.norm(x0 @ np.asarray(model.A).T + noise - x0, axis=1) ** order
    est = float(disp.mean())
    se = float(disp.std(ddof=1) / np.sqrt(n_samples))
    return LimReport(contraction=contraction, m_d=md, required_order=order,
                     moment_estimate=est, moment_std_err=se,
                     passed=bool(contraction < 1.0 and np.isfinite(est)))
