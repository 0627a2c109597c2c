"""Renewal constant and Monte Carlo estimation of scaled renewal measures.

The quantity estimated is

    V_tau(A) = (2 pi tau)^((d-1)/2) * sum_{n>=1} E[f(X_n) 1_A(S_n - a(tau))],

with ``a(tau) = tau m + sqrt(tau) b(tau)``.  As ``tau`` grows it converges to
``C * Leb(A)`` where ``C`` is given by :func:`renewal_constant`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng as rng_mod
from .errors import (BudgetError, CapabilityError, DomainError, LatticeError,
                     SingularMatrixError, ZeroDriftError)
from .geometry import inv_sqrt
from .markov_models import (ARModel, FiniteChain, Model, centered_longrun_cov,
                            is_positive_definite, iter_steps, mean_vector,
                            nonlattice_diagnostic, stationary_dist)

DEFAULT_CHUNK = 8192
MIN_PATHS = 100


# ------------------------------------------------------------------ inputs


@dataclass(frozen=True)
class DirectionFunction:
    """``a(tau) = tau m + sqrt(tau) b(tau)`` with ``b(tau) -> frak_A``.

    ``b`` defaults to the constant ``frak_A``.
    """

    m: np.ndarray
    frak_A: np.ndarray | None = None
    b: Callable[[float], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(-1)
        object.__setattr__(self, "m", m)
        fa = np.zeros_like(m) if self.frak_A is None else np.asarray(self.frak_A, dtype=float).reshape(m.shape)
        object.__setattr__(self, "frak_A", fa)

    def b_eval(self, tau: float) -> np.ndarray:
        return self.frak_A if self.b is None else np.asarray(self.b(tau), dtype=float).reshape(self.m.shape)


def direction_eval(direction: DirectionFunction, tau: float) -> np.ndarray:
    if not tau > 0:
        raise DomainError("tau must be positive")
    return tau * direction.m + math.sqrt(tau) * direction.b_eval(tau)


@dataclass(frozen=True)
class TargetSet:
    """Half-open axis box ``[c - e, c + e)`` or open ball ``|y - c| < r``.

    Half-open boxes make adjacent boxes disjoint, so estimates are exactly
    additive under splitting.
    """

    kind: str
    center: np.ndarray
    extent: np.ndarray | float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        object.__setattr__(self, "center", c)
        if self.kind == "box":
            e = np.broadcast_to(np.asarray(self.extent, dtype=float), c.shape).copy()
            if np.any(e < 0):
                raise ValueError("box half-widths must be nonnegative")
            object.__setattr__(self, "extent", e)
        elif self.kind == "ball":
            r = float(self.extent)
            if r < 0:
                raise ValueError("ball radius must be nonnegative")
            object.__setattr__(self, "extent", r)
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi) -> "TargetSet":
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        return cls("box", (lo + hi) / 2, (hi - lo) / 2)

    @property
    def d(self) -> int:
        return self.center.size

    def lebesgue(self) -> float:
        if self.kind == "box":
            return float(np.prod(2 * self.extent))
        d = self.d
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.extent ** d

    def circumradius(self) -> float:
        return float(np.linalg.norm(self.extent)) if self.kind == "box" else float(self.extent)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box ``(lo, hi)``."""
        return self.center - self.extent, self.center + self.extent

    def contains(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "box":
            lo, hi = self.center - self.extent, self.center + self.extent
            return np.all((y >= lo) & (y < hi), axis=-1)
        return np.sum((y - self.center) ** 2, axis=-1) < self.extent ** 2


@dataclass(frozen=True)
class RenewalEstimate:
    tau: float
    v_hat: float
    std_err: float
    n_paths: int
    n_max: int
    theory: float
    seed: int

    @property
    def ratio(self) -> float:
        return self.v_hat / self.theory if self.theory > 0 else float("nan")

    def row(self) -> tuple:
        return (self.tau, self.v_hat, self.std_err, self.theory, self.ratio,
                self.n_paths, self.n_max, self.seed)


CSV_HEADER = ("tau", "v_hat", "std_err", "theory", "ratio", "n_paths", "n_max", "seed")


# ------------------------------------------------------------ the constant


def renewal_constant(L0: float, m, sigma, frak_A=None) -> float:
    """``L0 det(S) / |S m| * exp((<Sm, SA>^2 - |Sm|^2 |SA|^2) / (2 |Sm|^2))``, ``S = Sigma^(-1/2)``.

    The exponent is nonpositive by Cauchy-Schwarz and vanishes exactly when
    ``S A`` is parallel to ``S m``.
    """
    m = np.asarray(m, dtype=float).reshape(-1)
    if not L0 > 0:
        raise DomainError("L0 must be positive")
    if np.linalg.norm(m) == 0.0:
        raise DomainError("drift m must be nonzero")
    try:
        S = inv_sqrt(sigma)
    except SingularMatrixError as exc:
        raise DomainError(str(exc)) from exc
    frak_A = np.zeros_like(m) if frak_A is None else np.asarray(frak_A, dtype=float).reshape(m.shape)
    Sm, SA = S @ m, S @ frak_A
    nm2 = Sm @ Sm
    expo = min(((Sm @ SA) ** 2 - nm2 * (SA @ SA)) / (2 * nm2), 0.0)
    return float(L0 * np.linalg.det(S) / math.sqrt(nm2) * math.exp(expo))


def theory_value(model: Model, A: TargetSet, frak_A=None, f=None) -> float:
    """``C * Leb(A)`` for the model, or ``nan`` when the covariance is singular."""
    m = mean_vector(model)
    sigma = np.outer(m, m) + centered_longrun_cov(model)
    if not is_positive_definite(sigma):
        return float("nan")
    L0 = 1.0
    if isinstance(model, FiniteChain):
        w = model.f if f is None else np.asarray(f, dtype=float)
        L0 = float(stationary_dist(model) @ w)
        if L0 == 0.0:
            return 0.0
    return renewal_constant(L0, m, sigma, frak_A) * A.lebesgue()


# -------------------------------------------------------------- truncation


def truncation_horizon(model: Model, tau: float, A: TargetSet, margin_sigmas: float = 12.0,
                       direction: DirectionFunction | None = None) -> int:
    """Number of steps after which visits to ``a(tau) + A`` are negligible.

    Solves ``x |m| - margin * sqrt(lam x) = |a(tau)| + r_A`` for ``x`` and
    returns ``ceil(x) + 1``; ``lam`` is the top eigenvalue of the centered
    long-run covariance and ``r_A`` bounds ``|y|`` over ``y`` in ``A``.
    """
    m = mean_vector(model)
    mn = float(np.linalg.norm(m))
    lam = max(float(np.linalg.eigvalsh(centered_longrun_cov(model))[-1]), 0.0)
    if direction is None:
        reach = tau * mn
    else:
        reach = float(np.linalg.norm(direction_eval(direction, tau)))
    reach += float(np.linalg.norm(A.center)) + A.circumradius()
    # quadratic in s = sqrt(x): mn s^2 - k s - reach = 0
    k = margin_sigmas * math.sqrt(lam)
    s = (k + math.sqrt(k * k + 4 * mn * reach)) / (2 * mn)
    return int(math.ceil(s * s)) + 1


# --------------------------------------------------------------- estimator


def _weights(model: Model, f) -> np.ndarray | None:
    if isinstance(model, FiniteChain):
        w = model.f if f is None else np.asarray(f, dtype=float)
        return None if np.all(w == 1.0) else w
    if f is not None and not np.all(np.asarray(f) == 1.0):
        raise CapabilityError("state weights f are supported for finite chains only")
    return None


def _chunk(model: Model, A: TargetSet, a: np.ndarray, n_max: int, n_rows: int,
           gen: np.random.Generator, weights, n_audit: int) -> tuple[float, float, int]:
    acc = np.zeros(n_rows)
    tail = 0
    lo, hi = A.bounds()
    lo0, hi0 = lo[0] + a[0], hi[0] + a[0]
    for n, x, s in iter_steps(model, max(n_max, n_audit), n_rows, gen):
        if n == 0:
            continue
        first = s[:, 0]
        # cheap rejection: no path is level with the target along the first axis
        if first.max() < lo0 or first.min() > hi0:
            continue
        hit = A.contains(s - a)
        if n <= n_max:
            acc += hit if weights is None else hit * weights[x]
        else:
            tail += int(hit.sum())
    return float(acc.sum()), float(acc @ acc), tail


@dataclass(frozen=True)
class RawSums:
    mean: float
    std_err: float
    n_paths: int
    tail_visits: int


def renewal_sums(model: Model, A: TargetSet, a, n_max: int, n_paths: int, seed: int,
                 f=None, chunk_size: int = DEFAULT_CHUNK, workers: int = 1,
                 n_audit: int = 0) -> RawSums:
    """Path average of ``sum_{n=1}^{n_max} f(X_n) 1_A(S_n - a)`` (no scaling, no checks).

    Paths are split into chunks of ``chunk_size``; chunk ``i`` draws from
    stream ``(seed, i)`` and partial sums are reduced in chunk order, so the
    result does not depend on ``workers``.  When ``n_audit > n_max`` the
    walk is continued to ``n_audit`` and visits in ``(n_max, n_audit]`` are
    counted in ``tail_visits``.
    """
    if n_paths < 1:
        raise BudgetError("n_paths must be positive")
    a = np.asarray(a, dtype=float)
    weights = _weights(model, f)
    sizes = [min(chunk_size, n_paths - lo) for lo in range(0, n_paths, chunk_size)]

    def run(i):
        return _chunk(model, A, a, n_max, sizes[i], rng_mod.stream(seed, i), weights, n_audit)

    if workers <= 1:
        parts = [run(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    total = sumsq = 0.0
    tail = 0
    for s, ss, t in parts:
        total += s
        sumsq += ss
        tail += t
    mean = total / n_paths
    var = max(sumsq / n_paths - mean * mean, 0.0) * n_paths / max(n_paths - 1, 1)
    return RawSums(mean=mean, std_err=math.sqrt(var / n_paths), n_paths=n_paths, tail_visits=tail)


def mc_renewal_measure(model: Model, A: TargetSet, direction: DirectionFunction, tau: float,
                       n_paths: int, seed: int, f=None, margin_sigmas: float = 12.0,
                       workers: int = 1, chunk_size: int = DEFAULT_CHUNK,
                       check_lattice: bool = True) -> RenewalEstimate:
    """Monte Carlo estimate of ``V_tau(A)`` with path-level standard error.

    Raises
    ------
    BudgetError
        ``n_paths < 100``.
    LatticeError
        The nonlattice diagnostic finds a unimodular Fourier eigenvalue.
    """
    if n_paths < MIN_PATHS:
        raise BudgetError(f"n_paths = {n_paths} < {MIN_PATHS}")
    if np.linalg.norm(direction.m) == 0.0:
        raise ZeroDriftError("direction drift is zero")
    if check_lattice and nonlattice_diagnostic(model).lattice:
        raise LatticeError("lattice evidence found; the nonlattice renewal limit does not apply")
    d = A.d
    n_max = truncation_horizon(model, tau, A, margin_sigmas, direction)
    raw = renewal_sums(model, A, direction_eval(direction, tau), n_max, n_paths, seed,
                       f=f, chunk_size=chunk_size, workers=workers)
    scale = (2 * math.pi * tau) ** ((d - 1) / 2)
    return RenewalEstimate(tau=float(tau), v_hat=scale * raw.mean, std_err=scale * raw.std_err,
                           n_paths=n_paths, n_max=n_max,
                           theory=theory_value(model, A, direction.frak_A, f), seed=int(seed))


@dataclass(frozen=True)
class ConvergenceTable:
    estimates: list[RenewalEstimate]

    @property
    def deviations(self) -> np.ndarray:
        return np.array([abs(e.ratio - 1.0) for e in self.estimates])

    @property
    def monotone(self) -> bool:
        dev = self.deviations
        return bool(np.all(np.diff(dev) <= 0))

    def rows(self) -> list[tuple]:
        return [e.row() for e in self.estimates]


def convergence_study(model: Model, A: TargetSet, direction: DirectionFunction,
                      tau_list: Sequence[float], n_paths: int, seed: int, f=None,
                      workers: int = 1, **kw) -> ConvergenceTable:
    """One estimate per ``tau``; whether ``|ratio - 1|`` shrinks is reported, not enforced."""
    return ConvergenceTable([
        mc_renewal_measure(model, A, direction, tau, n_paths, seed, f=f, workers=workers, **kw)
        for tau in tau_list
    ])
