"""Built-in models and test-function pairs, addressable by name.

Orderings are fixed by the tuples below so listings are stable across runs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dyadic
from .markov_models import ARModel, FiniteChain, Model


@dataclass(frozen=True)
class ModelEntry:
    name: str
    role: str
    build: Callable[[], Model]


def _ar_gaussian_2d() -> ARModel:
    return ARModel(A=np.array([[0.5, 0.2], [0.1, 0.3]]), noise_mean=np.array([1.0, 0.3]),
                   noise_cov=np.eye(2))


def _ar_isotropic_2d() -> ARModel:
    return ARModel(A=0.5 * np.eye(2), noise_mean=np.array([1.0, 0.0]), noise_cov=np.eye(2))


def _ar_gaussian_3d() -> ARModel:
    A = np.array([[0.4, 0.1, 0.0], [0.0, 0.3, 0.1], [0.1, 0.0, 0.2]])
    return ARModel(A=A, noise_mean=np.array([1.0, 0.2, -0.1]), noise_cov=np.eye(3))


def _chain_3state_2d() -> FiniteChain:
    P = np.array([[0.5, 0.3, 0.2], [0.2, 0.6, 0.2], [0.3, 0.3, 0.4]])
    xi = np.array([[1.0, 0.2], [0.5, -0.7], [1.5, 0.9]])
    return FiniteChain(P, xi)


def _chain_2state_2d() -> FiniteChain:
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    xi = np.array([[1.0, 0.5], [1.7, -0.4]])
    return FiniteChain(P, xi)


def _chain_lattice_2d() -> FiniteChain:
    P = np.array([[0.5, 0.5], [0.4, 0.6]])
    xi = np.array([[1.0, 0.0], [2.0, 1.0]])
    return FiniteChain(P, xi)


MODELS: tuple[ModelEntry, ...] = (
    ModelEntry("ar-gaussian-2d", "AR(1) with Gaussian noise, non-diagonal A; end-to-end renewal runs",
               _ar_gaussian_2d),
    ModelEntry("ar-isotropic-2d", "AR(1) with A = I/2 and drift along e1", _ar_isotropic_2d),
    ModelEntry("ar-gaussian-3d", "AR(1) with Gaussian noise in three dimensions", _ar_gaussian_3d),
    ModelEntry("chain-3state-2d", "three-state chain; eigenvalue derivatives and decomposition",
               _chain_3state_2d),
    ModelEntry("chain-2state-2d", "two-state chain; exhaustive path enumeration oracle",
               _chain_2state_2d),
    ModelEntry("chain-lattice-2d", "two-state chain with integer increments (lattice case)",
               _chain_lattice_2d),
)


@dataclass(frozen=True)
class PairEntry:
    name: str
    role: str
    theta: str
    tilde: bool
    r: float
    law: str


PAIRS: tuple[PairEntry, ...] = (
    PairEntry("x2/v", "numerator vanishing at 0 over the parabolic weight; psi_k ~ 2^k",
              "x2", False, 0.5, "psi"),
    PairEntry("x2^3/v^2", "vanishing-jet numerator over two weights; psi~_k ~ 2^{k(2-nu)}, d = 2",
              "x2^3", True, 0.5, "psi_tilde"),
    PairEntry("x2^2x3/v^2", "vanishing-jet numerator over two weights; d = 3",
              "x2^2x3", True, 0.5, "psi_tilde"),
    PairEntry("(x1+x2)/v", "Fourier decay of the localized quotient along the drift ray",
              "x1+x2", False, 2.0, "fourier"),
    PairEntry("zero/v", "trivial numerator; every norm and transform vanishes",
              "zero", False, 0.5, "psi"),
)

BUMP_PROFILE = ("gamma(x) = eta(|w(x)|), eta(s) = S(8s - 1) (1 - S(s - 1)), "
                "S(u) = e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)}) on (0, 1)")


def model(name: str) -> Model:
    for e in MODELS:
        if e.name == name:
            return e.build()
    raise KeyError(f"unknown model {name!r}; known: {', '.join(e.name for e in MODELS)}")


def pair(name: str, m: float = dyadic.DEFAULT_M):
    """``(theta, v, v_tilde_or_None)`` handles for a catalog pair."""
    for e in PAIRS:
        if e.name == name:
            th = dyadic.theta_handle(e.theta, r=e.r, m=m)
            v = dyadic.v_handle(m)
            return th, v, (v if e.tilde else None)
    raise KeyError(f"unknown pair {name!r}; known: {', '.join(e.name for e in PAIRS)}")


def listing() -> str:
    lines = ["models:"]
    lines += [f"  {e.name:<18} {e.role}" for e in MODELS]
    lines.append("test-function pairs (theta, v):")
    lines += [f"  {e.name:<18} {e.role}" for e in PAIRS]
    lines.append("partition bump:")
    lines.append(f"  {BUMP_PROFILE}")
    return "\n".join(lines) + "\n"
