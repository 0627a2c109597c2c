"""Second-order forward-mode differentiation on batches of points.

A :class:`Jet` carries, for ``N`` evaluation points, the value ``(N,)``, the
gradient ``(N, d)`` and the Hessian ``(N, d, d)`` of a scalar (possibly
complex) function.  Arithmetic and a few elementary functions propagate all
three exactly, so compositions like ``rho * theta(D_k x) / v(D_k x)`` get
analytic first and second derivatives without symbolic algebra.
"""
from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 100

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    # -- construction
    @staticmethod
    def variables(x: np.ndarray) -> list["Jet"]:
        """One jet per coordinate of the points ``x`` of shape ``(N, d)``."""
        x = np.asarray(x, dtype=float)
        n, d = x.shape
        out = []
        for j in range(d):
            g = np.zeros((n, d))
            g[:, j] = 1.0
            out.append(Jet(x[:, j].copy(), g, np.zeros((n, d, d))))
        return out

    @staticmethod
    def constant(c, n: int, d: int) -> "Jet":
        val = np.broadcast_to(np.asarray(c), (n,)).astype(np.result_type(c, float))
        return Jet(val.copy(), np.zeros((n, d), dtype=val.dtype), np.zeros((n, d, d), dtype=val.dtype))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grad.shape

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        n, d = self.shape
        return Jet.constant(other, n, d)

    # -- arithmetic
    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other)
            return Jet(self.val * c, self.grad * c[..., None] if c.ndim else self.grad * c,
                       self.hess * c[..., None, None] if c.ndim else self.hess * c)
        a, b = self, other
        cross = a.grad[:, :, None] * b.grad[:, None, :]
        return Jet(a.val * b.val,
                   a.grad * b.val[:, None] + b.grad * a.val[:, None],
                   a.hess * b.val[:, None, None] + b.hess * a.val[:, None, None] + cross + cross.transpose(0, 2, 1))

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        return self.apply(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if p == 2:
            return self * self
        v = self.val
        return self.apply(v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # -- composition with univariate functions
    def apply(self, f0, f1, f2) -> "Jet":
        """Chain rule for ``f(u)`` given ``f(u), f'(u), f''(u)`` at the current values."""
        f1 = np.asarray(f1)
        f2 = np.asarray(f2)
        outer = self.grad[:, :, None] * self.grad[:, None, :]
        return Jet(np.asarray(f0) * np.ones_like(self.val),
                   f1[:, None] * self.grad,
                   f2[:, None, None] * outer + f1[:, None, None] * self.hess)

    def exp(self) -> "Jet":
        e = np.exp(self.val)
        return self.apply(e, e, e)

    def sqrt(self) -> "Jet":
        s = np.sqrt(self.val)
        return self.apply(s, 0.5 / s, -0.25 / (s * self.val))

    def logistic(self) -> "Jet":
        """``1 / (1 + exp(-u))`` with derivatives ``s(1-s)`` and ``s(1-s)(1-2s)``."""
        s = np.empty_like(self.val, dtype=float)
        u = self.val
        pos = u >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
        e = np.exp(u[~pos])
        s[~pos] = e / (1.0 + e)
        ds = s * (1.0 - s)
        return self.apply(s, ds, ds * (1.0 - 2.0 * s))

    def take(self, mask) -> "Jet":
        return Jet(self.val[mask], self.grad[mask], self.hess[mask])

    def put(self, mask, other: "Jet") -> "Jet":
        """Copy with rows ``mask`` replaced by ``other``."""
        dtype = np.result_type(self.val, other.val)
        val, grad, hess = self.val.astype(dtype), self.grad.astype(dtype), self.hess.astype(dtype)
        val[mask], grad[mask], hess[mask] = other.val, other.grad, other.hess
        return Jet(val, grad, hess)

    def derivative(self, beta) -> np.ndarray:
        """``d^beta`` for a multi-index of order at most 2."""
        beta = tuple(int(b) for b in beta)
        order = sum(beta)
        if order == 0:
            return self.val
        idx = [j for j, b in enumerate(beta) for _ in range(b)]
        if order == 1:
            return self.grad[:, idx[0]]
        if order == 2:
            return self.hess[:, idx[0], idx[1]]
        raise ValueError("jets carry derivatives up to order 2 only")


def sqrt(u):
    return u.sqrt() if isinstance(u, Jet) else np.sqrt(u)


def _smoothstep_values(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 1.0, 1.0, 0.0)
    inside = (u > 0.0) & (u < 1.0)
    ui = u[inside]
    with np.errstate(over="ignore"):
        out[inside] = 1.0 / (1.0 + np.exp(1.0 / ui - 1.0 / (1.0 - ui)))
    return out


def smoothstep(u):
    """``C^infinity`` step: 0 for ``u <= 0``, 1 for ``u >= 1``.

    Inside ``(0, 1)`` it equals ``logistic(1/(1-u) - 1/u)``, the ratio
    ``e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})`` written without overflow.
    Accepts a :class:`Jet` or a plain array.
    """
    if not isinstance(u, Jet):
        return _smoothstep_values(u)
    n, d = u.shape
    val = np.asarray(u.val, dtype=float)
    out = Jet.constant(np.where(val >= 1.0, 1.0, 0.0), n, d)
    inside = (val > 0.0) & (val < 1.0)
    if inside.any():
        ui = u.take(inside)
        # below ~1/700 the step is smaller than the smallest double
        tiny = ui.val < 1.5e-3
        big = ui.val > 1 - 1.5e-3
        arg = (1.0 - ui).reciprocal() - ui.reciprocal()
        s = arg.logistic()
        if tiny.any() or big.any():
            flat = Jet.constant(np.where(big, 1.0, 0.0), *ui.shape)
            s = s.put(tiny | big, flat.take(tiny | big))
        out = out.put(inside, s)
    return out
