"""Second-order forward-mode differentiation with truncated Taylor jets.

A :class:`DualScalar` carries ``(f, f', f'')`` along one direction. Components
may be numpy arrays, so a whole point set is differentiated at once. Mixed
partials are recovered by polarization, see :func:`partials`.
"""

from __future__ import annotations

import numpy as np


class DualScalar:
    __slots__ = ("primal", "tangent", "second")

    def __init__(self, primal, tangent=0.0, second=0.0):
        self.primal = primal
        self.tangent = tangent
        self.second = second

    def _lift(self, other):
        return other if isinstance(other, DualScalar) else DualScalar(other, 0.0, 0.0)

    def _chain(self, f0, f1, f2):
        # (f o x)'' = f''(x) x'^2 + f'(x) x''
        return DualScalar(f0, f1 * self.tangent, f2 * self.tangent**2 + f1 * self.second)

    def __add__(self, other):
        o = self._lift(other)
        return DualScalar(self.primal + o.primal, self.tangent + o.tangent, self.second + o.second)

    __radd__ = __add__

    def __neg__(self):
        return DualScalar(-self.primal, -self.tangent, -self.second)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return DualScalar(
            self.primal * o.primal,
            self.primal * o.tangent + self.tangent * o.primal,
            self.primal * o.second + 2 * self.tangent * o.tangent + self.second * o.primal,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        x = self.primal
        return self._chain(1 / x, -1 / x**2, 2 / x**3)

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, p):
        if isinstance(p, DualScalar):
            return exp(p * log(self))
        x = self.primal
        if p == 0:
            return DualScalar(np.ones_like(x) if hasattr(x, "shape") else 1.0)
        if p == 1:
            return self
        if p == 2:
            return self * self
        return self._chain(x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2))

    def __repr__(self):
        return f"DualScalar({self.primal!r}, {self.tangent!r}, {self.second!r})"


def exp(x):
    if isinstance(x, DualScalar):
        e = np.exp(x.primal)
        return x._chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, DualScalar):
        v = x.primal
        return x._chain(np.log(v), 1 / v, -1 / v**2)
    return np.log(x)


def sin(x):
    if isinstance(x, DualScalar):
        v = x.primal
        return x._chain(np.sin(v), np.cos(v), -np.sin(v))
    return np.sin(x)


def cos(x):
    if isinstance(x, DualScalar):
        v = x.primal
        return x._chain(np.cos(v), -np.sin(v), -np.cos(v))
    return np.cos(x)


def sqrt(x):
    return x**0.5 if isinstance(x, DualScalar) else np.sqrt(x)


def directional(fn, r, s, dr, ds):
    """Value, first and second derivative of ``fn`` along ``(dr, ds)``."""
    out = fn(DualScalar(r, dr, 0.0), DualScalar(s, ds, 0.0))
    if not isinstance(out, DualScalar):
        z = np.zeros_like(np.asarray(out, dtype=float))
        return out, z, z
    return out.primal, out.tangent, out.second


def partials(fn, r, s):
    """All partials up to order two of ``fn(r, s)`` by forward mode.

    Returns ``(v, g_r, g_s, g_rr, g_ss, g_rs)``.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    v, g_r, g_rr = directional(fn, r, s, 1.0, 0.0)
    _, g_s, g_ss = directional(fn, r, s, 0.0, 1.0)
    _, _, d11 = directional(fn, r, s, 1.0, 1.0)
    g_rs = 0.5 * (d11 - g_rr - g_ss)
    return tuple(np.broadcast_to(np.asarray(x, dtype=float), np.broadcast(r, s).shape)
                 for x in (v, g_r, g_s, g_rr, g_ss, g_rs))
