"""Fixed-order Gauss-Legendre rules, vectorised over many intervals.

All rules broadcast: ``a`` and ``b`` may be arrays of any (matching) shape
and the returned nodes/weights get one extra trailing axis of length ``n``.
"""

from functools import lru_cache

import numpy as np

__all__ = ["legendre", "gl_rule", "cos_rule", "sqrt_end_rule", "integrate_panels"]


@lru_cache(maxsize=64)
def legendre(n):
    """Gauss-Legendre nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _edges(a, b):
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    return a, b


def gl_rule(a, b, n):
    """Plain Gauss-Legendre rule on [a, b]."""
    x, w = legendre(n)
    a, b = _edges(a, b)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def cos_rule(a, b, n):
    """Gauss rule after the map x = a + (b - a)(1 - cos th)/2, th in [0, pi].

    Clusters nodes at both ends; removes inverse-square-root singularities
    and square-root kinks sitting exactly at ``a`` or ``b``.
    """
    x, w = legendre(n)
    th = 0.5 * np.pi * (x + 1.0)
    wt = 0.5 * np.pi * w
    a, b = _edges(a, b)
    nodes = a + (b - a) * 0.5 * (1.0 - np.cos(th))
    weights = (b - a) * 0.5 * np.sin(th) * wt
    return nodes, weights


def sqrt_end_rule(a, b, n):
    """Gauss rule after x = b - (b - a)(1 - u)^2: smooths a 1/sqrt(b - x) end.

    The lower end ``a`` is left unclustered.
    """
    x, w = legendre(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    a, b = _edges(a, b)
    nodes = b - (b - a) * (1.0 - u) ** 2
    weights = 2.0 * (b - a) * (1.0 - u) * wu
    return nodes, weights


def integrate_panels(f, breaks, n=32, rule=cos_rule):
    """Integrate a vectorised ``f`` over consecutive panels given by ``breaks``.

    Empty or reversed panels are skipped.
    """
    total = 0.0
    breaks = np.asarray(breaks, dtype=float)
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        x, w = rule(lo, hi, n)
        total += float(np.sum(f(x) * w))
    return total
