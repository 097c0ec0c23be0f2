"""Independent reference computations used only by the tests."""

from __future__ import annotations

import itertools
import math

import mpmath as mp
import numpy as np
from scipy.optimize import linprog

mp.mp.dps = 40

# HiGHS defaults to 1e-7 feasibility, too coarse for 1e-9 comparisons
TIGHT = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def bessel_pi(k: int) -> float:
    """Equilibrium of birth 1 / death i^2: ``1 / (I0(2) k!^2)``."""
    return float(1 / (mp.besseli(0, 2) * mp.factorial(k) ** 2))


def bessel_mean() -> float:
    """Mean of the same law: ``I1(2) / I0(2)``."""
    return float(mp.besseli(1, 2) / mp.besseli(0, 2))


def enumerate_sum(p) -> np.ndarray:
    """Law of a sum of independent Bernoullis by listing all ``2^n`` outcomes."""
    n = len(p)
    out = [mp.mpf(0)] * (n + 1)
    for bits in itertools.product((0, 1), repeat=n):
        w = mp.mpf(1)
        for b, q in zip(bits, p):
            w *= q if b else 1 - mp.mpf(q)
        out[sum(bits)] += w
    return np.array([float(x) for x in out])


def ratio_recursion(alpha, beta, terms=200) -> np.ndarray:
    """Extended-precision balance recursion for the alpha/beta family."""
    w = [mp.mpf(1)]
    for i in range(1, terms):
        w.append(w[-1] * alpha / (beta * i + i * (i - 1)))
    s = mp.fsum(w)
    return np.array([float(x / s) for x in w])


def transport_lp(p, q) -> float:
    """Optimal transport cost with ground distance ``|i - j|``, by linear programming."""
    m, n = len(p), len(q)
    cost = np.abs(np.subtract.outer(np.arange(m), np.arange(n))).ravel().astype(float)
    rows = []
    for i in range(m):
        r = np.zeros((m, n))
        r[i, :] = 1
        rows.append(r.ravel())
    for j in range(n):
        r = np.zeros((m, n))
        r[:, j] = 1
        rows.append(r.ravel())
    res = linprog(cost, A_eq=np.array(rows), b_eq=np.concatenate([p, q]),
                  bounds=(0, None), method="highs", options=TIGHT)
    assert res.status == 0
    return float(res.fun)


def lipschitz_max(coef, pin: int) -> float:
    """Same optimum as :func:`lipschitz_lp`, solved exactly.

    Writing ``f`` through its increments ``d_j in [-1, 1]`` pinned at ``pin``
    separates the objective into independent terms ``|partial sum of coef|``.
    """
    c = np.asarray(coef, dtype=float)
    right = sum(abs(math.fsum(c[j + 1 :])) for j in range(pin, c.size - 1))
    left = sum(abs(math.fsum(c[: j + 1])) for j in range(pin))
    return right + left


def lipschitz_lp(coef, pin: int) -> float:
    """``max sum_k f(k) coef[k]`` over ``|f(k+1) - f(k)| <= 1`` with ``f(pin) = 0``."""
    K = len(coef)
    A = np.zeros((2 * (K - 1), K))
    for k in range(K - 1):
        A[2 * k, k + 1], A[2 * k, k] = 1, -1
        A[2 * k + 1, k + 1], A[2 * k + 1, k] = -1, 1
    eq = np.zeros((1, K))
    eq[0, pin] = 1
    res = linprog(-np.asarray(coef), A_ub=A, b_ub=np.ones(2 * (K - 1)), A_eq=eq, b_eq=[0],
                  bounds=(None, None), method="highs", options=TIGHT)
    assert res.status == 0
    return float(-res.fun)
