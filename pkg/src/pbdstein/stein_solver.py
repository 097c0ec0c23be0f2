"""Exact solutions of the PBD Stein equation and their Lipschitz suprema.

For ``f`` on the non-negative integers, ``g_f`` solves

    alpha * g(i+1) - death(i) * g(i) = f(i) - pi(f),      g(0) := g(1).

Everything here is tabulated on the retained support ``{0, ..., N}`` of a
:class:`~pbdstein.dist_core.TruncatedPmf`. A renormalized truncated pmf is
the exact equilibrium of the chain stopped at ``N``, so the tables solve
the Stein equation exactly for ``i < N``; only values close to ``N`` feel
the truncation, and :func:`trusted_limit` says how far they can be used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist_core import ABParams, PBDParams, TruncatedPmf, cdf_tables, pbd_equilibrium, require_normalized
from .errors import NumericalConsistencyError, ParameterDomainError, TruncationError
from .poisson_binomial import BernoulliProfile, exact_pmf, leave_out_pmf

__all__ = [
    "HittingMeans",
    "SteinSolution",
    "Supremum",
    "envelope",
    "exact_sup_delta2_g",
    "exact_sup_delta_g",
    "exact_sup_g",
    "expansion_check",
    "f1",
    "f_i2",
    "f_i3",
    "g_indicator",
    "hitting_means",
    "solve_g",
    "solver_pmf",
    "stein_apply",
    "trusted_limit",
]

RESIDUAL_RTOL = 1e-9
CROSS_CHECK_RTOL = 1e-10
SOLVER_TOL = 1e-150

Params = PBDParams | ABParams


def solver_pmf(params: Params, tol: float = SOLVER_TOL) -> TruncatedPmf:
    """Equilibrium truncated deep enough that small-index tables are exact to round-off."""
    return pbd_equilibrium(params, tol)


def f1(k):
    """The extremal function ``k -> -k``."""
    return -np.asarray(k, dtype=float)


def f_i2(i: int) -> Callable:
    """``k -> -|i - k|``, extremal for ``Delta g_f(i)``."""
    return lambda k: -np.abs(i - np.asarray(k, dtype=float))


def f_i3(i: int, s: float) -> Callable:
    """``(i-k) 1{k<=i} + ((i+1) - k + s) 1{k>=i+1}``, extremal for ``Delta^2 g_f(i)``.

    ``s = -1`` gives the shifted ``f1``; ``s = +1`` gives ``f_i4``.
    """
    def f(k):
        k = np.asarray(k, dtype=float)
        return np.where(k <= i, i - k, (i + 1) - k + s)
    return f


def _evaluate(f, n: int) -> np.ndarray:
    if callable(f):
        k = np.arange(n)
        try:
            vals = np.asarray(f(k), dtype=float)
            if vals.shape != (n,):
                raise ValueError
        except (TypeError, ValueError):
            vals = np.array([float(f(int(j))) for j in k])
    else:
        vals = np.asarray(f, dtype=float).reshape(-1)
        if vals.size < n:
            raise ParameterDomainError(f"f has {vals.size} values, the retained support needs {n}")
        vals = vals[:n]
    if not np.all(np.isfinite(vals)):
        raise ParameterDomainError("f must be finite on the retained support")
    return vals


class _Tables:
    """Shared per-(params, pmf) quantities."""

    def __init__(self, params: Params, pmf: TruncatedPmf):
        if not isinstance(params, (PBDParams, ABParams)):
            raise ParameterDomainError("params must be PBDParams or ABParams")
        require_normalized(pmf)
        pi = pmf.probs
        if np.any(pi <= 0):
            raise TruncationError("Stein tables need a strictly positive pmf on the retained support")
        self.params = params
        self.pmf = pmf
        self.pi = pi
        self.N = pmf.N
        self.alpha = params.alpha
        self.death = params.death_rates(self.N + 1)
        self.F, self.Fbar = cdf_tables(pmf)
        self.e_plus = self.F / (self.alpha * pi)
        self.e_minus = np.empty(self.N + 1)
        self.e_minus[0] = math.inf
        self.e_minus[1:] = self.Fbar[1:] / (self.alpha * pi[:-1])


def trusted_limit(pmf: TruncatedPmf) -> int:
    """Largest index whose tables are unaffected (to ~1e-16 relative) by truncation.

    The omitted mass perturbs ratios like ``Fbar(i) / pi(i-1)`` by about
    ``tail_bound / pi(i)``; indices with ``pi(i) >= 1e16 (N+1)^2 tail_bound``
    are safe.
    """
    if pmf.tail_bound == 0.0:
        return pmf.N
    ok = np.nonzero(pmf.probs >= 1e16 * (pmf.N + 1) ** 2 * pmf.tail_bound)[0]
    return int(ok[-1]) if ok.size else 0


def stein_apply(g: Sequence[float], params: Params, i: int) -> float:
    """``alpha * g(i+1) - death(i) * g(i)``."""
    g = np.asarray(g, dtype=float)
    if not (0 <= i and i + 1 < g.size):
        raise IndexError(f"i={i} needs g up to index {i + 1}, table has {g.size} entries")
    return params.alpha * g[i + 1] - params.death(i) * g[i]


def g_indicator(params: Params, k: int, pmf: TruncatedPmf) -> np.ndarray:
    """``g_k`` for ``f = 1{. = k}`` on ``0..N``, with ``g_k(0) = g_k(1)``.

    ``g_k(i) = pi_k Fbar(i) / (alpha pi_{i-1})`` for ``k < i`` and
    ``-pi_k F(i-1) / (death(i) pi_i)`` for ``k >= i``.
    """
    t = _Tables(params, pmf)
    if not (0 <= k <= t.N):
        raise TruncationError(f"k={k} lies beyond the retained support 0..{t.N}")
    i = np.arange(1, t.N + 1)
    g = np.empty(t.N + 1)
    upper = t.pi[k] * t.Fbar[1:] / (t.alpha * t.pi[:-1])
    lower = -t.pi[k] * t.F[:-1] / (t.death[1:] * t.pi[1:])
    g[1:] = np.where(k < i, upper, lower)
    g[0] = g[1]
    return g


@dataclass(frozen=True, eq=False)
class SteinSolution:
    g: np.ndarray
    residuals: np.ndarray
    trunc: int
    params: Params
    f_values: np.ndarray = field(repr=False)
    pi_f: float = 0.0

    @property
    def residual_max(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def dg(self) -> np.ndarray:
        return np.diff(self.g)

    @property
    def d2g(self) -> np.ndarray:
        return np.diff(self.g, 2)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "truncation": self.trunc,
            "g": self.g.tolist(),
            "residual_max": self.residual_max,
            "pi_f": self.pi_f,
        }


def _residuals(t: _Tables, g: np.ndarray, fc: np.ndarray) -> np.ndarray:
    i = np.arange(t.N)
    return np.abs(t.alpha * g[i + 1] - t.death[i] * g[i] - fc[i])


def solve_g(params: Params, f, pmf: TruncatedPmf, check: bool = True) -> SteinSolution:
    """Solve the Stein equation for ``f`` on the retained support.

    With ``fc = f - pi(f)``,
    ``g(i) = sum_{k<i} fc(k) pi_k / (alpha pi_{i-1}) = -sum_{k>=i} fc(k) pi_k / (alpha pi_{i-1})``;
    the prefix form is used while ``F(i-1) <= 1/2`` and the suffix form
    after, so neither side cancels catastrophically.
    """
    t = _Tables(params, pmf)
    fv = _evaluate(f, t.N + 1)
    pi_f = math.fsum(fv * t.pi)
    fc = fv - pi_f
    w = fc * t.pi
    prefix = np.cumsum(w)[:-1]                       # sum_{k<i}, i = 1..N
    suffix = np.cumsum(w[::-1])[::-1][1:]            # sum_{k>=i}, i = 1..N
    use_prefix = t.F[:-1] <= 0.5
    num = np.where(use_prefix, prefix, -suffix)
    g = np.empty(t.N + 1)
    g[1:] = num / (t.alpha * t.pi[:-1])
    g[0] = g[1]
    res = _residuals(t, g, fc)
    sol = SteinSolution(g, res, t.N, params, fv, pi_f)
    if check:
        limit = RESIDUAL_RTOL * (1.0 + float(np.max(np.abs(fv))))
        if sol.residual_max > limit:
            raise NumericalConsistencyError(
                f"Stein residual {sol.residual_max:.3e} exceeds {limit:.3e}; raise the truncation")
    return sol


@dataclass(frozen=True, eq=False)
class HittingMeans:
    """``e_plus[i]`` = mean time from ``i`` to ``i+1``; ``e_minus[i]`` = from ``i`` to ``i-1``.

    ``e_minus[0]`` is ``inf`` (the chain never goes below 0).
    """

    e_plus: np.ndarray
    e_minus: np.ndarray


def hitting_means(params: Params, pmf: TruncatedPmf) -> HittingMeans:
    t = _Tables(params, pmf)
    return HittingMeans(t.e_plus.copy(), t.e_minus.copy())


@dataclass(frozen=True)
class Supremum:
    """A Stein-factor supremum with where it was attained and how far the scan ran."""

    value: float
    argmax: int
    scanned_to: int
    cross_check: float | None = None

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "argmax": self.argmax, "scanned_to": self.scanned_to,
                "cross_check": self.cross_check}


def exact_sup_g(params: Params, pmf: TruncatedPmf) -> Supremum:
    """``sup_f ||g_f|| = (1/alpha) sum k pi_k``, cross-checked against ``max_i g_{f1}(i)``."""
    t = _Tables(params, pmf)
    mean = math.fsum(np.arange(t.N + 1) * t.pi)
    value = mean / t.alpha
    sol = solve_g(params, f1, pmf)
    top = min(trusted_limit(pmf), t.N)
    scan = sol.g[1 : max(top, 1) + 1]
    best = int(np.argmax(scan)) + 1
    other = float(scan[best - 1])
    if abs(other - value) > CROSS_CHECK_RTOL * max(abs(value), 1e-300):
        raise NumericalConsistencyError(
            f"(1/alpha) E pi = {value!r} disagrees with max g_f1 = {other!r} at i={best}")
    return Supremum(value, best, top, other)


def envelope(params: PBDParams, i: int) -> float:
    """Upper bound on ``sup_f |Delta g_f(j)|`` valid for every ``j >= i >= 1``.

    ``max(i, sqrt(alpha) + 1) * min(1/alpha, 1/death(i))`` is non-increasing
    in ``i``, so checking it once certifies the whole remaining range.
    """
    a = params.alpha
    return max(i, math.sqrt(a) + 1.0) * min(1.0 / a, 1.0 / params.death(i))


def _as_pbd(params: Params) -> tuple[PBDParams, float]:
    """PBD form of ``params`` and the factor turning its ``g`` into the caller's."""
    if isinstance(params, PBDParams):
        return params, 1.0
    if isinstance(params, ABParams):
        if params.b == 0:
            raise ParameterDomainError("difference suprema need b > 0 (the scan envelope is PBD-specific)")
        pbd = params.to_pbd()
        return pbd, pbd.beta
    raise ParameterDomainError("params must be PBDParams or ABParams")


def _delta_terms(t: _Tables):
    """Per-site partial sums used by both difference scans."""
    # sum_{k<i} (i-k) pi_k = sum_{j<i} F(j); sum_{k>i} (k-i) pi_k = sum_{j>i} Fbar(j)
    below = np.concatenate([[0.0], np.cumsum(t.F)])[: t.N + 1]
    above = np.concatenate([np.cumsum(t.Fbar[::-1])[::-1][1:], [0.0]])
    return below, above


def _delta_sup_at(t: _Tables, below, above, i: int) -> float:
    left = (t.e_minus[i] - t.e_minus[i + 1]) * below[i]
    right = (t.e_plus[i] - t.e_plus[i - 1]) * above[i]
    return left + right


def _scan_cap(t: _Tables, i_max: int | None, reach: int) -> int:
    cap = min(t.N, trusted_limit(t.pmf)) - reach
    if i_max is not None:
        if i_max > t.N - reach:
            raise TruncationError(f"i_max={i_max} exceeds N-{reach}={t.N - reach}")
        cap = min(cap, i_max)
    if cap < 1:
        raise TruncationError("retained support too short for the difference scan")
    return cap


def exact_sup_delta_g(params: Params, pmf: TruncatedPmf, i_max: int | None = None) -> Supremum:
    """``sup_f ||Delta g_f||`` via ``f_{i2}(k) = -|i-k|`` at every site.

    ``S(i) = sum_{k != i} |i-k| (-Delta g_k(i))``; the scan over ``i >= 1``
    stops once :func:`envelope` drops below the running maximum. With
    ``i_max`` the result is the maximum over ``i <= i_max`` even when the
    envelope has not certified the remaining sites.
    """
    pbd, scale = _as_pbd(params)
    t = _Tables(pbd, pmf)
    below, above = _delta_terms(t)
    cap = _scan_cap(t, i_max, 1)
    best, arg = -math.inf, 0
    for i in range(1, cap + 1):
        s = _delta_sup_at(t, below, above, i)
        if s > best:
            best, arg = s, i
        if envelope(pbd, i + 1) < best:
            return Supremum(scale * best, arg, i)
    if i_max is not None:
        return Supremum(scale * best, arg, cap)
    raise TruncationError(f"envelope never fell below the running max within i <= {cap}")


def _delta2_sup_at(t: _Tables, below, above, i: int) -> float:
    ep, em, pi = t.e_plus, t.e_minus, t.pi
    d_minus = em[i + 2] - 2.0 * em[i + 1] + em[i]
    d_plus = ep[i + 1] - 2.0 * ep[i] + ep[i - 1]
    at_next = pi[i + 1] * (em[i + 2] + 2.0 * ep[i] - ep[i - 1])
    tail = t.Fbar[i + 2] if i + 2 <= t.N else 0.0
    coef = at_next - d_plus * tail                   # sum_{k >= i+1} Delta^2 g_k(i)
    return d_minus * below[i] + d_plus * above[i + 1] + abs(coef)


def delta2_coefficient(params: Params, pmf: TruncatedPmf, i: int) -> float:
    """``sum_{k >= i+1} Delta^2 g_k(i)``; its sign selects ``f(i+1) = +-1``."""
    t = _Tables(params, pmf)
    ep, em = t.e_plus, t.e_minus
    d_plus = ep[i + 1] - 2.0 * ep[i] + ep[i - 1]
    return t.pi[i + 1] * (em[i + 2] + 2.0 * ep[i] - ep[i - 1]) - d_plus * t.Fbar[i + 2]


def exact_sup_delta2_g(params: Params, pmf: TruncatedPmf, i_max: int | None = None) -> Supremum:
    """``sup_f ||Delta^2 g_f||``.

    At ``i >= 1`` the supremum is linear in ``f(i+1)`` in ``[-1, 1]``, so it
    is the sum of the fixed parts plus ``|sum_{k>=i+1} Delta^2 g_k(i)|``. At
    ``i = 0``, ``Delta^2 g_f(0) = Delta g_f(1)``. The scan stops once twice
    the first-difference envelope is below the running maximum.
    """
    pbd, scale = _as_pbd(params)
    t = _Tables(pbd, pmf)
    below, above = _delta_terms(t)
    cap = _scan_cap(t, i_max, 2)
    best, arg = _delta_sup_at(t, below, above, 1), 0
    for i in range(1, cap + 1):
        s = _delta2_sup_at(t, below, above, i)
        if s > best:
            best, arg = s, i
        if 2.0 * envelope(pbd, i + 1) < best:
            return Supremum(scale * best, arg, i)
    if i_max is not None:
        return Supremum(scale * best, arg, cap)
    raise TruncationError(f"envelope never fell below the running max within i <= {cap}")


def _mean_of(pmf_vec: np.ndarray, values: np.ndarray, shift: int) -> float:
    return math.fsum(pmf_vec * values[shift : shift + pmf_vec.size])


MAX_EXPANSION_N = 20


def expansion_check(profile: BernoulliProfile, params: PBDParams, g) -> tuple[float, float]:
    """Both sides of the second-difference expansion of ``E[B g(W)]`` by exact enumeration.

    lhs is ``E[alpha g(W+1) - (beta W + W(W-1)) g(W)]``; rhs is the
    second-difference expansion over leave-one-out and leave-two-out sums.
    The two agree for every ``g`` exactly when ``params`` is the fit of
    :func:`~pbdstein.poisson_binomial.fit_pbd`.
    """
    n = profile.n
    if n > MAX_EXPANSION_N:
        raise ParameterDomainError(f"expansion_check enumerates exactly; n={n} > {MAX_EXPANSION_N}")
    g = np.asarray(getattr(g, "g", g), dtype=float)
    if g.size < n + 3:
        raise ParameterDomainError(f"g must be tabulated on 0..{n + 2}")
    W = exact_pmf(profile).probs
    w = np.arange(n + 1)
    lhs = math.fsum(W * (params.alpha * g[w + 1] - params.death_rates(n + 1) * g[w]))
    d2 = np.diff(g, 2)                               # d2[x] = Delta^2 g(x)
    p = profile.p
    terms = []
    for i in range(n):
        Wi = leave_out_pmf(profile, i)
        terms.append(-params.beta * p[i] ** 3 * _mean_of(Wi, d2, 1))
        for j in range(n):
            if j == i:
                continue
            Wij = leave_out_pmf(profile, i, j)
            pi_, pj = p[i], p[j]
            terms.append(pi_**2 * pj**2 * (1 - pi_ - pj) * _mean_of(Wij, d2, 2))
            terms.append(pi_ * pj * (pi_ + pj) * (1 - pi_) * (1 - pj) * _mean_of(Wij, d2, 1))
    return lhs, math.fsum(terms)
