"""Truncated probability mass functions on the non-negative integers.

Equilibria of birth-death chains are built by the balance-ratio recursion
``w[n+1] = w[n] * birth(n) / death(n+1)`` starting from ``w[0] = 1`` and
normalized at the end. The recursion stops once the remaining mass is
certified to be below the requested tolerance by a geometric tail bound.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DivergenceError, ParameterDomainError

__all__ = [
    "ABParams",
    "Moment",
    "PBDParams",
    "PolynomialRates",
    "TruncatedPmf",
    "cdf_tables",
    "general_equilibrium",
    "moment",
    "pbd_equilibrium",
    "poisson_pmf",
    "require_normalized",
]

# Weights below this (after normalization) are treated as binary64 noise.
UNDERFLOW = 1e-300
_RESCALE_AT = 1e250
_MAX_TERMS = 10_000_000
NORMALIZATION_SLACK = 1e-12


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ParameterDomainError(f"{name} must be a finite positive number, got {value!r}")
    return value


@dataclass(frozen=True)
class PBDParams:
    """PBD(alpha; 0, beta, 1): birth rate ``alpha``, death rate ``beta*i + i*(i-1)``."""

    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_positive("alpha", self.alpha))
        object.__setattr__(self, "beta", _check_positive("beta", self.beta))

    def death(self, i: int) -> float:
        return self.beta * i + i * (i - 1.0)

    def death_rates(self, n: int) -> np.ndarray:
        """Death rates at sites ``0, ..., n-1``."""
        i = np.arange(n, dtype=float)
        return self.beta * i + i * (i - 1.0)

    @property
    def a(self) -> float:
        return self.alpha / self.beta

    @property
    def b(self) -> float:
        return 1.0 / self.beta

    @classmethod
    def from_ab(cls, a: float, b: float) -> "PBDParams":
        """The same law written as PBD(a; 0, 1, b); requires ``b > 0``."""
        b = _check_positive("b", b)
        return cls(a / b, 1.0 / b)

    def as_rates(self) -> "PolynomialRates":
        return PolynomialRates([self.alpha], [0.0, self.beta - 1.0, 1.0])

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class ABParams:
    """PBD(a; 0, 1, b): birth rate ``a``, death rate ``i + b*i*(i-1)``.

    Unlike :class:`PBDParams` this admits ``b = 0``, which is exactly Pn(a).
    Its Stein solution is the rescaled ``beta * g`` of the alpha/beta form.
    """

    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _check_positive("a", self.a))
        b = float(self.b)
        if not math.isfinite(b) or b < 0.0:
            raise ParameterDomainError(f"b must be finite and >= 0, got {b!r}")
        object.__setattr__(self, "b", b)

    @property
    def alpha(self) -> float:
        return self.a

    def death(self, i: int) -> float:
        return i + self.b * i * (i - 1.0)

    def death_rates(self, n: int) -> np.ndarray:
        i = np.arange(n, dtype=float)
        return i + self.b * i * (i - 1.0)

    def to_pbd(self) -> PBDParams:
        return PBDParams.from_ab(self.a, self.b)

    def as_rates(self) -> "PolynomialRates":
        return PolynomialRates([self.a], [0.0, 1.0 - self.b, self.b])

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b}


def _trim(coeffs: Sequence[float]) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
        raise ParameterDomainError("rate coefficients must be a non-empty list of finite reals")
    return P.polytrim(c)


@dataclass(frozen=True, eq=False)
class PolynomialRates:
    """Birth and death rates given as polynomials in the site index.

    Coefficients are in ascending powers, ``[c0, c1, c2]`` meaning
    ``c0 + c1*i + c2*i**2``.  With ``support_cap = m`` the chain lives on
    ``{0, ..., m}`` and ``birth(m)`` must vanish.
    """

    birth_coeffs: Sequence[float]
    death_coeffs: Sequence[float]
    support_cap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "birth_coeffs", _trim(self.birth_coeffs))
        object.__setattr__(self, "death_coeffs", _trim(self.death_coeffs))
        m = self.support_cap
        if m is None:
            return
        if int(m) != m or m < 0:
            raise ParameterDomainError(f"support_cap must be a non-negative integer, got {m!r}")
        m = int(m)
        object.__setattr__(self, "support_cap", m)
        scale = float(np.max(np.abs(self.birth_coeffs))) or 1.0
        if abs(self.birth(m)) > 1e-12 * scale * max(1, m) ** (len(self.birth_coeffs) - 1):
            raise ParameterDomainError(f"birth rate at support_cap={m} must be 0, got {self.birth(m)!r}")
        for i in range(m):
            if self.birth(i) < 0:
                raise ParameterDomainError(f"negative birth rate at i={i}")
        for i in range(1, m + 1):
            if self.death(i) <= 0:
                raise ParameterDomainError(f"death rate must be positive at i={i}")

    def birth(self, i: float) -> float:
        return float(P.polyval(i, self.birth_coeffs))

    def death(self, i: float) -> float:
        return float(P.polyval(i, self.death_coeffs))

    def to_dict(self) -> dict:
        return {
            "birth_coeffs": self.birth_coeffs.tolist(),
            "death_coeffs": self.death_coeffs.tolist(),
            "support_cap": self.support_cap,
        }


@dataclass(frozen=True, eq=False)
class TruncatedPmf:
    """Probabilities on ``{0, ..., N}`` plus a certified bound on omitted mass.

    ``renormalized`` means ``probs`` was rescaled to sum to one over the
    retained support, so every entry is the true mass conditioned on
    ``{0, ..., N}``.
    """

    probs: np.ndarray
    tail_bound: float = 0.0
    meta: dict = field(default_factory=dict)
    renormalized: bool = True

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise ParameterDomainError("a pmf needs at least one entry")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ParameterDomainError("pmf entries must be finite and non-negative")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        tb = float(self.tail_bound)
        if not tb >= 0:
            raise ParameterDomainError(f"tail_bound must be >= 0, got {tb!r}")
        object.__setattr__(self, "tail_bound", tb)

    @property
    def N(self) -> int:
        return self.probs.size - 1

    def __len__(self) -> int:
        return self.probs.size

    def mean(self) -> float:
        return moment(self, 1).value

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, self.probs.size))
        out[: self.probs.size] = self.probs
        return out

    @classmethod
    def point_mass(cls, k: int = 0, **meta) -> "TruncatedPmf":
        probs = np.zeros(k + 1)
        probs[k] = 1.0
        return cls(probs, 0.0, dict(meta))

    def shifted(self, s: int) -> "TruncatedPmf":
        """Convolution with the point mass at ``s``."""
        if s < 0:
            raise ParameterDomainError("shift must be non-negative")
        return TruncatedPmf(np.concatenate([np.zeros(s), self.probs]), self.tail_bound,
                            dict(self.meta, shift=s), self.renormalized)

    def to_dict(self) -> dict:
        return {"offset": 0, "probs": self.probs.tolist(), "tail_bound": self.tail_bound,
                "meta": self.meta}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "TruncatedPmf":
        probs = list(d["probs"])
        offset = int(d.get("offset", 0))
        if offset < 0:
            raise ParameterDomainError("offset must be >= 0")
        return cls(np.concatenate([np.zeros(offset), probs]), d.get("tail_bound", 0.0),
                   dict(d.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "TruncatedPmf":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "prob"])
        for k, p in enumerate(self.probs):
            w.writerow([k, repr(float(p))])
        return buf.getvalue()


def require_normalized(pmf: TruncatedPmf) -> None:
    """Raise unless ``pmf`` sums to one within its tail bound."""
    s = math.fsum(pmf.probs)
    if abs(s - 1.0) > pmf.tail_bound + NORMALIZATION_SLACK:
        raise ParameterDomainError(f"pmf is not normalized: sum = {s!r}")


def _finish(weights: list[float], tail: float, rho: float, meta: dict) -> TruncatedPmf:
    w = np.asarray(weights, dtype=float)
    total = math.fsum(w)
    probs = w / total
    clamped = probs < UNDERFLOW
    n_clamped = int(np.count_nonzero(clamped & (probs > 0)))
    probs[clamped] = 0.0
    tail_bound = tail + n_clamped * UNDERFLOW
    if n_clamped:
        probs /= math.fsum(probs)
    meta = dict(meta, truncation=int(w.size - 1), clamped=n_clamped, tail_ratio=float(rho))
    return TruncatedPmf(probs, tail_bound, meta, renormalized=True)


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not (0.0 < tol <= 1e-3):
        raise ParameterDomainError(f"tol must lie in (0, 1e-3], got {tol!r}")
    return tol


def _recurse(birth, death, tol, sup_ratio, cap=None) -> tuple[list[float], float, float]:
    """Run the balance recursion; return unnormalized weights, tail bound and tail ratio.

    The tail ratio ``rho`` certifies ``pi_{N+j} <= pi_N * rho**j``.

    ``sup_ratio(n, r)`` must return an upper bound on ``birth(m)/death(m+1)``
    for every ``m >= n`` (``inf`` when none is available yet) given the
    current ratio ``r``.
    """
    weights = [1.0]
    running = 1.0
    n = 0
    while True:
        if cap is not None and n >= cap:
            return weights, 0.0, 0.0
        a_n = birth(n)
        if a_n < 0:
            raise ParameterDomainError(f"negative birth rate at i={n}")
        if a_n == 0:
            return weights, 0.0, 0.0
        d_next = death(n + 1)
        if not d_next > 0:
            raise ParameterDomainError(f"death rate must be positive at i={n + 1}")
        r = a_n / d_next
        rbar = sup_ratio(n, r)
        if rbar <= 0.5 or (rbar < 1.0 and sup_ratio.limit > 0.5):
            pi_n = weights[-1] / running
            tail = pi_n * rbar / (1.0 - rbar)
            if tail < tol:
                return weights, tail, rbar
        if n >= _MAX_TERMS:
            raise DivergenceError("equilibrium series did not converge within the term cap")
        nxt = weights[-1] * r
        if nxt > _RESCALE_AT:
            weights = [x / _RESCALE_AT for x in weights]
            running /= _RESCALE_AT
            nxt /= _RESCALE_AT
        weights.append(nxt)
        running += nxt
        n += 1


class _DecreasingRatio:
    """Ratio bound for chains whose ratio is non-increasing in the site."""

    limit = 0.0

    def __call__(self, n, r):
        return r


def pbd_equilibrium(params: PBDParams | ABParams, tol: float = 1e-10) -> TruncatedPmf:
    """Equilibrium of PBD(alpha; 0, beta, 1) (or of the a/b form).

    The ratio ``alpha / death(n+1)`` decreases in ``n``, so once it drops to
    1/2 the omitted mass is at most ``pi_N * r / (1 - r)``.
    """
    tol = _check_tol(tol)
    if not isinstance(params, (PBDParams, ABParams)):
        raise ParameterDomainError("params must be PBDParams or ABParams")
    alpha = params.alpha
    out = _recurse(lambda n: alpha, params.death, tol, _DecreasingRatio())
    meta = {"source": type(params).__name__, "params": params.to_dict(), "tol": tol}
    return _finish(*out, meta)


def _real_roots(c: np.ndarray) -> list[float]:
    if len(c) < 2:
        return []
    return [float(z.real) for z in P.polyroots(c) if abs(z.imag) < 1e-9]


class _PolynomialRatio:
    """Ratio bound from the asymptotics of a rational function.

    ``r(x) = birth(x) / death(x + 1)`` is monotone beyond the largest real
    root of ``birth' * death1 - birth * death1'`` and tends to ``limit``, so
    past that point ``sup_{m >= n} r(m) = max(r(n), limit)``.
    """

    def __init__(self, rates: PolynomialRates):
        p = rates.birth_coeffs
        # death(x + 1) as a polynomial in x
        q = np.zeros(1)
        power = np.array([1.0])
        for c in rates.death_coeffs:
            q = P.polyadd(q, c * power)
            power = P.polymul(power, [1.0, 1.0])
        q = P.polytrim(q)
        dp, dq = len(p) - 1, len(q) - 1
        if not np.any(q):
            self.limit = math.inf
        elif dp < dq or not np.any(p):
            self.limit = 0.0
        elif dp == dq:
            self.limit = p[-1] / q[-1]
        else:
            self.limit = math.inf
        crit = P.polytrim(P.polysub(P.polymul(P.polyder(p), q), P.polymul(p, P.polyder(q))))
        roots = _real_roots(crit) + _real_roots(q)
        self.threshold = math.floor(max(roots)) + 1 if roots else 0

    def __call__(self, n, r):
        if n < self.threshold:
            return math.inf
        return max(r, self.limit)


def general_equilibrium(rates: PolynomialRates, tol: float = 1e-10) -> TruncatedPmf:
    """Equilibrium of a birth-death chain with polynomial rates."""
    tol = _check_tol(tol)
    meta = {"source": "PolynomialRates", "params": rates.to_dict(), "tol": tol}
    if rates.support_cap is not None:
        out = _recurse(rates.birth, rates.death, tol, _DecreasingRatio(), cap=rates.support_cap)
        return _finish(*out, meta)
    bound = _PolynomialRatio(rates)
    if bound.limit >= 1.0 and rates.birth(0) != 0:
        raise DivergenceError(
            f"birth/death ratio tends to {bound.limit!r} >= 1; equilibrium is not certifiably summable")
    return _finish(*_recurse(rates.birth, rates.death, tol, bound), meta)


def poisson_pmf(mean: float, tol: float = 1e-10) -> TruncatedPmf:
    """Pn(mean) as the equilibrium of the immigration-death chain."""
    mean = float(mean)
    if not math.isfinite(mean) or mean < 0:
        raise ParameterDomainError(f"Poisson mean must be >= 0, got {mean!r}")
    if mean == 0.0:
        return TruncatedPmf.point_mass(0, source="poisson", mean=0.0)
    pmf = general_equilibrium(PolynomialRates([mean], [0.0, 1.0]), tol)
    return TruncatedPmf(pmf.probs, pmf.tail_bound,
                        {"source": "poisson", "mean": mean, "tol": tol, "truncation": pmf.N,
                         "tail_ratio": pmf.meta["tail_ratio"]})


@dataclass(frozen=True)
class Moment:
    value: float
    tail_contribution: float

    def __float__(self) -> float:
        return self.value


def _tail_moment(pi_n: float, n: int, r: int, rho: float) -> float:
    # sum_{j>=1} (n+j)^r pi_n rho^j, summed until the terms are negligible
    total, j = 0.0, 1
    while True:
        term = (n + j) ** r * pi_n * rho**j
        total += term
        if term <= 1e-17 * total and (n + j + 1) ** r * rho < (n + j) ** r:
            return total
        j += 1


def moment(pmf: TruncatedPmf, r: int) -> Moment:
    """Raw moment ``sum k**r * pi_k`` over the retained support.

    ``tail_contribution`` bounds the difference to the untruncated moment.
    When the pmf carries a certified tail ratio ``rho < 1`` it covers the
    renormalization and the omitted terms ``sum_{k>N} k**r pi_k``; otherwise it
    falls back to ``tail_bound * N**r``.
    """
    if int(r) != r or r < 1:
        raise ParameterDomainError(f"moment order must be a positive integer, got {r!r}")
    r = int(r)
    k = np.arange(pmf.probs.size, dtype=float)
    value = math.fsum(k**r * pmf.probs)
    rho = pmf.meta.get("tail_ratio")
    if pmf.tail_bound == 0.0:
        tail = 0.0
    elif rho is not None and 0.0 < rho < 1.0:
        tail = pmf.tail_bound * value + _tail_moment(float(pmf.probs[-1]), pmf.N, r, rho)
    else:
        tail = pmf.tail_bound * float(max(pmf.N, 1)) ** r
    return Moment(value, tail)


def cdf_tables(pmf: TruncatedPmf) -> tuple[np.ndarray, np.ndarray]:
    """``F(i) = P(X <= i)`` and ``Fbar(i) = P(X >= i)`` for ``i = 0..N``.

    ``Fbar`` is accumulated from the right, so small upper-tail masses keep
    full relative precision instead of being computed as ``1 - F``.
    """
    p = pmf.probs
    F = np.cumsum(p)
    Fbar = np.cumsum(p[::-1])[::-1].copy()
    F.flags.writeable = False
    Fbar.flags.writeable = False
    return F, Fbar
