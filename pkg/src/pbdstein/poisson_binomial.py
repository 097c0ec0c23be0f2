"""Poisson-binomial laws, their power sums, and the PBD two-moment fit."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist_core import PBDParams, TruncatedPmf, poisson_pmf
from .errors import InapplicableError, NumericalConsistencyError, ParameterDomainError

__all__ = [
    "BernoulliProfile",
    "BorderlineFitWarning",
    "ReferenceLaws",
    "exact_pmf",
    "fit_condition",
    "fit_pbd",
    "lambda_theta",
    "load_profile",
    "reference_laws",
]

BORDERLINE = 1e-12
INTEGER_SHIFT_TOL = 1e-9


class BorderlineFitWarning(UserWarning):
    """The fit condition is within rounding distance of zero."""


@dataclass(frozen=True, eq=False)
class BernoulliProfile:
    """Success probabilities ``p_1, ..., p_n`` of independent Bernoulli summands."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        if p.size < 1:
            raise ParameterDomainError("a profile needs at least one probability")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ParameterDomainError("every p_i must lie in [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        # correctly rounded power sums, hence exactly permutation invariant
        object.__setattr__(self, "_lam", tuple(math.fsum(p**r) for r in (1, 2, 3)))

    @property
    def n(self) -> int:
        return self.p.size

    def power_sum(self, r: int) -> float:
        if 1 <= r <= 3:
            return self._lam[r - 1]
        return math.fsum(self.p**r)

    @property
    def lam(self) -> float:
        return self._lam[0]

    @property
    def lam2(self) -> float:
        return self._lam[1]

    @property
    def lam3(self) -> float:
        return self._lam[2]

    @classmethod
    def from_json(cls, text: str) -> "BernoulliProfile":
        data = json.loads(text)
        if not isinstance(data, dict) or "p" not in data:
            raise ParameterDomainError('profile JSON must be an object with key "p"')
        return cls(data["p"])

    @classmethod
    def from_csv(cls, text: str) -> "BernoulliProfile":
        values = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line.split(",")[0]))
            except ValueError:
                if values:
                    raise ParameterDomainError(f"not a probability: {line!r}") from None
                # tolerate a header row
        return cls(values)

    def to_dict(self) -> dict:
        return {"p": self.p.tolist()}


def load_profile(path: str | Path) -> BernoulliProfile:
    """Read a profile from ``.json`` (``{"p": [...]}``) or CSV (one value per line)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return BernoulliProfile.from_json(text)
    return BernoulliProfile.from_csv(text)


def _convolve_all(p) -> np.ndarray:
    dist = np.zeros(len(p) + 1)
    dist[0] = 1.0
    for i, q in enumerate(p):
        # states 0..i+1 after the (i+1)-th summand
        dist[1 : i + 2] = dist[1 : i + 2] * (1.0 - q) + dist[: i + 1] * q
        dist[0] *= 1.0 - q
    return dist


def exact_pmf(profile: BernoulliProfile) -> TruncatedPmf:
    """Law of ``W = X_1 + ... + X_n`` on ``{0, ..., n}`` by iterated convolution."""
    dist = _convolve_all(profile.p)
    return TruncatedPmf(dist, 0.0, {"source": "poisson_binomial", "n": profile.n})


def leave_out_pmf(profile: BernoulliProfile, *drop: int) -> np.ndarray:
    """Law of ``W`` with the summands at indices ``drop`` removed."""
    keep = np.ones(profile.n, dtype=bool)
    keep[list(drop)] = False
    return _convolve_all(profile.p[keep])


def lambda_theta(profile: BernoulliProfile, r: int) -> tuple[float, float]:
    """``(lambda_r, theta_r)`` with ``lambda_r = sum p_i**r`` and ``theta_r = lambda_r / lambda_1``."""
    if int(r) != r or r < 1:
        raise ParameterDomainError(f"r must be a positive integer, got {r!r}")
    lam_r = profile.power_sum(int(r))
    if profile.lam == 0.0:
        raise ParameterDomainError("theta_r is undefined for an all-zero profile (lambda_1 = 0)")
    return lam_r, lam_r / profile.lam


def fit_condition(profile: BernoulliProfile) -> float:
    """``lambda**2 / lambda_2 - 1 - 2*lambda``; the fit needs this to be >= 0."""
    if profile.lam2 == 0.0:
        raise InapplicableError("lambda_2 > 0", "degenerate profile: lambda_2 = 0 (all p_i are 0)")
    lam = profile.lam
    return lam * lam / profile.lam2 - 1.0 - 2.0 * lam


def fit_pbd(profile: BernoulliProfile) -> PBDParams:
    """Match PBD(alpha; 0, beta, 1) to the profile.

    ``beta = lambda^2/lambda_2 - 1 - 2 lambda + 2 lambda_3/lambda_2`` and
    ``alpha = beta*lambda + lambda^2 - lambda_2``. Raises
    :class:`InapplicableError` when ``lambda^2/lambda_2 - 1 - 2 lambda < 0``.
    """
    cond = fit_condition(profile)
    lam, lam2, lam3 = profile.lam, profile.lam2, profile.lam3
    if cond < -BORDERLINE:
        raise InapplicableError(
            "lambda^2/lambda_2 - 1 - 2*lambda >= 0",
            f"PBD fit inapplicable: lambda^2/lambda_2 - 1 - 2*lambda = {cond!r} < 0")
    if abs(cond) <= BORDERLINE:
        warnings.warn(f"fit condition is borderline ({cond!r})", BorderlineFitWarning, stacklevel=2)
    beta = cond + 2.0 * lam3 / lam2
    alpha = beta * lam + lam * lam - lam2
    params = PBDParams(alpha, beta)
    # inequalities the approximation bound relies on
    slack = 1e-10 * max(abs(alpha), 1.0)
    lower = lam**3 / lam2 - lam - lam * lam - lam2
    if alpha < beta * lam - slack or alpha < lower - slack:
        raise NumericalConsistencyError(f"fitted alpha={alpha!r} violates alpha >= beta*lambda or its lower bound")
    return params


@dataclass(frozen=True)
class ReferenceLaws:
    poisson: TruncatedPmf
    shifted_poisson: TruncatedPmf
    shift: int
    integer_shift: bool


def reference_laws(profile: BernoulliProfile, tol: float = 1e-10) -> ReferenceLaws:
    """Pn(lambda) and the shifted Poisson ``delta_s * Pn(lambda - s)``.

    With integer ``lambda_2`` the shift is ``s = lambda_2``.  Otherwise ``s``
    is ``floor(lambda_2)`` and ``integer_shift`` is False: the law is only a
    comparison surrogate for the two-moment match.
    """
    lam, lam2 = profile.lam, profile.lam2
    if lam - lam2 < 0:
        raise ParameterDomainError("lambda - lambda_2 must be >= 0")
    nearest = round(lam2)
    integer = abs(lam2 - nearest) <= INTEGER_SHIFT_TOL
    shift = int(nearest) if integer else int(math.floor(lam2))
    poisson = poisson_pmf(lam, tol)
    base = poisson_pmf(max(lam - shift, 0.0), tol)
    shifted = TruncatedPmf(np.concatenate([np.zeros(shift), base.probs]), base.tail_bound,
                           {"source": "shifted_poisson", "mean": lam - shift, "shift": shift,
                            "integer_shift": integer, "lambda_2": lam2})
    return ReferenceLaws(poisson, shifted, shift, integer)
