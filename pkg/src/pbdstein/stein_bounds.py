"""Closed-form Stein-factor and approximation-error bounds.

Each function returns a :class:`BoundReport`: a flat map from bound id to
value, where a bound whose precondition fails is recorded as inapplicable
with a reason instead of a number.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dist_core import PBDParams
from .errors import InapplicableError, ParameterDomainError
from .poisson_binomial import BernoulliProfile, fit_pbd

__all__ = [
    "BOUND_IDS",
    "BoundReport",
    "approx_bounds",
    "factor_bounds",
    "factor_bounds_ab",
    "mean_bracket",
    "poisson_factor_bounds",
]

BOUND_IDS = (
    "sup_g_15", "sup_dg_16", "sup_d2g_17", "sup_gt_18", "sup_dgt_19", "sup_d2gt_110",
    "pn_g_111", "pn_dg_112", "pn_d2g_113", "bx_shifted", "pbd_application_114",
    "remark_sigma", "mean_lower_210", "mean_upper_210",
)


@dataclass
class BoundReport:
    values: dict[str, float] = field(default_factory=dict)
    inapplicable: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        if key in self.inapplicable:
            raise InapplicableError(self.inapplicable[key])
        return self.values[key]

    def __contains__(self, key: str) -> bool:
        return key in self.values or key in self.inapplicable

    def set(self, key: str, value: float) -> None:
        value = float(value)
        if not (math.isfinite(value) and value >= 0):
            raise ParameterDomainError(f"bound {key} evaluated to {value!r}")
        self.values[key] = value

    def mark(self, key: str, reason: str) -> None:
        self.inapplicable[key] = reason

    def update(self, other: "BoundReport") -> "BoundReport":
        self.values.update(other.values)
        self.inapplicable.update(other.inapplicable)
        return self

    def to_dict(self) -> dict:
        out: dict = {k: v for k, v in self.values.items()}
        for k, why in self.inapplicable.items():
            out[k] = None
            out[f"{k}_reason"] = why
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bound_id", "value"])
        for k in sorted(set(self.values) | set(self.inapplicable)):
            w.writerow([k, repr(self.values[k]) if k in self.values else ""])
        return buf.getvalue()


def _positive(name: str, x: float) -> float:
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise ParameterDomainError(f"{name} must be finite and > 0, got {x!r}")
    return x


def _root_plus(x: float, c: float) -> float:
    # sqrt(x + c^2) + c without cancellation when c < 0
    r = math.sqrt(x + c * c)
    return r + c if c >= 0 else x / (r - c)


def factor_bounds(params: PBDParams | None = None, *, alpha: float | None = None,
                  beta: float | None = None) -> BoundReport:
    """Bounds on ``sup ||g_f||``, ``sup ||Delta g_f||``, ``sup ||Delta^2 g_f||`` for PBD(alpha; 0, beta, 1)."""
    if params is not None:
        alpha, beta = params.alpha, params.beta
    a, b = _positive("alpha", alpha), _positive("beta", beta)
    rep = BoundReport()
    g_first = 1.0 / (b + 2.0 * a / (a + 2.0 * b + 2.0))
    g_second = _root_plus(a, (1.0 - b) / 2.0) / a
    rep.set("sup_g_15", min(g_first, g_second))
    dg_first = 1.0 / (b + 1.0) + (a + 2.0) / (a * (a + 2.0) + 2.0 * b * (a + b + 1.0))
    dg_second = 1.0 / math.sqrt(a) + 1.0 / a
    rep.set("sup_dg_16", min(dg_first, dg_second))
    rep.set("sup_d2g_17", 2.0 / a + 1.0 / (a + b * (1.0 + b + a / 2.0)))
    rep.set("sup_d2g_17_relaxed", 3.0 / a)
    rep.update(mean_bracket(a, b))
    return rep


def mean_bracket(alpha: float, beta: float) -> BoundReport:
    """Lower and upper bounds on the mean of PBD(alpha; 0, beta, 1)."""
    a, b = _positive("alpha", alpha), _positive("beta", beta)
    rep = BoundReport()
    rep.set("mean_lower_210", 2.0 * a * (a + b + 1.0) / (2.0 * (b + 1.0) * (a + b) + a * a))
    rep.set("mean_upper_210", a * (a + 2.0 * b + 2.0) / (b * (a + 2.0 * b + 2.0) + 2.0 * a))
    return rep


def factor_bounds_ab(a: float, b: float) -> BoundReport:
    """Bounds for the rescaled solution of PBD(a; 0, 1, b).

    At ``b = 0`` the second branch of the ``sup ||g||`` bound is the 0/0
    limit 1, and the ``1/sqrt(ab)`` branch of the ``Delta`` bound is +inf.
    """
    a = _positive("a", a)
    b = float(b)
    if not (math.isfinite(b) and b >= 0):
        raise ParameterDomainError(f"b must be finite and >= 0, got {b!r}")
    rep = BoundReport()
    x = a * b
    first = 1.0 / (1.0 + 2.0 * x / (a + 2.0 * b + 2.0))
    if b == 0.0:
        second = 1.0
    else:
        second = _root_plus(x, (b - 1.0) / 2.0) / x
    rep.set("sup_gt_18", min(first, second))
    dg_first = 1.0 / (1.0 + b) + (a + 2.0 * b) / (a * a + 2.0 * a + 2.0 + 2.0 * b * (a + 1.0))
    dg_second = math.inf if b == 0.0 else 1.0 / math.sqrt(x) + 1.0 / a
    rep.set("sup_dgt_19", min(dg_first, dg_second))
    rep.set("sup_d2gt_110", 2.0 / a + b / ((a + 1.0) * b + 1.0 + a / 2.0))
    return rep


def poisson_factor_bounds(a: float) -> BoundReport:
    """Known Pn(a) Stein factors in the Wasserstein setting."""
    a = _positive("a", a)
    rep = BoundReport()
    rep.set("pn_g_111", 1.0)
    rep.set("pn_dg_112", min(1.0, 8.0 / (3.0 * math.sqrt(2.0 * math.e * a))))
    rep.set("pn_d2g_113", min(4.0 / 3.0, 2.0 / a))
    return rep


def _sigmas(p: np.ndarray) -> tuple[float, float]:
    rho = np.sort(p * (1.0 - p))[::-1]
    return math.sqrt(math.fsum(rho[1:])), math.sqrt(math.fsum(rho[2:]))


def approx_bounds(profile: BernoulliProfile) -> BoundReport:
    """Error bounds for approximating the Poisson-binomial law.

    ``pbd_application_114``: d_W to the fitted PBD; ``bx_shifted``: d_W to
    the shifted Poisson (stated for integer ``lambda_2``); ``remark_sigma``:
    the alternative PBD bound through the first-difference factor.
    """
    rep = BoundReport()
    lam, lam2, lam3 = profile.lam, profile.lam2, profile.lam3
    if lam > lam2:
        rep.set("bx_shifted", 4.0 * lam2 / (lam - lam2))
    else:
        rep.mark("bx_shifted", "requires lambda > lambda_2")
    try:
        params = fit_pbd(profile)
    except InapplicableError as exc:
        for key in ("pbd_application_114", "remark_sigma"):
            rep.mark(key, f"PBD fit inapplicable: {exc.condition}")
        return rep
    theta2, theta3 = lam2 / lam, lam3 / lam
    denom = lam - lam2 - (1.0 + theta2) * theta2
    if denom > 0:
        rep.set("pbd_application_114", 3.0 * theta3 + 6.0 * theta2 * lam2 / denom)
    else:
        rep.mark("pbd_application_114", "requires lambda - lambda_2 - (1 + theta_2) theta_2 > 0")
    s1, s2 = _sigmas(profile.p)
    if s2 > 0 and s1 > 0:
        a, b = params.alpha, params.beta
        rep.set("remark_sigma", (b * lam3 / s1 + 2.0 * lam * lam2 / s2) * (1.0 / math.sqrt(a) + 1.0 / a))
    else:
        rep.mark("remark_sigma", "requires sigma_2 > 0 (at least three non-degenerate summands)")
    return rep
