"""Monte-Carlo immigration-death particle system and plain birth-death paths.

The particle system lives on the integer sites. It starts with sites
``1..i`` occupied, and:

* immigrants arrive at rate ``alpha`` and take the closest vacant site left of 1;
* every particle dies at rate ``beta``;
* every particle kills each particle to its right at rate 2.

A particle's death rate is therefore ``beta + 2 * (# occupied sites to its
left)``, and the occupied count on sites ``<= i`` is the PBD birth-death
chain started at ``i``. The first vacancy time ``T_i`` of site ``i`` has
mean ``g_{f1}(i)``.

Sites right of the focus site never influence it and are not simulated.
Every event redraws a single exponential for the total rate and picks
the event categorically. This is exact by the Markov property.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dist_core import PBDParams
from .errors import ParameterDomainError, SimulationCapError

__all__ = [
    "CouplingEstimate",
    "ParticleState",
    "derive_seed",
    "estimate_gf1",
    "estimate_hitting_time",
    "occupation_fractions",
    "particle_counts_at",
    "path_to_csv",
    "bd_states_at",
    "simulate_T",
    "simulate_bd_path",
    "splitmix64",
]

MASK64 = 0xFFFFFFFFFFFFFFFF
EVENT_CAP = 10**9


def splitmix64(x: int) -> int:
    """The splitmix64 finalizer; a bijective 64-bit mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th independent sample stream under ``seed``."""
    return splitmix64((seed & MASK64) ^ splitmix64(index & MASK64))


@dataclass
class ParticleState:
    """Occupied sites ``<= i_focus`` (sorted), the clock, and the focus site."""

    i_focus: int
    occupied: list[int] = field(default_factory=list)
    t: float = 0.0

    @classmethod
    def initial(cls, i_focus: int) -> "ParticleState":
        return cls(i_focus, list(range(1, i_focus + 1)), 0.0)

    @property
    def count(self) -> int:
        return len(self.occupied)

    def immigrate(self) -> int:
        # closest vacant site to the left of site 1; occupied sites <= 0 form a sorted prefix
        site = 0
        j = bisect.bisect_right(self.occupied, 0) - 1
        while j >= 0 and self.occupied[j] == site:
            site -= 1
            j -= 1
        self.occupied.insert(j + 1, site)
        return site

    def kill_rank(self, rank: int) -> int:
        return self.occupied.pop(rank)


def _pick_rank(u: float, beta: float, z: int) -> int:
    """Rank ``r`` (0 = leftmost) with ``W(r) <= u < W(r+1)``, ``W(r) = beta r + r(r-1)``."""
    c = beta - 1.0
    r = int((-c + math.sqrt(c * c + 4.0 * u)) / 2.0)
    r = min(max(r, 0), z - 1)
    while r > 0 and beta * r + r * (r - 1) > u:
        r -= 1
    while r < z - 1 and beta * (r + 1) + (r + 1) * r <= u:
        r += 1
    return r


def _step(state: ParticleState, alpha: float, beta: float, rng: random.Random) -> int | None:
    """Advance one event; return the vacated site (``None`` for an immigration)."""
    z = state.count
    total = alpha + beta * z + z * (z - 1.0)
    state.t += rng.expovariate(total)
    u = rng.random() * total
    if u < alpha or z == 0:
        state.immigrate()
        return None
    return state.kill_rank(_pick_rank(u - alpha, beta, z))


def _check_site(i: int) -> int:
    if int(i) != i or i < 1:
        raise ParameterDomainError(f"site must be an integer >= 1, got {i!r}")
    return int(i)


def simulate_T(params: PBDParams, i: int, seed: int, max_events: int = EVENT_CAP) -> float:
    """One exact sample of ``T_i``, the first time site ``i`` becomes vacant."""
    i = _check_site(i)
    rng = random.Random(seed & MASK64)
    state = ParticleState.initial(i)
    alpha, beta = params.alpha, params.beta
    for _ in range(max_events):
        if _step(state, alpha, beta, rng) == i:
            return state.t
    raise SimulationCapError(f"T_{i} not reached within {max_events} events")


def particle_counts_at(params: PBDParams, i: int, times, seed: int,
                       max_events: int = EVENT_CAP) -> np.ndarray:
    """Occupied count on sites ``<= i`` at each of the increasing ``times``.

    The system keeps running after site ``i`` is vacated.
    """
    i = _check_site(i)
    rng = random.Random(seed & MASK64)
    state = ParticleState.initial(i)
    times = list(times)
    out = np.empty(len(times), dtype=int)
    k = 0
    for _ in range(max_events):
        z = state.count
        _step(state, params.alpha, params.beta, rng)
        while k < len(times) and times[k] < state.t:
            out[k] = z
            k += 1
        if k == len(times):
            return out
    raise SimulationCapError(f"horizon not reached within {max_events} events")


@dataclass(frozen=True)
class CouplingEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int
    target: str

    def to_dict(self) -> dict:
        return {"target": self.target, "mean": self.mean, "stderr": self.stderr,
                "n_samples": self.n_samples, "seed": self.seed}


def _summarize(samples: np.ndarray, seed: int, target: str) -> CouplingEstimate:
    n = samples.size
    mean = math.fsum(samples) / n
    var = math.fsum((samples - mean) ** 2) / (n - 1)
    return CouplingEstimate(mean, math.sqrt(var / n), n, seed, target)


def _t_chunk(args) -> list[float]:
    alpha, beta, i, seed, lo, hi = args
    params = PBDParams(alpha, beta)
    return [simulate_T(params, i, derive_seed(seed, k)) for k in range(lo, hi)]


def _run_chunks(fn, head: tuple, n: int, workers: int) -> np.ndarray:
    if workers <= 1:
        return np.asarray(fn(head + (0, n)), dtype=float)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    jobs = [head + (int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, jobs))
    return np.asarray([x for part in parts for x in part], dtype=float)


def estimate_gf1(params: PBDParams, i: int, n_samples: int = 100_000, seed: int = 0,
                 workers: int = 1) -> CouplingEstimate:
    """Monte-Carlo mean of ``T_i``, an independent estimate of ``g_{f1}(i)``.

    Sample ``k`` uses the stream ``derive_seed(seed, k)``, so the result is
    the same for any ``workers``.
    """
    i = _check_site(i)
    if int(n_samples) != n_samples or n_samples < 100:
        raise ParameterDomainError(f"n_samples must be an integer >= 100, got {n_samples!r}")
    samples = _run_chunks(_t_chunk, (params.alpha, params.beta, i, seed), int(n_samples), workers)
    return _summarize(samples, seed, f"E T_{i}")


# -- plain birth-death chain ----------------------------------------------------


def _bd_event(k: int, alpha: float, params: PBDParams, rng: random.Random) -> tuple[float, int]:
    death = params.death(k)
    total = alpha + death
    dt = rng.expovariate(total)
    return dt, (k + 1 if rng.random() * total < alpha else k - 1)


def simulate_bd_path(params: PBDParams, i0: int, t_horizon: float, seed: int,
                     max_events: int = EVENT_CAP) -> list[tuple[float, int]]:
    """Exact path of the chain (birth ``alpha``, death ``beta k + k(k-1)``) on ``[0, t_horizon]``.

    Returns ``(jump time, new state)`` pairs, starting with ``(0.0, i0)``.
    """
    if int(i0) != i0 or i0 < 0:
        raise ParameterDomainError(f"i0 must be a non-negative integer, got {i0!r}")
    t_horizon = float(t_horizon)
    if not (t_horizon > 0 and math.isfinite(t_horizon)):
        raise ParameterDomainError(f"t_horizon must be finite and > 0, got {t_horizon!r}")
    rng = random.Random(seed & MASK64)
    alpha = params.alpha
    t, k = 0.0, int(i0)
    path = [(0.0, k)]
    for _ in range(max_events):
        dt, nxt = _bd_event(k, alpha, params, rng)
        t += dt
        if t > t_horizon:
            return path
        k = nxt
        path.append((t, k))
    raise SimulationCapError(f"horizon {t_horizon} not reached within {max_events} events")


def bd_states_at(params: PBDParams, i0: int, times, seed: int,
                 max_events: int = EVENT_CAP) -> np.ndarray:
    """Chain state at each of the increasing ``times``."""
    rng = random.Random(seed & MASK64)
    alpha = params.alpha
    times = list(times)
    out = np.empty(len(times), dtype=int)
    t, k, j = 0.0, int(i0), 0
    for _ in range(max_events):
        dt, nxt = _bd_event(k, alpha, params, rng)
        t += dt
        while j < len(times) and times[j] < t:
            out[j] = k
            j += 1
        if j == len(times):
            return out
        k = nxt
    raise SimulationCapError(f"horizon not reached within {max_events} events")


def occupation_fractions(path: list[tuple[float, int]], t_horizon: float,
                         burn_in: float = 0.1) -> np.ndarray:
    """Fraction of ``[burn_in * t_horizon, t_horizon]`` spent in each state."""
    start = burn_in * t_horizon
    top = max(k for _, k in path)
    occ = np.zeros(top + 1)
    ends = [t for t, _ in path[1:]] + [t_horizon]
    for (t0, k), t1 in zip(path, ends):
        lo, hi = max(t0, start), min(t1, t_horizon)
        if hi > lo:
            occ[k] += hi - lo
    return occ / (t_horizon - start)


def _hit_chunk(args) -> list[float]:
    alpha, beta, start, target, seed, lo, hi = args
    params = PBDParams(alpha, beta)
    out = []
    for s in range(lo, hi):
        rng = random.Random(derive_seed(seed, s))
        t, k = 0.0, start
        for _ in range(EVENT_CAP):
            dt, k = _bd_event(k, alpha, params, rng)
            t += dt
            if k == target:
                break
        else:
            raise SimulationCapError("target not hit within the event cap")
        out.append(t)
    return out


def estimate_hitting_time(params: PBDParams, start: int, target: int, n_samples: int = 100_000,
                          seed: int = 0, workers: int = 1) -> CouplingEstimate:
    """Mean first passage time from ``start`` to an adjacent ``target``."""
    if abs(start - target) != 1 or target < 0:
        raise ParameterDomainError("target must be adjacent to start and non-negative")
    if n_samples < 2:
        raise ParameterDomainError("n_samples must be >= 2")
    samples = _run_chunks(_hit_chunk, (params.alpha, params.beta, start, target, seed),
                          int(n_samples), workers)
    return _summarize(samples, seed, f"E tau {start}->{target}")


def path_to_csv(path: list[tuple[float, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "state"])
    for t, k in path:
        w.writerow([repr(float(t)), k])
    return buf.getvalue()
