"""Continuous-time branching on counts: direct and survival-conditioned runs.

Each individual lives an Exponential(rate) lifetime and is replaced by Z
children drawn from a finite-support offspring law.  Deep-horizon statistics
conditioned on survival are estimated with an exact bridge: the process
conditioned on {X_t != 0} is a time-inhomogeneous Markov chain whose rates
are tilted by survival probabilities u_i(s) = 1 - q(s)^i, where q solves the
scalar generating-function ODE q' = rate*(E[q^Z] - q); the bridge samples it
by thinning.  Direct Monte Carlo at 10^6 reps produces on the order of one
surviving run at t = 40 for the reference law, so the bridge is the only
sound estimator there; both are cross-checked at small t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..streams import _MASK64

_U_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class OffspringDist:
    """Finite-support offspring law with the subcriticality bookkeeping."""

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be non-empty and equal length")
        if any(v < 0 or int(v) != v for v in self.values):
            raise ValueError("offspring counts must be nonnegative integers")
        if len(set(self.values)) != len(self.values):
            raise ValueError("duplicate offspring values")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector")

    @classmethod
    def from_pmf(cls, pmf: dict[int, float]) -> "OffspringDist":
        items = sorted(pmf.items())
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items))

    @property
    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs)))

    @property
    def subcritical(self) -> bool:
        return self.mean < 1.0

    @property
    def non_lazy(self) -> bool:
        lazy = sum(p for v, p in zip(self.values, self.probs) if v in (0, 1))
        return lazy < 1.0

    @property
    def max_children(self) -> int:
        return max(self.values)

    def prob_of(self, z: int) -> float:
        for v, p in zip(self.values, self.probs):
            if v == z:
                return p
        return 0.0

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.values, dtype=np.int64),
            np.asarray(self.probs, dtype=np.float64),
        )


REFERENCE_DIST = OffspringDist.from_pmf({0: 2 / 3, 2: 1 / 3})


class AbsorbedError(RuntimeError):
    pass


def step_branching(count: int, dist: OffspringDist, stream: np.random.Generator, rate: float = 1.0):
    """One event: waiting time ~ Exp(rate*count), one individual branches."""
    if count < 1:
        raise AbsorbedError("no events from the empty population")
    dt = stream.exponential(1.0 / (rate * count))
    z = int(stream.choice(dist.values, p=dist.probs))
    return dt, count - 1 + z


# ---------------------------------------------------------------------------
# numba kernels (splitmix64 per-rep streams)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _u01(state):
    state = state + _U_GOLDEN
    z = _mix(state)
    return state, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _sim_counts_g(seed, i0, t, k_pairs, reps, values, cdf, rate):
    """Direct runs; returns per-rep final count and completed 1,2-alternations."""
    finals = np.zeros(reps, dtype=np.int64)
    pairs = np.zeros(reps, dtype=np.int64)
    for r in range(reps):
        state = _mix(_mix(np.uint64(seed)) ^ (np.uint64(r + 1) * _U_GOLDEN))
        x = i0
        s = 0.0
        looking = 1
        done = 0
        if x == looking:
            looking = 2
        while x > 0:
            state, u = _u01(state)
            if u <= 0.0:
                u = 1e-300
            s -= np.log(u) / (rate * x)
            if s >= t:
                break
            state, u = _u01(state)
            z = values[0]
            for j in range(cdf.shape[0]):
                if u < cdf[j]:
                    z = values[j]
                    break
            x = x - 1 + z
            if x == looking:
                if looking == 2:
                    done += 1
                    looking = 1
                else:
                    looking = 2
            if done >= k_pairs and k_pairs > 0:
                pass  # keep evolving; survival at t still required
        finals[r] = x
        pairs[r] = done
    return finals, pairs


@njit(cache=True)
def _bridge_one(state, i0, t, q_grid, dt_grid, values, probs, rate, out_times, out_z):
    """One survival-conditioned trajectory by thinning; returns event count.

    Rates from state i at remaining time r: i*rate*p_z*u_j(r)/u_i(r) with
    j = i-1+z and u_i(r) = 1 - q(r)^i; envelope rate*(i + z_max).
    """
    zmax = values[-1]
    i = i0
    s = 0.0
    n_ev = 0
    nq = q_grid.shape[0]
    while True:
        lam_env = rate * (i + zmax)
        state, u = _u01(state)
        if u <= 0.0:
            u = 1e-300
        s -= np.log(u) / lam_env
        if s >= t:
            return state, n_ev
        r = t - s
        # interpolate q(r)
        pos = r / dt_grid
        idx = int(pos)
        if idx >= nq - 1:
            q = q_grid[nq - 1]
        else:
            frac = pos - idx
            q = q_grid[idx] * (1.0 - frac) + q_grid[idx + 1] * frac
        ui = 1.0 - q**i
        total = 0.0
        for j in range(values.shape[0]):
            nxt = i - 1 + values[j]
            if nxt <= 0:
                continue
            total += probs[j] * (1.0 - q**nxt)
        true_rate = rate * i * total / ui
        state, u = _u01(state)
        if u * lam_env >= true_rate:
            continue
        # accepted: choose z proportional to tilted weights
        state, u = _u01(state)
        target = u * total
        acc = 0.0
        z = values[0]
        for j in range(values.shape[0]):
            nxt = i - 1 + values[j]
            if nxt <= 0:
                continue
            acc += probs[j] * (1.0 - q**nxt)
            if target < acc:
                z = values[j]
                break
        i = i - 1 + z
        out_times[n_ev] = s
        out_z[n_ev] = z
        n_ev += 1
        if n_ev >= out_times.shape[0]:
            return state, -1  # buffer overflow; caller must enlarge


@njit(cache=True)
def _bridge_g(seed, i0, t, k_pairs, reps, q_grid, dt_grid, values, probs, rate):
    """Completed alternation pairs along conditioned trajectories."""
    pairs = np.zeros(reps, dtype=np.int64)
    buf_t = np.empty(100000, dtype=np.float64)
    buf_z = np.empty(100000, dtype=np.int64)
    for r in range(reps):
        state = _mix(_mix(np.uint64(seed)) ^ (np.uint64(r + 1) * _U_GOLDEN))
        state, n_ev = _bridge_one(state, i0, t, q_grid, dt_grid, values, probs, rate, buf_t, buf_z)
        x = i0
        looking = 1
        done = 0
        if x == looking:
            looking = 2
        for e in range(n_ev):
            x = x - 1 + buf_z[e]
            if x == looking:
                if looking == 2:
                    done += 1
                    looking = 1
                else:
                    looking = 2
        pairs[r] = done
    return pairs


def extinction_grid(dist: OffspringDist, t: float, rate: float = 1.0, n_steps: int = 4000):
    """q(s) = P(extinct by s from one individual) on a uniform grid via RK4.

    Solves q' = rate*(E[q^Z] - q), q(0) = 0.
    """
    values, probs = dist.arrays()

    def f(q):
        return rate * (float(np.sum(probs * q**values)) - q)

    dt = t / n_steps
    q = np.zeros(n_steps + 1)
    for k in range(n_steps):
        y = q[k]
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        q[k + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return q, dt


def survival_probability(dist: OffspringDist, i0: int, t: float, rate: float = 1.0) -> float:
    q, _ = extinction_grid(dist, t, rate)
    return 1.0 - float(q[-1]) ** i0


def simulate_final_counts(
    dist: OffspringDist, i0: int, t: float, reps: int, seed: int, rate: float = 1.0
) -> np.ndarray:
    values, probs = dist.arrays()
    cdf = np.cumsum(probs)
    finals, _ = _sim_counts_g(
        np.uint64(seed & _MASK64), i0, t, 0, reps, values, cdf, rate
    )
    return finals


def bridge_trajectory(
    dist: OffspringDist,
    i0: int,
    t: float,
    seed: int,
    rep: int,
    q_grid: np.ndarray,
    dt_grid: float,
    rate: float = 1.0,
    max_events: int = 100000,
):
    """Event times and offspring draws of one conditioned trajectory."""
    values, probs = dist.arrays()
    buf_t = np.empty(max_events, dtype=np.float64)
    buf_z = np.empty(max_events, dtype=np.int64)
    base = int(_mix(np.uint64(seed & _MASK64)))
    spread = ((rep + 1) * int(_U_GOLDEN)) & _MASK64
    state = np.uint64(int(_mix(np.uint64(base ^ spread))))
    _, n_ev = _bridge_one(state, i0, t, q_grid, dt_grid, values, probs, rate, buf_t, buf_z)
    if n_ev < 0:
        raise RuntimeError("bridge event buffer overflow")
    return buf_t[:n_ev].copy(), buf_z[:n_ev].copy()


def estimate_g(
    dist: OffspringDist,
    t: float,
    k: int,
    reps: int,
    seed: int,
    rate: float = 1.0,
    method: str = "auto",
) -> dict:
    """P(G_t(k) | survival at t): k alternating visits to 1 then 2 before t.

    method "direct" conditions by rejection; "bridge" simulates the
    conditioned chain exactly; "auto" uses the bridge when fewer than ~100
    surviving runs are expected from the requested direct reps.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return {"p_hat": 1.0, "survivors": reps, "method": "trivial", "reps": reps}
    values, probs = dist.arrays()
    if method == "auto":
        expected_survivors = reps * survival_probability(dist, 1, t, rate)
        method = "direct" if expected_survivors >= 100 else "bridge"
    if method == "direct":
        cdf = np.cumsum(probs)
        finals, pairs = _sim_counts_g(
            np.uint64(seed & _MASK64), 1, t, k, reps, values, cdf, rate
        )
        alive = finals > 0
        survivors = int(alive.sum())
        if survivors == 0:
            raise RuntimeError("no surviving runs; use the bridge estimator")
        hits = int((pairs[alive] >= k).sum())
    elif method == "bridge":
        q_grid, dt_grid = extinction_grid(dist, t, rate)
        pairs = _bridge_g(
            np.uint64(seed & _MASK64), 1, t, k, reps, q_grid, dt_grid, values, probs, rate
        )
        survivors = reps
        hits = int((pairs >= k).sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    from ..harness import binomial_ci

    ci = binomial_ci(hits, survivors, 0.95)
    return {
        "p_hat": hits / survivors,
        "ci_lo": ci[0],
        "ci_hi": ci[1],
        "survivors": survivors,
        "method": method,
        "reps": reps,
    }
