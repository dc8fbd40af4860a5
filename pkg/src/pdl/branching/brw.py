"""Branching random walk on Z^d and the walker reconstruction.

Particles die at rate 1 and at rate lam give birth onto a uniformly chosen
nearest neighbor; the count projection is the {0, 2}-offspring branching
process with per-capita event rate 1 + lam.  Configurations are compared
modulo translations by shifting the lexicographically smallest occupied site
to the origin.

The walker of a founder follows births: when the current walker gives birth,
the child takes over iff it has alive descendants at the horizon, which needs
look-ahead; the reconstruction therefore replays a recorded event log.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counts import AbsorbedError, OffspringDist, bridge_trajectory, extinction_grid


def brw_offspring(lam: float) -> OffspringDist:
    """Count projection: Z in {0, 2} with p(2) = lam/(1+lam), event rate 1+lam."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return OffspringDist.from_pmf({0: 1 / (1 + lam), 2: lam / (1 + lam)})


def canonical_brw(occupancy: dict[tuple, int]) -> tuple:
    """Translation-canonical encoding: sorted (site, count) pairs shifted so
    the lexicographically smallest occupied site is the origin."""
    sites = sorted(occupancy)
    if not sites:
        return ()
    base = sites[0]
    return tuple(
        (tuple(c - b for c, b in zip(s, base)), occupancy[s]) for s in sites
    )


def support_diameter(occupancy: dict[tuple, int]) -> int:
    """Largest coordinate span of the occupied set (0 for <= 1 site)."""
    sites = list(occupancy)
    if len(sites) <= 1:
        return 0
    arr = np.asarray(sites)
    return int((arr.max(axis=0) - arr.min(axis=0)).max())


@dataclass
class BrwEvent:
    time: float
    actor: int
    kind: str  # "birth" | "death"
    child: int = -1
    direction: tuple = ()


@dataclass
class BrwRun:
    """Particle-level trajectory with the replayable event log."""

    d: int
    positions: list  # per particle id
    parents: list
    alive: set
    events: list = field(default_factory=list)

    def occupancy(self) -> dict[tuple, int]:
        occ: dict[tuple, int] = {}
        for pid in self.alive:
            s = self.positions[pid]
            occ[s] = occ.get(s, 0) + 1
        return occ


def simulate_brw(
    initial_sites: list[tuple],
    lam: float,
    t: float,
    stream: np.random.Generator,
    d: int | None = None,
) -> BrwRun:
    """Direct simulation to time t, recording every event."""
    if not initial_sites:
        raise AbsorbedError("empty initial configuration")
    d = d if d is not None else len(initial_sites[0])
    run = BrwRun(
        d,
        [tuple(s) for s in initial_sites],
        [-1] * len(initial_sites),
        set(range(len(initial_sites))),
    )
    alive = list(range(len(initial_sites)))
    now = 0.0
    p_birth = lam / (1 + lam)
    while alive:
        n = len(alive)
        now += stream.exponential(1.0 / ((1 + lam) * n))
        if now >= t:
            break
        idx = int(stream.integers(n))
        pid = alive[idx]
        if stream.uniform() < p_birth:
            axis = int(stream.integers(d))
            sign = 1 if stream.uniform() < 0.5 else -1
            delta = tuple(sign if a == axis else 0 for a in range(d))
            child_pos = tuple(p + q for p, q in zip(run.positions[pid], delta))
            child = len(run.positions)
            run.positions.append(child_pos)
            run.parents.append(pid)
            run.alive.add(child)
            alive.append(child)
            run.events.append(BrwEvent(now, pid, "birth", child, delta))
        else:
            run.alive.discard(pid)
            alive[idx] = alive[-1]
            alive.pop()
            run.events.append(BrwEvent(now, pid, "death"))
    return run


def step_brw(
    occupancy: dict[tuple, int], lam: float, stream: np.random.Generator
) -> tuple[float, dict[tuple, int]]:
    """One event on the occupancy map; returns (dt, new occupancy)."""
    n = sum(occupancy.values())
    if n == 0:
        raise AbsorbedError("empty configuration is absorbing")
    dt = stream.exponential(1.0 / ((1 + lam) * n))
    sites = sorted(occupancy)
    weights = np.array([occupancy[s] for s in sites], dtype=np.float64)
    site = sites[int(stream.choice(len(sites), p=weights / weights.sum()))]
    occ = dict(occupancy)
    if stream.uniform() < lam / (1 + lam):
        d = len(site)
        axis = int(stream.integers(d))
        sign = 1 if stream.uniform() < 0.5 else -1
        nbr = tuple(c + (sign if a == axis else 0) for a, c in enumerate(site))
        occ[nbr] = occ.get(nbr, 0) + 1
    else:
        occ[site] -= 1
        if occ[site] == 0:
            del occ[site]
    return dt, occ


def walker_path(run: BrwRun, founder: int, t: float) -> list[tuple]:
    """Jump directions of the founder's walker up to time t.

    Offline reconstruction: at each birth by the current walker, the child
    becomes the walker iff it has alive descendants at time t.
    """
    n = len(run.positions)
    alive_at_t = np.zeros(n, dtype=bool)
    for pid in run.alive:
        alive_at_t[pid] = True
    # children have larger ids: propagate "has alive descendant" upward
    has_alive = alive_at_t.copy()
    for pid in range(n - 1, -1, -1):
        if has_alive[pid] and run.parents[pid] >= 0:
            has_alive[run.parents[pid]] = True
    if not has_alive[founder]:
        raise AbsorbedError(f"founder {founder} has no alive descendant at t={t}")
    walker = founder
    jumps = []
    for ev in run.events:
        if ev.time >= t:
            break
        if ev.kind == "birth" and ev.actor == walker and has_alive[ev.child]:
            jumps.append(ev.direction)
            walker = ev.child
    return jumps


def walker_jump_counts(
    lam: float,
    d: int,
    t: float,
    target_jumps: int,
    seed: int,
    max_runs: int = 10**7,
) -> np.ndarray:
    """Aggregate walker jump directions over surviving runs.

    Returns counts over the 2d unit directions, collected until at least
    target_jumps jumps have been recorded.
    """
    stream = np.random.default_rng(seed)
    counts = np.zeros(2 * d, dtype=np.int64)
    total = 0
    runs = 0
    while total < target_jumps and runs < max_runs:
        runs += 1
        run = simulate_brw([tuple([0] * d)], lam, t, stream)
        if not run.alive:
            continue
        try:
            jumps = walker_path(run, 0, t)
        except AbsorbedError:
            continue
        for delta in jumps:
            axis = max(range(d), key=lambda a: abs(delta[a]))
            idx = 2 * axis + (0 if delta[axis] > 0 else 1)
            counts[idx] += 1
            total += 1
    return counts


def conditioned_brw(
    lam: float,
    n_founders: int,
    d: int,
    t: float,
    seed: int,
    rep: int,
    q_grid,
    dt_grid,
    stream: np.random.Generator,
) -> tuple[dict[tuple, int], set[int]]:
    """Survival-conditioned configuration at t via the count bridge.

    Returns (occupancy, founder labels with alive descendants).  Given the
    count path, actors are uniform among the living and birth directions are
    uniform among neighbors, which realizes the conditional law exactly.
    """
    dist = brw_offspring(lam)
    _, zs = bridge_trajectory(dist, n_founders, t, seed, rep, q_grid, dt_grid, rate=1 + lam)
    origin = tuple([0] * d)
    positions = [origin] * n_founders
    founders = list(range(n_founders))
    alive = list(range(n_founders))
    for z in zs:
        idx = int(stream.integers(len(alive)))
        pid = alive[idx]
        if z == 0:
            alive[idx] = alive[-1]
            alive.pop()
        else:
            axis = int(stream.integers(d))
            sign = 1 if stream.uniform() < 0.5 else -1
            delta = tuple(sign if a == axis else 0 for a in range(d))
            pos = positions[pid]
            child_pos = tuple(p + q for p, q in zip(pos, delta))
            # the parent is replaced by z children: one stays, one moves
            for c in range(z - 1):
                positions.append(child_pos if c == 0 else pos)
                founders.append(founders[pid])
                alive.append(len(positions) - 1)
    occ: dict[tuple, int] = {}
    alive_founders = set()
    for pid in alive:
        occ[positions[pid]] = occ.get(positions[pid], 0) + 1
        alive_founders.add(founders[pid])
    return occ, alive_founders


def diameter_given_both_alive(
    lam: float,
    d: int,
    t: float,
    reps: int,
    seed: int,
) -> np.ndarray:
    """Support diameters conditioned on both founders having descendants.

    By the branching property, conditioned on both founder lines surviving
    to t the lines are independent survival-conditioned copies; the
    configuration is their superposition (both founders start at the origin).
    """
    dist = brw_offspring(lam)
    q_grid, dt_grid = extinction_grid(dist, t, rate=1 + lam)
    stream = np.random.default_rng(seed ^ 0x0D1A)
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        occ_a, _ = conditioned_brw(lam, 1, d, t, seed, 2 * r, q_grid, dt_grid, stream)
        occ_b, _ = conditioned_brw(lam, 1, d, t, seed, 2 * r + 1, q_grid, dt_grid, stream)
        union = dict(occ_a)
        for s, c in occ_b.items():
            union[s] = union.get(s, 0) + c
        out[r] = support_diameter(union)
    return out


def o_t_statistics_brw(
    lam: float,
    n_founders: int,
    d: int,
    t: float,
    reps: int,
    seed: int,
) -> dict:
    """P(>= 2 founders with alive descendants | survival) and the conditional
    support diameters, via the bridge."""
    from ..harness import binomial_ci

    dist = brw_offspring(lam)
    q_grid, dt_grid = extinction_grid(dist, t, rate=1 + lam)
    stream = np.random.default_rng(seed ^ 0xB2B2)
    multi = 0
    diameters = []
    for r in range(reps):
        occ, alive_founders = conditioned_brw(
            lam, n_founders, d, t, seed, r, q_grid, dt_grid, stream
        )
        if len(alive_founders) >= 2:
            multi += 1
            diameters.append(support_diameter(occ))
    ci = binomial_ci(multi, reps, 0.95)
    return {
        "p_multi": multi / reps,
        "ci_lo": ci[0],
        "ci_hi": ci[1],
        "reps": reps,
        "diameters": diameters,
    }


def yaglom_brw(
    lam: float,
    d: int,
    t: float,
    reps: int,
    stream: np.random.Generator,
) -> dict:
    """Law of the canonical configuration at t conditioned on survival."""
    counts: dict = {}
    survivors = 0
    for _ in range(reps):
        run = simulate_brw([tuple([0] * d)], lam, t, stream)
        if not run.alive:
            continue
        survivors += 1
        key = canonical_brw(run.occupancy())
        counts[key] = counts.get(key, 0) + 1
    if survivors == 0:
        raise RuntimeError(f"no surviving runs out of {reps}")
    return {
        "distribution": {k: c / survivors for k, c in counts.items()},
        "survivors": survivors,
        "reps": reps,
    }
