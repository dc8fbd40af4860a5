"""Boundary-modified contact process via the graphical construction.

One realization of the randomness is a log of per-site recovery marks (rate-1
Poisson) and per-directed-edge events carrying a uniform mark on [0, lam_max);
an edge event with mark u is open for rate lam iff u < lam.  A single log
drives every coupled process, which makes containment and edge-domination
couplings exact and makes `evolve` a pure function of (config, log, params).

Semi-infinite initial conditions live on a site window [lo, hi]; beyond the
left boundary the configuration follows a fill rule (all-infected or
all-healthy).  Under the all-infected fill, the virtual site lo-1 is
permanently infected and its rightward edge events are part of the log, so
infection keeps re-entering the window as it would from the unsimulated
half-line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .streams import SeedSpec, derive_stream

FILL_HEALTHY = 0
FILL_INFECTED = 1

BOTH_EDGES = 0
RIGHT_EDGE_ONLY = 1

_REC = 0
_RIGHT = 1
_LEFT = 2


@dataclass(frozen=True)
class ContactParams:
    lam_i: float
    lam_e: float
    border_mode: int = BOTH_EDGES

    def __post_init__(self):
        if self.lam_i < 0 or self.lam_e < 0:
            raise ValueError("infection rates must be nonnegative")


@dataclass
class GraphicalLog:
    """Time-sorted event table over a slab [t0, t1] x [lo, hi].

    kinds: 0 recovery at `site`; 1 edge site -> site+1; 2 edge site -> site-1.
    Edge events carry marks uniform on [0, lam_max).
    """

    lo: int
    hi: int
    t0: float
    t1: float
    lam_max: float
    times: np.ndarray
    sites: np.ndarray
    kinds: np.ndarray
    marks: np.ndarray


def build_log(
    stream: np.random.Generator,
    lo: int,
    hi: int,
    t0: float,
    t1: float,
    lam_max: float,
) -> GraphicalLog:
    """Sample the graphical construction on [t0, t1] x [lo-1, hi].

    Site lo-1 is included so the all-infected fill keeps pushing infection
    into the window.
    """
    if hi < lo or t1 < t0 or lam_max <= 0:
        raise ValueError("need lo <= hi, t0 <= t1, lam_max > 0")
    n_sites = hi - lo + 2  # includes the virtual site lo-1
    span = t1 - t0
    n_rec = stream.poisson(span * n_sites)
    n_edge = stream.poisson(lam_max * span * 2 * n_sites)

    rec_t = stream.uniform(t0, t1, size=n_rec)
    rec_s = stream.integers(lo - 1, hi + 1, size=n_rec)

    edge_t = stream.uniform(t0, t1, size=n_edge)
    edge_s = stream.integers(lo - 1, hi + 1, size=n_edge)
    edge_dir = stream.integers(0, 2, size=n_edge)  # 0 -> right, 1 -> left
    edge_m = stream.uniform(0.0, lam_max, size=n_edge)

    times = np.concatenate([rec_t, edge_t])
    sites = np.concatenate([rec_s, edge_s]).astype(np.int64)
    kinds = np.concatenate(
        [np.zeros(n_rec, dtype=np.int8), np.where(edge_dir == 0, _RIGHT, _LEFT).astype(np.int8)]
    )
    marks = np.concatenate([np.zeros(n_rec), edge_m])

    order = np.argsort(times, kind="stable")
    return GraphicalLog(
        lo, hi, t0, t1, lam_max, times[order], sites[order], kinds[order], marks[order]
    )


def log_for_run(seed: SeedSpec, lo: int, hi: int, t1: float, lam_max: float) -> GraphicalLog:
    return build_log(derive_stream(seed), lo, hi, 0.0, t1, lam_max)


@dataclass
class InfectionConfig:
    """Finite set of infected sites, or a window surrogate of a semi-infinite set."""

    window_lo: int
    window_hi: int
    infected: np.ndarray  # int8 indicator over [window_lo, window_hi]
    fill: int = FILL_HEALTHY

    @classmethod
    def from_sites(cls, sites, lo: int, hi: int, fill: int = FILL_HEALTHY) -> "InfectionConfig":
        ind = np.zeros(hi - lo + 1, dtype=np.int8)
        for s in sites:
            if not lo <= s <= hi:
                raise ValueError(f"site {s} outside window [{lo}, {hi}]")
            ind[s - lo] = 1
        return cls(lo, hi, ind, fill)

    @classmethod
    def half_line(cls, lo: int, hi: int, right_edge: int = 0) -> "InfectionConfig":
        """Surrogate of (-inf, right_edge] on the window, all-infected fill."""
        ind = np.zeros(hi - lo + 1, dtype=np.int8)
        ind[: right_edge - lo + 1] = 1
        return cls(lo, hi, ind, FILL_INFECTED)

    def sites(self) -> np.ndarray:
        return np.flatnonzero(self.infected) + self.window_lo

    def is_empty(self) -> bool:
        return self.fill == FILL_HEALTHY and not self.infected.any()

    def right_edge(self) -> int | None:
        nz = np.flatnonzero(self.infected)
        if nz.size:
            return int(nz[-1]) + self.window_lo
        return self.window_lo - 1 if self.fill == FILL_INFECTED else None

    def copy(self) -> "InfectionConfig":
        return InfectionConfig(self.window_lo, self.window_hi, self.infected.copy(), self.fill)


def edge_view(sites: np.ndarray) -> np.ndarray:
    """Translate a non-empty configuration so its rightmost site is 0."""
    sites = np.asarray(sites)
    if sites.size == 0:
        raise ValueError("edge view undefined for the empty configuration")
    return np.sort(sites) - sites.max()


@njit(cache=True, inline="always")
def _edges_init(state, fill_infected):
    n = state.shape[0]
    r = -2  # -2 means none; the virtual fill site is index -1
    l = -2
    for i in range(n):
        if state[i] == 1:
            if r < 0 or i > r:
                r = i
            if l == -2:
                l = i
    if fill_infected:
        l = -1 - 1_000_000  # effectively -inf
        if r == -2:
            r = -1
    return r, l


@njit(cache=True, inline="always")
def _apply_event(state, x, kind, mark, lam_i, lam_e, right_edge_only, fill_infected, r, l, starved):
    """One graphical-construction event at window index x (virtual site -1)."""
    n = state.shape[0]
    if kind == _REC:
        if x >= 0 and state[x] == 1:
            state[x] = 0
            if x == r:
                r = -2
                for i in range(x - 1, -1, -1):
                    if state[i] == 1:
                        r = i
                        break
                if r == -2 and fill_infected:
                    r = -1
            if x == l and not fill_infected:
                l = -2
                for i in range(x + 1, n):
                    if state[i] == 1:
                        l = i
                        break
        return r, l, starved
    src_infected = state[x] == 1 if x >= 0 else fill_infected == 1
    if not src_infected:
        return r, l, starved
    # the boosted rate applies outward only: from the right edge rightward
    # and (in the two-sided mode) from the left edge leftward
    if right_edge_only:
        lam = lam_e if (x == r and kind == _RIGHT) else lam_i
    else:
        lam = lam_e if ((x == r and kind == _RIGHT) or (x == l and kind == _LEFT)) else lam_i
    if mark >= lam:
        return r, l, starved
    if kind == _RIGHT:
        y = x + 1
        if y >= n:
            return r, l, 1
    else:
        y = x - 1
        if y < 0:
            return r, l, starved  # infection into the fill region is a no-op
    if state[y] == 1:
        return r, l, starved
    state[y] = 1
    if y > r:
        r = y
    if not fill_infected and (l == -2 or y < l):
        l = y
    return r, l, starved


@njit(cache=True)
def _sweep(
    state,  # int8 array over window, mutated
    lo,
    fill_infected,
    times,
    sites,
    kinds,
    marks,
    lam_i,
    lam_e,
    right_edge_only,
    t_end,
    sample_times,  # sorted float64 array
    out_samples,  # int8 (len(sample_times), len(state)) snapshot buffer
):
    """Apply log events in time order; returns the starved flag.

    starved = 1 if infection touched the window's right boundary (results
    beyond that point would be truncated).
    """
    n = state.shape[0]
    starved = 0
    r, l = _edges_init(state, fill_infected)
    si = 0
    n_samples = sample_times.shape[0]
    for k in range(times.shape[0]):
        t = times[k]
        if t > t_end:
            break
        while si < n_samples and sample_times[si] < t:
            for j in range(n):
                out_samples[si, j] = state[j]
            si += 1
        r, l, starved = _apply_event(
            state, sites[k] - lo, kinds[k], marks[k],
            lam_i, lam_e, right_edge_only, fill_infected, r, l, starved,
        )
    while si < n_samples:
        for j in range(n):
            out_samples[si, j] = state[j]
        si += 1
    return starved, 0


_UG = np.uint64(0x9E3779B97F4A7C15)
_UM1 = np.uint64(0xBF58476D1CE4E5B9)
_UM2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix_cp(z):
    z = (z ^ (z >> np.uint64(30))) * _UM1
    z = (z ^ (z >> np.uint64(27))) * _UM2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _u01_cp(s):
    s = s + _UG
    z = _mix_cp(s)
    return s, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _sweep_generated(
    state,
    fill_infected,
    seed,
    lam_max,
    lam_i,
    lam_e,
    right_edge_only,
    t_end,
    sample_times,
    out_samples,
):
    """Sweep over an on-the-fly realization of the graphical construction.

    The superposed event stream over the window (plus the virtual fill site)
    is a Poisson process of rate (1 + 2*lam_max) per site; events carry the
    site, the kind, and a uniform mark, all derived from the counter-based
    stream, so a rerun with the same seed replays the identical log.
    """
    n = state.shape[0]
    n_ev_sites = n + 1  # includes the virtual site at window index -1
    total_rate = n_ev_sites * (1.0 + 2.0 * lam_max)
    kind_split = 1.0 / (1.0 + 2.0 * lam_max)
    rng = _mix_cp(seed)
    starved = 0
    r, l = _edges_init(state, fill_infected)
    si = 0
    n_samples = sample_times.shape[0]
    t = 0.0
    while True:
        rng, u = _u01_cp(rng)
        if u <= 0.0:
            u = 1e-300
        t -= np.log(u) / total_rate
        if t >= t_end:
            break
        while si < n_samples and sample_times[si] < t:
            for j in range(n):
                out_samples[si, j] = state[j]
            si += 1
        rng, u = _u01_cp(rng)
        x = int(u * n_ev_sites) - 1  # window index; -1 is the virtual site
        if x >= n:
            x = n - 1
        rng, u = _u01_cp(rng)
        if u < kind_split:
            kind = _REC
            mark = 0.0
        else:
            w = (u - kind_split) / kind_split  # uniform on [0, 2*lam_max)
            if w < lam_max:
                kind = _RIGHT
                mark = w
            else:
                kind = _LEFT
                mark = w - lam_max
        r, l, starved = _apply_event(
            state, x, kind, mark, lam_i, lam_e, right_edge_only, fill_infected, r, l, starved
        )
    while si < n_samples:
        for j in range(n):
            out_samples[si, j] = state[j]
        si += 1
    return starved


def evolve(
    config: InfectionConfig,
    log: GraphicalLog,
    params: ContactParams,
    t_end: float,
    sample_times=None,
) -> tuple[InfectionConfig, np.ndarray, bool]:
    """Deterministically apply the log to the configuration up to t_end.

    Returns (final config, snapshots at sample_times, starved flag).  The
    starved flag reports infection reaching the window's right boundary.
    """
    if max(params.lam_i, params.lam_e) > log.lam_max + 1e-12:
        raise ValueError("log lam_max too small for requested rates")
    if config.window_lo != log.lo or config.window_hi != log.hi:
        raise ValueError("config window does not match log window")
    if t_end > log.t1 + 1e-12:
        raise ValueError("log does not cover requested horizon")
    st = np.ascontiguousarray(config.infected.copy())
    samp = np.asarray(sample_times if sample_times is not None else [], dtype=np.float64)
    out = np.zeros((samp.size, st.size), dtype=np.int8)
    starved, _ = _sweep(
        st,
        log.lo,
        1 if config.fill == FILL_INFECTED else 0,
        log.times,
        log.sites,
        log.kinds,
        log.marks,
        params.lam_i,
        params.lam_e,
        1 if params.border_mode == RIGHT_EDGE_ONLY else 0,
        t_end,
        samp,
        out,
    )
    final = InfectionConfig(config.window_lo, config.window_hi, st, config.fill)
    return final, out, bool(starved)


def evolve_generated(
    config: InfectionConfig,
    seed_u64: int,
    lam_max: float,
    params: ContactParams,
    t_end: float,
    sample_times=None,
) -> tuple[InfectionConfig, np.ndarray, bool]:
    """Like evolve, over an on-the-fly log identified by a 64-bit seed.

    Reruns (and coupled processes) with the same seed and window replay the
    identical event stream without materializing it.
    """
    if max(params.lam_i, params.lam_e) > lam_max + 1e-12:
        raise ValueError("lam_max too small for requested rates")
    st = np.ascontiguousarray(config.infected.copy())
    samp = np.asarray(sample_times if sample_times is not None else [], dtype=np.float64)
    out = np.zeros((samp.size, st.size), dtype=np.int8)
    starved = _sweep_generated(
        st,
        1 if config.fill == FILL_INFECTED else 0,
        np.uint64(seed_u64),
        lam_max,
        params.lam_i,
        params.lam_e,
        1 if params.border_mode == RIGHT_EDGE_ONLY else 0,
        t_end,
        samp,
        out,
    )
    final = InfectionConfig(config.window_lo, config.window_hi, st, config.fill)
    return final, out, bool(starved)


def couple(
    config_a: InfectionConfig,
    config_b: InfectionConfig,
    log: GraphicalLog,
    params: ContactParams,
    sample_times,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Evolve A and B on the same log; report pathwise containment A ⊆ B."""
    _, snaps_a, _ = evolve(config_a, log, params, log.t1, sample_times)
    _, snaps_b, _ = evolve(config_b, log, params, log.t1, sample_times)
    contained = bool(np.all(snaps_b[snaps_a == 1] == 1))
    return snaps_a, snaps_b, contained


def dominate_edges(
    log: GraphicalLog,
    lam_c: float,
    eps: float,
    sample_times,
    right_edge: int = 0,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Classical process at lam_c vs modified (lam_c, lam_c+eps), shared log.

    Both start from the half-line surrogate; returns edge trajectories and the
    pathwise flag for R(classical) <= R(modified).
    """
    base = InfectionConfig.half_line(log.lo, log.hi, right_edge)
    _, snaps_c, _ = evolve(
        base, log, ContactParams(lam_c, lam_c), log.t1, sample_times
    )
    _, snaps_m, _ = evolve(
        base.copy(), log, ContactParams(lam_c, lam_c + eps), log.t1, sample_times
    )
    edges_c = _edges_from_snaps(snaps_c, log.lo)
    edges_m = _edges_from_snaps(snaps_m, log.lo)
    return edges_c, edges_m, bool(np.all(edges_c <= edges_m))


def _edges_from_snaps(snaps: np.ndarray, lo: int) -> np.ndarray:
    edges = np.empty(snaps.shape[0], dtype=np.int64)
    for i in range(snaps.shape[0]):
        nz = np.flatnonzero(snaps[i])
        edges[i] = (nz[-1] + lo) if nz.size else lo - 1
    return edges


def estimate_survival(
    params: ContactParams,
    initial_sites,
    t_max: float,
    reps: int,
    seed: SeedSpec,
    lam_max: float | None = None,
) -> dict:
    """Fraction of runs still infected at t_max, with a 95% Wilson interval.

    A finite-t proxy for survival: the estimate is monotone nonincreasing in
    t_max and upper-bounds the survival probability.  Runs evolve in time
    chunks on a window that grows with the infected extent, so extinct runs
    stop early and spreading runs never starve the window.
    """
    from .harness import binomial_ci
    from .streams import derive_u64

    if reps < 1 or t_max <= 0:
        raise ValueError("need reps >= 1 and t_max > 0")
    lam_max = lam_max or max(params.lam_i, params.lam_e, 0.05)
    initial_sites = sorted(initial_sites)
    chunk = min(5.0, t_max)
    pad = int(np.ceil(2.5 * lam_max * chunk)) + 10
    survived = 0
    starved_runs = 0
    for r in range(reps):
        lo = initial_sites[0] - pad
        hi = initial_sites[-1] + pad
        cfg = InfectionConfig.from_sites(initial_sites, lo, hi)
        t = 0.0
        k = 0
        alive = True
        while t < t_max - 1e-9:
            span = min(chunk, t_max - t)
            cfg, _, starved = evolve_generated(
                cfg, derive_u64(seed.child(f"run/{r}/chunk/{k}")), lam_max, params, span
            )
            if starved:
                starved_runs += 1
                alive = False
                break
            t += span
            k += 1
            sites = cfg.sites()
            if sites.size == 0:
                alive = False
                break
            lo = int(sites[0]) - pad
            hi = int(sites[-1]) + pad
            ind = np.zeros(hi - lo + 1, dtype=np.int8)
            ind[sites - lo] = 1
            cfg = InfectionConfig(lo, hi, ind, FILL_HEALTHY)
        if alive and cfg.infected.any():
            survived += 1
    effective = reps - starved_runs
    ci = binomial_ci(survived, max(effective, 1), 0.95)
    return {
        "theta_hat": survived / max(effective, 1),
        "ci_lo": ci[0],
        "ci_hi": ci[1],
        "survived": survived,
        "reps": effective,
        "starved": starved_runs,
    }


def edge_trajectory(
    params: ContactParams,
    t_max: float,
    seed: SeedSpec,
    window_width: int = 200,
    chunk: float = 5.0,
    lam_max: float | None = None,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Right-edge positions of the half-line process at chunk boundaries.

    The window follows the edge: after each chunk it is recentered at the
    current right edge, sites entering from the left filled as infected (the
    reservoir) and from the right healthy.  Returns (times, edges, starved).
    """
    lam_max = lam_max or max(params.lam_i, params.lam_e)
    w_right = int(np.ceil(3.0 * lam_max * chunk)) + 30
    lo = -window_width
    hi = w_right
    state = np.zeros(hi - lo + 1, dtype=np.int8)
    state[: -lo + 1] = 1  # sites lo..0
    n_chunks = int(np.ceil(t_max / chunk))
    times = np.empty(n_chunks, dtype=np.float64)
    edges = np.empty(n_chunks, dtype=np.int64)
    starved_any = False
    for k in range(n_chunks):
        from .streams import derive_u64

        cfg = InfectionConfig(lo, hi, state, FILL_INFECTED)
        cfg, _, starved = evolve_generated(
            cfg, derive_u64(seed.child(f"chunk/{k}")), lam_max, params, chunk
        )
        starved_any = starved_any or starved
        state = cfg.infected
        r = cfg.right_edge()
        times[k] = (k + 1) * chunk
        edges[k] = r
        # recenter on the edge
        new_lo = r - window_width
        new_hi = r + w_right
        new_state = np.zeros(new_hi - new_lo + 1, dtype=np.int8)
        o_lo = max(lo, new_lo)
        o_hi = min(hi, new_hi)
        if o_hi >= o_lo:
            new_state[o_lo - new_lo : o_hi - new_lo + 1] = state[o_lo - lo : o_hi - lo + 1]
        if new_lo < lo:
            new_state[: lo - new_lo] = 1  # reservoir enters from the left
        lo, hi, state = new_lo, new_hi, new_state
    return times, edges, starved_any


def estimate_edge_speed(
    params: ContactParams,
    t_max: float,
    reps: int,
    seed: SeedSpec,
    window_width: int = 200,
    lam_max: float | None = None,
) -> dict:
    """Slope of the right edge of the half-line process over [t_max/2, t_max]."""
    from .harness import linear_fit

    slopes = []
    discarded = 0
    for r in range(reps):
        times, edges, starved = edge_trajectory(
            params, t_max, seed.child(f"run/{r}"), window_width, lam_max=lam_max
        )
        if starved:
            discarded += 1
            continue
        keep = times >= t_max / 2
        fit = linear_fit(times[keep], edges[keep].astype(np.float64))
        slopes.append(fit.slope)
    slopes = np.asarray(slopes)
    if slopes.size == 0:
        raise RuntimeError("all runs starved the window")
    se = slopes.std(ddof=1) / np.sqrt(slopes.size) if slopes.size > 1 else np.inf
    return {
        "speed": float(slopes.mean()),
        "se": float(se),
        "ci_lo": float(slopes.mean() - 1.959964 * se),
        "ci_hi": float(slopes.mean() + 1.959964 * se),
        "reps": int(slopes.size),
        "discarded": discarded,
    }


def cylinder_pattern(snap: np.ndarray, lo: int, depth: int) -> int | None:
    """Bit pattern of the edge-rooted configuration on [-depth, 0].

    Bit j holds the state of site (right edge - depth + j); the top bit is
    the edge itself and is always 1.  None if the window is empty.
    """
    nz = np.flatnonzero(snap)
    if nz.size == 0:
        return None
    r = int(nz[-1])
    bits = 0
    for j in range(depth + 1):
        idx = r - depth + j
        val = snap[idx] if idx >= 0 else 1  # below the window: all-infected fill
        bits = (bits << 1) | int(val)
    return bits


def estimate_cylinder(
    params: ContactParams,
    depth: int,
    t_grid,
    reps: int,
    seed: SeedSpec,
    initial: str = "full",
    window: tuple[int, int] = (-280, 120),
    lam_max: float | None = None,
) -> dict:
    """Empirical law of the edge-rooted pattern on [-depth, 0] at each t.

    initial "full" is the half-line surrogate; "alternating" infects every
    other site below 0 (a distinct member of the same class).
    """
    lam_max = lam_max or max(params.lam_i, params.lam_e)
    lo, hi = window
    t_grid = sorted(t_grid)
    counts = {t: np.zeros(2 ** (depth + 1), dtype=np.int64) for t in t_grid}
    empties = {t: 0 for t in t_grid}
    for r in range(reps):
        log = log_for_run(seed.child(f"run/{r}"), lo, hi, max(t_grid), lam_max)
        ind = np.zeros(hi - lo + 1, dtype=np.int8)
        if initial == "full":
            ind[: -lo + 1] = 1
        elif initial == "alternating":
            ind[: -lo + 1 : 2] = 1
            ind[-lo] = 1  # the right edge itself at 0
        else:
            raise ValueError(f"unknown initial condition {initial}")
        cfg = InfectionConfig(lo, hi, ind, FILL_INFECTED)
        _, snaps, _ = evolve(cfg, log, params, max(t_grid), np.asarray(t_grid, dtype=np.float64))
        for i, t in enumerate(t_grid):
            pat = cylinder_pattern(snaps[i], lo, depth)
            if pat is None:
                empties[t] += 1
            else:
                counts[t][pat] += 1
    dists = {}
    for t in t_grid:
        tot = counts[t].sum()
        dists[t] = counts[t] / tot if tot else counts[t].astype(np.float64)
    return {"distributions": dists, "empties": empties, "reps": reps}


def cylinder_tv_trend(
    params: ContactParams,
    depth: int,
    t_grid,
    reps: int,
    seed: SeedSpec,
    n_batches: int = 10,
    window: tuple[int, int] = (-260, 110),
    lam_max: float | None = None,
) -> dict:
    """Batched TV between edge-rooted cylinder laws from two initials.

    Both initial conditions (the full half-line and the alternating one)
    evolve on the same log per replication, and TV estimates are computed per
    batch so the decrease across t values comes with standard errors.
    """
    lam_max = lam_max or max(params.lam_i, params.lam_e)
    lo, hi = window
    t_grid = sorted(t_grid)
    t_arr = np.asarray(t_grid, dtype=np.float64)
    n_pat = 2 ** (depth + 1)
    per_batch = reps // n_batches
    tvs = {t: [] for t in t_grid}
    full0 = np.zeros(hi - lo + 1, dtype=np.int8)
    full0[: -lo + 1] = 1
    alt0 = np.zeros(hi - lo + 1, dtype=np.int8)
    alt0[: -lo + 1 : 2] = 1
    alt0[-lo] = 1
    from .streams import derive_u64

    for b in range(n_batches):
        counts_full = {t: np.zeros(n_pat, dtype=np.int64) for t in t_grid}
        counts_alt = {t: np.zeros(n_pat, dtype=np.int64) for t in t_grid}
        for r in range(per_batch):
            log_seed = derive_u64(seed.child(f"batch/{b}/run/{r}"))
            for ind0, counts in ((full0, counts_full), (alt0, counts_alt)):
                cfg = InfectionConfig(lo, hi, ind0.copy(), FILL_INFECTED)
                _, snaps, _ = evolve_generated(cfg, log_seed, lam_max, params, max(t_grid), t_arr)
                for i, t in enumerate(t_grid):
                    pat = cylinder_pattern(snaps[i], lo, depth)
                    if pat is not None:
                        counts[t][pat] += 1
        for t in t_grid:
            nf, na = counts_full[t].sum(), counts_alt[t].sum()
            if nf and na:
                tvs[t].append(
                    0.5 * np.abs(counts_full[t] / nf - counts_alt[t] / na).sum()
                )
    out = {}
    for t in t_grid:
        arr = np.asarray(tvs[t])
        out[t] = {
            "tv_mean": float(arr.mean()),
            "tv_se": float(arr.std(ddof=1) / np.sqrt(arr.size)),
            "batches": int(arr.size),
        }
    return out


@dataclass
class EdgeTrace:
    restart_times: list[float]
    final_age: float  # t_max - tau_{N(t_max)}
    n_restarts: int


def restart_times(
    lam_c: float,
    eps: float,
    t_max: float,
    seed: SeedSpec,
    window_width: int = 240,
    check_interval: float = 2.0,
) -> EdgeTrace:
    """Successive extinction times of right-edge-boosted copies.

    Each copy starts as a singleton at the previous copy's right edge (our
    reading of the restarted process); tau_k is its extinction time.
    """
    params = ContactParams(lam_c, lam_c + eps, RIGHT_EDGE_ONLY)
    lam_max = lam_c + eps
    taus: list[float] = []
    t = 0.0
    edge_pos = 0
    copy_index = 0
    while t < t_max:
        # evolve one copy in chunks until extinction or horizon
        margin = int(np.ceil(1.2 * lam_max * (t_max - t))) + 16
        lo = edge_pos - window_width - margin
        hi = edge_pos + margin
        log = log_for_run(seed.child(f"copy/{copy_index}"), lo, hi, t_max - t, lam_max)
        cfg = InfectionConfig.from_sites([edge_pos], lo, hi)
        grid = np.arange(check_interval, t_max - t + check_interval, check_interval)
        _, snaps, _ = evolve(cfg, log, params, t_max - t, grid)
        died_at = None
        for i, tau in enumerate(grid):
            if not snaps[i].any():
                died_at = t + float(tau)  # extinction within (grid[i-1], grid[i]]
                last_alive = snaps[i - 1] if i else cfg.infected
                nz = np.flatnonzero(last_alive)
                edge_pos = int(nz[-1]) + lo if nz.size else edge_pos
                break
        if died_at is None:
            break
        taus.append(died_at)
        t = died_at
        copy_index += 1
    return EdgeTrace(taus, t_max - (taus[-1] if taus else 0.0), len(taus))
