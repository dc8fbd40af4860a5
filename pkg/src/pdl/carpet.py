"""Carpet-driven toppling procedure on the ring.

The ring of size N = (n+2)K, K = a*a, is split into blocks of K sites
centered at anchors iK.  Particles carry role labels (carpet / free, frees
thawed or frozen); each block owns one hole in [iK, iK+a]; vacant non-hole
sites are defects.  One free thawed particle at a time (the hot particle) is
toppled until it is emitted to a neighboring block, and sleeping at the hole
walks the hole rightward while excursion returns drag it back left.  Blocks 0
and n+1 act as sinks for a mode; at mode end the block labels rotate so the
sources become the next mode's sinks.

The labels are pure bookkeeping over the underlying activated-random-walk
dynamics: every toppling is a legal toppling of the same instruction stacks
used by plain stabilization, so total jump counts agree exactly.

Properties P1..P9 of the construction:
  P1 each block has exactly one hole, located in [iK, iK+a]
  P2 every site holds a carpet particle except holes and defects
  P3 a block with defects has its hole at iK
  P4 carpet particles strictly between the hole and iK+a are active
  P5 free particles are active
  P6 free particles sit at iK or iK+a, except possibly the hot particle
  P7 at most one frozen free particle per block
  P8 a frozen free particle exists in block i iff the hole is at iK+a,
     and then the frozen particle is at iK+a
  P9 the hot particle is free and thawed
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .arw import (
    JUMP_LEFT,
    JUMP_RIGHT,
    SLEEP,
    SLEEPING,
    HashedStacks,
    Odometer,
    RingConfig,
    StabilizeResult,
    stabilize,
    stabilize_fast_resume,
)


class CarpetInvariantError(RuntimeError):
    """Raised when the P1..P9 checker finds a violation; carries a snapshot."""

    def __init__(self, violated: list[str], snapshot: str):
        super().__init__(f"carpet invariants violated: {violated}")
        self.violated = violated
        self.snapshot = snapshot


class Outcome(Enum):
    EMITTED = "emitted"
    FAILURE = "failure"
    THAW_RESET = "thaw_reset"
    PROCEDURE_FINISHED = "finished"


@dataclass
class Emission:
    outcome: Outcome
    emitter: int = -1
    receiver: int = -1
    direction: int = 0  # -1 left, +1 right
    landing: str = ""  # "parked" | "defect" | "hole"


@dataclass
class FreeParticle:
    site: int
    frozen: bool
    seq: int


@dataclass
class ModeStats:
    """Per-mode counters and the audits built from them."""

    n: int
    emissions_left: np.ndarray  # L_i
    emissions_right: np.ndarray  # R_i
    received_available: np.ndarray  # M_i (left-flow landers staying free)
    received_defects: np.ndarray  # D_i (left-flow landers fixing defects)
    frozen_end: np.ndarray  # S_i at mode end
    emitting_blocks: set[int]
    attempted: int
    jumps: int
    defect_count_end: int
    free_count_end: int
    frozen_count_end: int

    @property
    def frozen_in_emitting(self) -> int:
        return int(sum(self.frozen_end[i] for i in self.emitting_blocks))

    def mass_balance_violations(self) -> list[int]:
        """Interior boundaries where L_i != M_{i-1} + D_{i-1}."""
        bad = []
        for i in range(1, self.n + 1):
            if self.emissions_left[i] != self.received_available[i - 1] + self.received_defects[i - 1]:
                bad.append(i)
        return bad

    def condition_14(self) -> bool:
        """At least 7n/8 + D free particles of which at most 5n/8 frozen."""
        return (
            self.free_count_end >= 7 * self.n / 8 + self.defect_count_end
            and self.frozen_count_end <= 5 * self.n / 8
        )


class CarpetState:
    """Role bookkeeping layered over a RingConfig."""

    def __init__(self, ring: RingConfig, a: int, origin: int = 0):
        if a < 2 or a % 2 != 0:
            raise ValueError(f"block parameter a must be even and >= 2, got {a}")
        K = a * a
        N = ring.n
        if N % K != 0 or (N // K) - 2 < 2 or ((N // K) - 2) % 2 != 0:
            raise ValueError(f"ring size {N} is not (n+2)*{K} with n >= 2 even")
        self.ring = ring
        self.a = a
        self.K = K
        self.n = N // K - 2
        self.N = N
        self.origin = origin % N
        self.mode_index = 0
        self.holes = np.zeros(self.n + 2, dtype=np.int64)  # relative position in [0, a]
        self.carpet = np.zeros(N, dtype=bool)
        self.free: dict[int, FreeParticle] = {}
        self._next_id = 0
        self._next_seq = 0
        self.hot: int | None = None
        self.events: deque[str] = deque(maxlen=100)

    # -- geometry -----------------------------------------------------------

    def anchor(self, i: int) -> int:
        return (self.origin + i * self.K) % self.N

    def block_of(self, site: int) -> int:
        return ((site - self.origin + self.K // 2) % self.N) // self.K

    def hole_site(self, i: int) -> int:
        return (self.anchor(i) + self.holes[i]) % self.N

    def rel_in_block(self, site: int, i: int) -> int:
        """Signed offset of site from anchor(i), in [-K/2, 3K/2)."""
        d = (site - self.anchor(i)) % self.N
        if d >= self.N - self.K // 2:
            d -= self.N
        return d

    # -- derived role views ---------------------------------------------------

    def free_at(self, site: int) -> list[int]:
        return [pid for pid, p in self.free.items() if p.site == site]

    def frozen_of_block(self, i: int) -> int | None:
        site = (self.anchor(i) + self.a) % self.N
        for pid, p in self.free.items():
            if p.frozen and p.site == site:
                return pid
        return None

    def defect_sites(self) -> np.ndarray:
        """Vacant non-hole sites (defects are derived from the ground truth)."""
        vacant = self.ring.states == 0
        holes = np.array([self.hole_site(i) for i in range(self.n + 2)])
        vacant[holes] = False
        return np.flatnonzero(vacant)

    def defects_in_block(self, i: int) -> list[int]:
        return [s for s in self.defect_sites() if self.block_of(s) == i]

    def free_count(self) -> int:
        return len(self.free)

    def frozen_count(self) -> int:
        return sum(1 for p in self.free.values() if p.frozen)

    # -- particle bookkeeping -------------------------------------------------

    def add_free(self, site: int, frozen: bool = False) -> int:
        pid = self._next_id
        self._next_id += 1
        self.free[pid] = FreeParticle(site, frozen, self._next_seq)
        self._next_seq += 1
        return pid

    def log(self, msg: str):
        self.events.append(msg)

    def snapshot(self) -> str:
        lines = [
            f"N={self.N} a={self.a} K={self.K} n={self.n} origin={self.origin} mode={self.mode_index}",
            "states: " + " ".join(str(int(s)) for s in self.ring.states),
            "carpet: " + "".join("c" if c else "." for c in self.carpet),
            "holes:  " + " ".join(f"{i}:{self.hole_site(i)}(+{self.holes[i]})" for i in range(self.n + 2)),
            "defects:" + " ".join(str(int(s)) for s in self.defect_sites()),
            "free:   "
            + " ".join(
                f"#{pid}@{p.site}{'F' if p.frozen else 't'}(s{p.seq})" for pid, p in sorted(self.free.items())
            ),
            f"hot:    {self.hot}",
            "events:",
        ]
        lines.extend(f"  {e}" for e in self.events)
        return "\n".join(lines)


def initial_ring(
    n_sites: int,
    zeta: float,
    a: int,
    stream: np.random.Generator | None = None,
    placement: str = "uniform",
) -> RingConfig:
    """Deterministic-count initial configuration with floor(zeta*N) particles.

    Vacancies prefer non-anchor sites: uniformly at random among them by
    default, or evenly spaced for regression runs.  Overflow vacancies (very
    low density) spill onto anchor sites.
    """
    if not 0 <= zeta < 1:
        raise ValueError(f"zeta must be in [0, 1), got {zeta}")
    K = a * a
    count = int(np.floor(zeta * n_sites))
    n_vac = n_sites - count
    anchors = np.arange(0, n_sites, K)
    others = np.setdiff1d(np.arange(n_sites), anchors)
    states = np.ones(n_sites, dtype=np.int64)
    if n_vac <= others.size:
        if placement == "evenly-spaced":
            idx = np.linspace(0, others.size - 1, n_vac).astype(np.int64)
            vac = others[idx]
        else:
            if stream is None:
                raise ValueError("uniform placement needs a stream")
            vac = stream.choice(others, size=n_vac, replace=False)
        states[vac] = 0
    else:
        states[others] = 0
        extra = n_vac - others.size
        if stream is None:
            vac2 = anchors[:extra]
        else:
            vac2 = stream.choice(anchors, size=extra, replace=False)
        states[vac2] = 0
    return RingConfig(states)


def init_carpet(config: RingConfig, a: int, origin: int = 0) -> CarpetState:
    """Label a flat all-active configuration: holes and frees at anchors.

    Particles at anchor sites become free and thawed, all others carpet;
    vacant non-hole sites are the initial defects.
    """
    if np.any(config.states > 1) or np.any(config.states == SLEEPING):
        raise ValueError("carpet init needs a flat, all-active configuration")
    state = CarpetState(config, a, origin)
    for i in range(state.n + 2):
        anchor = state.anchor(i)
        state.holes[i] = 0
        if config.states[anchor] == 1:
            state.add_free(anchor)
    for s in range(state.N):
        if config.states[s] == 1 and not state.free_at(s):
            state.carpet[s] = True
    return state


# ---------------------------------------------------------------------------
# property checker
# ---------------------------------------------------------------------------


def check_properties(state: CarpetState) -> list[str]:
    """Evaluate P1..P9 plus role/physics consistency; empty list means pass."""
    bad: list[str] = []
    N, a = state.N, state.a
    ring = state.ring.states

    free_sites = np.zeros(N, dtype=np.int64)
    for p in state.free.values():
        free_sites[p.site] += 1

    # role/physics consistency: labels must reproduce the ARW configuration
    for s in range(N):
        total = int(state.carpet[s]) + int(free_sites[s])
        if ring[s] == SLEEPING:
            if not (total == 1 and state.carpet[s]):
                bad.append("ROLES")
                break
        elif ring[s] != total:
            bad.append("ROLES")
            break

    hole_sites = [state.hole_site(i) for i in range(state.n + 2)]
    if len(set(hole_sites)) != state.n + 2:
        bad.append("P1")
    if np.any(state.holes < 0) or np.any(state.holes > a):
        if "P1" not in bad:
            bad.append("P1")

    defects = set(int(s) for s in state.defect_sites())
    hole_set = set(hole_sites)
    for s in range(N):
        if not state.carpet[s] and s not in hole_set and s not in defects:
            bad.append("P2")
            break

    for i in range(state.n + 2):
        if state.holes[i] != 0 and any(state.block_of(s) == i for s in defects):
            bad.append("P3")
            break

    for i in range(state.n + 2):
        broken = False
        for v in range(int(state.holes[i]) + 1, a):
            s = (state.anchor(i) + v) % N
            if state.carpet[s] and ring[s] == SLEEPING:
                bad.append("P4")
                broken = True
                break
        if broken:
            break

    for p in state.free.values():
        if ring[p.site] < 1:
            bad.append("P5")
            break

    for pid, p in state.free.items():
        if pid == state.hot:
            continue
        r = (p.site - state.origin) % state.K
        if r not in (0, a):
            bad.append("P6")
            break

    frozen_by_block: dict[int, int] = {}
    for p in state.free.values():
        if p.frozen:
            i = ((p.site - state.origin - a) % N) // state.K
            frozen_by_block[i] = frozen_by_block.get(i, 0) + 1
    if any(c > 1 for c in frozen_by_block.values()):
        bad.append("P7")

    for i in range(state.n + 2):
        has_frozen = frozen_by_block.get(i, 0) > 0
        if has_frozen != (state.holes[i] == a):
            bad.append("P8")
            break

    if state.hot is not None:
        hp = state.free.get(state.hot)
        if hp is None or hp.frozen:
            bad.append("P9")

    return bad


def _assert_ok(state: CarpetState):
    bad = check_properties(state)
    if bad:
        raise CarpetInvariantError(bad, state.snapshot())


# ---------------------------------------------------------------------------
# the procedure
# ---------------------------------------------------------------------------


def choose_hot(state: CarpetState, exclude_sinks: bool = True) -> tuple[int, int] | None:
    """Pick the smallest block 1..n with no defects and a thawed free particle.

    Within the block, a thawed free particle at the anchor is preferred over
    one at anchor+a; ties break FIFO by arrival order.  Returns (block, pid)
    or None when the procedure is finished.

    A block is eligible only if its partition and its operational range
    [anchor, anchor+a] are both defect-free; the latter only matters when
    a = K/2 (a = 2), where the site anchor+a belongs to the next partition.
    """
    defects = state.defect_sites()
    defect_blocks = {state.block_of(int(s)) for s in defects}
    defect_set = {int(s) for s in defects}
    lo, hi = (1, state.n) if exclude_sinks else (0, state.n + 1)
    for i in range(lo, hi + 1):
        if i in defect_blocks:
            continue
        if (state.anchor(i) + state.a) % state.N in defect_set:
            continue
        anchor = state.anchor(i)
        top = (anchor + state.a) % state.N
        for site in (anchor, top):
            candidates = [
                (state.free[pid].seq, pid)
                for pid in state.free_at(site)
                if not state.free[pid].frozen
            ]
            if candidates:
                return i, min(candidates)[1]
    return None


def _move_hot(state: CarpetState, pid: int, y: int):
    """Apply one hot-particle jump to the ring and the role bookkeeping."""
    ring = state.ring.states
    x = state.free[pid].site
    ring[x] -= 1
    ring[y] = 2 if ring[y] == SLEEPING else ring[y] + 1
    state.free[pid].site = y


def owner_block(state: CarpetState, site: int) -> int:
    """Block owning a parked free particle: site must be an anchor or anchor+a.

    Distinct from the partition block when a = K/2, where anchor+a is the
    first site of the next partition cell.
    """
    r = (site - state.origin) % state.K
    if r == 0:
        return ((site - state.origin) % state.N) // state.K
    if r == state.a:
        return ((site - state.origin - state.a) % state.N) // state.K
    raise ValueError(f"site {site} is not an anchor or anchor+a")


def attempted_emission(
    state: CarpetState, stacks, check: bool = False, block: int | None = None
) -> Emission:
    """Run one attempted emission for the currently designated hot particle.

    Implements both cases: with no frozen particle at anchor+a the hot
    particle interacts with the hole (sleeps walk the hole right, excursion
    returns drag it to the leftmost visited site, clamped at the anchor;
    reaching anchor+a freezes); with a frozen particle present it topples
    until emitted, thawing and resetting the hole if every site of
    [anchor, anchor+a] is visited first.
    """
    if state.hot is None:
        raise RuntimeError("no hot particle designated")
    if check:
        conserved_before = state.free_count() - state.defect_sites().size

    pid = state.hot
    a, K, N = state.a, state.K, state.N
    if block is None:
        block = owner_block(state, state.free[pid].site)
    i = block
    anchor = state.anchor(i)
    ring = state.ring.states

    # P8: a frozen particle is present iff the hole sits at anchor+a
    frozen_case = state.holes[i] == a

    visited: set[int] = set()
    rel0 = state.rel_in_block(state.free[pid].site, i)
    if 0 <= rel0 <= a:
        visited.add(rel0)

    # neighbor-block emission data
    left_block = (i - 1) % (state.n + 2)
    right_block = (i + 1) % (state.n + 2)
    left_target = (state.anchor(left_block) + a) % N
    right_target = state.anchor(right_block)
    defect_cache = {int(s) for s in state.defect_sites()}
    left_defects = any(state.block_of(s) == left_block for s in defect_cache)
    right_defects = any(state.block_of(s) == right_block for s in defect_cache)

    in_excursion = False
    exc_min = 0

    def finish_emission(direction: int, landing_site: int) -> Emission:
        receiver = left_block if direction < 0 else right_block
        if landing_site in defect_cache:
            # arriving particle fixes the defect and becomes carpet
            state.carpet[landing_site] = True
            del state.free[pid]
            landing = "defect"
        else:
            # emigrants join the receiving block with least selection priority
            state.free[pid].seq = state._next_seq
            state._next_seq += 1
            if landing_site == state.hole_site(receiver) and ring[landing_site] == 1:
                landing = "hole"
            else:
                landing = "parked"
        state.hot = None
        state.log(f"emit {i}->{receiver} dir={direction} land={landing}@{landing_site}")
        em = Emission(Outcome.EMITTED, i, receiver, direction, landing)
        if check:
            _post_checks(state, conserved_before)
        return em

    step_guard = 0
    while True:
        step_guard += 1
        if step_guard > 10**8:
            raise RuntimeError("attempted emission failed to terminate (guard tripped)")

        x = state.free[pid].site
        at_hole = (not frozen_case) and x == state.hole_site(i) and ring[x] == 1

        instr = stacks.consume(x)
        if instr == SLEEP:
            if ring[x] != 1:
                continue  # sleep is a no-op on multiply occupied sites
            if not at_hole:
                # a lone free particle can only stand on the (vacant) hole
                raise CarpetInvariantError(
                    ["P2"], state.snapshot() + f"\nlone hot at non-hole site {x}"
                )
            # hot sleeps at the hole: becomes a sleeping carpet particle,
            # hole moves one site right, carpet there is promoted
            ring[x] = SLEEPING
            state.carpet[x] = True
            del state.free[pid]
            state.holes[i] += 1
            new_hole = state.hole_site(i)
            if not state.carpet[new_hole] or ring[new_hole] < 1:
                raise CarpetInvariantError(
                    ["P4"], state.snapshot() + f"\nbad promotion target {new_hole}"
                )
            state.carpet[new_hole] = False
            new_pid = state.add_free(new_hole)
            state.log(f"sleep@{x} hole->{state.holes[i]} in block {i}")
            if state.holes[i] == a:
                state.free[new_pid].frozen = True
                state.hot = None
                state.log(f"freeze block {i}")
                em = Emission(Outcome.FAILURE, i)
                if check:
                    _post_checks(state, conserved_before)
                return em
            state.hot = pid = new_pid
            rel0 = state.holes[i]
            visited.add(int(rel0))
            in_excursion = False
            continue

        # jump instruction
        y = (x + 1) % N if instr == JUMP_RIGHT else (x - 1) % N
        if at_hole:
            in_excursion = True
            exc_min = state.rel_in_block(x, i)
        _move_hot(state, pid, y)
        rel_y = state.rel_in_block(y, i)
        if in_excursion:
            exc_min = min(exc_min, rel_y)
        if 0 <= rel_y <= a:
            visited.add(int(rel_y))

        # emission conditions on arrival
        if y == right_target and not right_defects:
            return finish_emission(+1, y)
        if y == left_target and not left_defects:
            return finish_emission(-1, y)
        if ring[y] == 1 and y in defect_cache:
            # vacant site of a defective receiving block
            if right_defects and state.block_of(y) == right_block:
                return finish_emission(+1, y)
            if left_defects and state.block_of(y) == left_block:
                return finish_emission(-1, y)
        if ring[y] == 1 and (
            (right_defects and y == state.hole_site(right_block))
            or (left_defects and y == state.hole_site(left_block))
        ):
            direction = +1 if state.block_of(y) == right_block else -1
            return finish_emission(direction, y)

        if frozen_case:
            if len(visited) == a + 1:
                # thaw and reset: hole to anchor, frozen particle to carpet,
                # carpet at the anchor promoted to a thawed free particle
                fro = state.frozen_of_block(i)
                state.holes[i] = 0
                state.free[fro].frozen = False
                state.carpet[state.free[fro].site] = True
                del state.free[fro]
                if not state.carpet[anchor] or ring[anchor] < 1:
                    raise CarpetInvariantError(
                        ["P4"], state.snapshot() + "\nbad thaw promotion at anchor"
                    )
                state.carpet[anchor] = False
                state.add_free(anchor)
                state.hot = None
                state.log(f"thaw reset block {i}")
                em = Emission(Outcome.THAW_RESET, i)
                if check:
                    _post_checks(state, conserved_before)
                return em
            continue

        # hole interactions (no-frozen case)
        if y == state.hole_site(i) and in_excursion and ring[y] == 1:
            # excursion returned to the hole: move the hole to the leftmost
            # visited site, clamped at the anchor (it never leaves [0, a])
            new_rel = max(exc_min, 0)
            in_excursion = False
            if new_rel == state.holes[i]:
                continue  # right-only excursion: identity swap, hot stays hot
            old_hole = state.hole_site(i)
            state.holes[i] = new_rel
            new_hole = state.hole_site(i)
            state.carpet[old_hole] = True
            del state.free[pid]
            if not state.carpet[new_hole] or ring[new_hole] < 1:
                raise CarpetInvariantError(
                    ["P4"], state.snapshot() + f"\nbad excursion promotion at {new_hole}"
                )
            state.carpet[new_hole] = False
            pid = state.add_free(new_hole)
            state.hot = pid
            state.log(f"excursion return: hole {i} -> +{new_rel}")
            continue


def _post_checks(state: CarpetState, conserved_before: int):
    bad = check_properties(state)
    if bad:
        raise CarpetInvariantError(bad, state.snapshot())
    conserved_after = state.free_count() - state.defect_sites().size
    if conserved_after != conserved_before:
        raise CarpetInvariantError(
            ["CONSERVATION"],
            state.snapshot() + f"\nfree-defects changed {conserved_before} -> {conserved_after}",
        )


def run_mode(
    state: CarpetState,
    stacks,
    emission_cap: int = 10**6,
    check: bool = False,
) -> ModeStats:
    """Repeat choose_hot + attempted_emission until no choice remains.

    Blocks 0 and n+1 are the sinks (excluded from hot choice); at the end the
    block labels rotate by n/2+1 so this mode's sources are the next mode's
    sinks.  Returns per-block flow counters and the Condition-1.4 verdict.
    """
    n = state.n
    L = np.zeros(n + 2, dtype=np.int64)
    R = np.zeros(n + 2, dtype=np.int64)
    M = np.zeros(n + 2, dtype=np.int64)
    D = np.zeros(n + 2, dtype=np.int64)
    emitting: set[int] = set()
    attempted = 0
    jumps_before = stacks.jumps

    while attempted < emission_cap:
        sel = choose_hot(state)
        if sel is None:
            break
        blk, pid = sel
        state.hot = pid
        em = attempted_emission(state, stacks, check=check, block=blk)
        attempted += 1
        if em.outcome is Outcome.EMITTED:
            emitting.add(em.emitter)
            if em.direction < 0:
                L[em.emitter] += 1
                if em.landing == "defect":
                    D[em.receiver] += 1
                else:
                    M[em.receiver] += 1
            else:
                R[em.emitter] += 1

    frozen_end = np.zeros(n + 2, dtype=np.int64)
    for p in state.free.values():
        if p.frozen:
            i = ((p.site - state.origin - state.a) % state.N) // state.K
            frozen_end[i] += 1

    stats = ModeStats(
        n=n,
        emissions_left=L,
        emissions_right=R,
        received_available=M,
        received_defects=D,
        frozen_end=frozen_end,
        emitting_blocks=emitting,
        attempted=attempted,
        jumps=stacks.jumps - jumps_before,
        defect_count_end=int(state.defect_sites().size),
        free_count_end=state.free_count(),
        frozen_count_end=state.frozen_count(),
    )

    # relabel: sources (n/2, n/2+1) become the sinks (0, n+1) of the next mode;
    # new block j is old block j + n/2 + 1, so the hole array rolls backwards
    state.origin = (state.origin + (n // 2 + 1) * state.K) % state.N
    state.holes = np.roll(state.holes, -(n // 2 + 1))
    state.mode_index += 1
    return stats


@dataclass
class CarpetRunResult:
    jumps_per_mode: list[int]
    modes_completed: int
    stabilized: bool
    total_jumps: int
    odometer: Odometer
    config: RingConfig
    mode_stats: list[ModeStats] = field(default_factory=list)
    used_carpet: bool = True


def run_until_stable(
    config: RingConfig,
    a: int,
    stacks,
    mode_cap: int = 10**4,
    step_cap: int = 10**9,
    emission_cap: int = 10**6,
    check: bool = False,
) -> CarpetRunResult:
    """Alternate carpet modes until stuck, then finish with plain stabilization.

    The fallback consumes the same stacks, so the total jump count equals the
    one plain stabilization would produce on its own (Abelian property).
    A stable input returns immediately; inputs that are not flat-active skip
    the carpet and stabilize directly.
    """
    if config.is_stable():
        return CarpetRunResult(
            [], 0, True, 0, Odometer(np.zeros(config.n, dtype=np.int64), 0), config.copy(), []
        )
    flat_active = not np.any(config.states > 1) and not np.any(config.states == SLEEPING)
    if not flat_active:
        res = _finish(config, stacks, step_cap)
        return CarpetRunResult(
            [res.odometer.jumps],
            0,
            res.terminated,
            res.odometer.jumps,
            res.odometer,
            res.config,
            [],
            used_carpet=False,
        )

    state = init_carpet(config.copy(), a)
    if check:
        _assert_ok(state)
    jumps_per_mode: list[int] = []
    all_stats: list[ModeStats] = []
    empty_streak = 0
    modes = 0
    while modes < mode_cap:
        stats = run_mode(state, stacks, emission_cap=emission_cap, check=check)
        modes += 1
        jumps_per_mode.append(stats.jumps)
        all_stats.append(stats)
        empty_streak = empty_streak + 1 if stats.attempted == 0 else 0
        if empty_streak >= 2:
            break

    res = _finish(state.ring, stacks, step_cap)
    return CarpetRunResult(
        jumps_per_mode,
        modes,
        res.terminated,
        res.odometer.jumps,
        res.odometer,
        res.config,
        all_stats,
    )


def _finish(config: RingConfig, stacks, step_cap: int) -> StabilizeResult:
    if isinstance(stacks, HashedStacks):
        return stabilize_fast_resume(config, stacks, step_cap)
    return stabilize(config, stacks, step_cap=step_cap)


# ---------------------------------------------------------------------------
# hole drift law
# ---------------------------------------------------------------------------


def harmonic(v: int) -> float:
    return float(np.sum(1.0 / np.arange(1, v + 1)))


def hole_drift_mean(v: int, lam: float) -> float:
    """Closed-form mean of the one-step hole displacement from position v.

    E = lam/(1+lam) - H_v / (2(1+lam)) with H_v the harmonic number, derived
    from E[min(Z, v)] = H_v for P(Z=z) = 1/(z(z+1)).
    """
    if v < 1 or lam <= 0:
        raise ValueError("need v >= 1 and lam > 0")
    return lam / (1 + lam) - harmonic(v) / (2 * (1 + lam))


def hole_drift_mean_tilde(v: int, lam: float, K: int) -> float:
    """Mean of the emission-adjusted displacement: E[Y_v] + v/(K(1+lam))."""
    delta = 1.0 / (K * (1 + lam))
    return hole_drift_mean(v, lam) + v * delta


def drift_bound(v: int, lam: float) -> float:
    """Upper bound lam/(1+lam) - (log v - log 2)/(2(1+lam)) on E[Y_v]."""
    return lam / (1 + lam) - (np.log(v) - np.log(2.0)) / (2 * (1 + lam))


def sample_hole_drift(stream: np.random.Generator, v: int, lam: float, size: int) -> np.ndarray:
    """Draws of Y_v: +1 w.p. lam/(1+lam), 0 w.p. 1/(2(1+lam)), else -min(Z,v)."""
    if v < 1 or lam <= 0:
        raise ValueError("need v >= 1 and lam > 0")
    u = stream.uniform(size=size)
    p_up = lam / (1 + lam)
    p_zero = 0.5 / (1 + lam)
    out = np.empty(size, dtype=np.float64)
    up = u < p_up
    zero = (~up) & (u < p_up + p_zero)
    down = ~(up | zero)
    out[up] = 1.0
    out[zero] = 0.0
    nz = int(down.sum())
    z = np.floor(1.0 / stream.uniform(size=nz))  # P(Z=z) = 1/(z(z+1))
    out[down] = -np.minimum(z, v)
    return out


def ytilde_atoms(v: int, lam: float, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Atom list of the dominating variable: support and probabilities."""
    if v < 1 or lam <= 0 or K < 1:
        raise ValueError("need v >= 1, lam > 0, K >= 1")
    delta = 1.0 / (K * (1 + lam))
    p_zero = 0.5 / (1 + lam)
    ks = np.arange(1, v)
    probs_mid = p_zero / (ks * (ks + 1.0))
    bottom = p_zero - delta - probs_mid.sum()
    if bottom < 0:
        raise ValueError(f"bottom atom negative: K={K} too small for v={v}")
    values = np.concatenate(([1.0, 0.0], -ks.astype(np.float64), [-float(v)]))
    probs = np.concatenate(([lam / (1 + lam), p_zero + delta], probs_mid, [bottom]))
    return values, probs


def sample_hole_drift_tilde(
    stream: np.random.Generator, v: int, lam: float, K: int, size: int
) -> np.ndarray:
    values, probs = ytilde_atoms(v, lam, K)
    idx = stream.choice(values.size, size=size, p=probs)
    return values[idx]
