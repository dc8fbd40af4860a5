"""Activated random walks on the ring Z_N driven by per-site instruction stacks.

State encoding: a length-N int64 array where 0 is an empty site, -1 holds one
sleeping particle, and k >= 1 holds k active particles.  A site is unstable
iff its entry is >= 1.  Toppling a site consumes the next unused instruction
there: a jump moves one particle to a neighbor (arrival at a sleeping site
wakes it, giving two active particles), a sleep instruction puts a lone active
particle to sleep and is a no-op on multiply occupied sites.  The per-site
count of consumed instructions is the odometer; the number of consumed jump
instructions is the jump count J.

Instruction stacks are realized as a pure hash of (stack seed, site, index),
so replays read identical sequences without storing them and independent
drivers (plain stabilization, the carpet procedure) consume the same stacks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .streams import _GOLDEN, _MASK64, mix64

EMPTY = 0
SLEEPING = -1

JUMP_LEFT = 0
JUMP_RIGHT = 1
SLEEP = 2

_K_SALT = 0xC2B2AE3D27D4EB4F


def instruction_thresholds(lam: float) -> tuple[int, int]:
    """uint64 thresholds (t_left, t_right) realizing the instruction law.

    A 64-bit draw u encodes jump-left if u < t_left, jump-right if
    t_left <= u < t_right, and sleep otherwise.  Left and right get exactly
    equal mass 1/(2(1+lam)); sleep gets the remaining lam/(1+lam).
    """
    if lam <= 0:
        raise ValueError(f"sleep rate must be positive, got {lam}")
    t_left = int((1.0 / (2.0 * (1.0 + lam))) * 2.0**64)
    return t_left, 2 * t_left


def _instr_hash(seed: int, x: int, k: int) -> int:
    zx = mix64(seed ^ ((int(x) + 1) * _GOLDEN & _MASK64))
    return mix64(zx ^ ((int(k) + 1) * _K_SALT & _MASK64))


class HashedStacks:
    """Instruction stacks addressed by (site, index) through a keyed hash.

    Carries the consumed-prefix pointers h (the odometer) and the jump
    count; the instruction sequence itself is immutable by construction.
    """

    def __init__(self, n: int, lam: float, seed: int):
        self.n = n
        self.lam = lam
        self.seed = seed & _MASK64
        self.t_left, self.t_right = instruction_thresholds(lam)
        self.h = np.zeros(n, dtype=np.int64)
        self.jumps = 0

    def instruction(self, x: int, k: int) -> int:
        u = _instr_hash(self.seed, x, k)
        if u < self.t_left:
            return JUMP_LEFT
        if u < self.t_right:
            return JUMP_RIGHT
        return SLEEP

    def consume(self, x: int) -> int:
        instr = self.instruction(x, int(self.h[x]))
        self.h[x] += 1
        if instr != SLEEP:
            self.jumps += 1
        return instr

    def fresh_copy(self) -> "HashedStacks":
        return HashedStacks(self.n, self.lam, self.seed)


class ScriptedStacks:
    """Explicit per-site instruction lists for deterministic tests."""

    def __init__(self, n: int, scripts: dict[int, list[int]]):
        self.n = n
        self.scripts = {x: list(s) for x, s in scripts.items()}
        self.h = np.zeros(n, dtype=np.int64)
        self.jumps = 0

    def instruction(self, x: int, k: int) -> int:
        script = self.scripts.get(x, [])
        if k >= len(script):
            raise IndexError(f"scripted stack at site {x} exhausted (index {k})")
        return script[k]

    def consume(self, x: int) -> int:
        instr = self.instruction(x, int(self.h[x]))
        self.h[x] += 1
        if instr != SLEEP:
            self.jumps += 1
        return instr

    def fresh_copy(self) -> "ScriptedStacks":
        return ScriptedStacks(self.n, self.scripts)


@dataclass
class RingConfig:
    """Particle configuration on the ring, cyclic modulo N."""

    states: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)
        if self.states.ndim != 1 or self.states.size == 0:
            raise ValueError("states must be a non-empty 1-d array")
        if np.any(self.states < -1):
            raise ValueError("invalid site state below -1")

    @property
    def n(self) -> int:
        return self.states.size

    @property
    def particle_count(self) -> int:
        s = self.states
        return int(np.where(s == SLEEPING, 1, np.maximum(s, 0)).sum())

    def is_stable(self) -> bool:
        return bool(np.all(self.states < 1))

    def unstable_sites(self) -> np.ndarray:
        return np.flatnonzero(self.states >= 1)

    def copy(self) -> "RingConfig":
        return RingConfig(self.states.copy())


@dataclass
class Odometer:
    h: np.ndarray
    jumps: int

    def copy(self) -> "Odometer":
        return Odometer(self.h.copy(), self.jumps)


@dataclass
class StabilizeResult:
    config: RingConfig
    odometer: Odometer
    terminated: bool
    steps: int


class IllegalToppling(RuntimeError):
    pass


def topple(config: RingConfig, stacks, x: int) -> int:
    """Consume and apply the next instruction at x; returns the instruction.

    Only legal at an unstable site.  Jumps move one particle (waking a
    sleeping target); sleep acts only when exactly one particle occupies x.
    """
    s = config.states
    n = s.size
    x %= n
    if s[x] < 1:
        raise IllegalToppling(f"site {x} is stable (state {s[x]})")
    instr = stacks.consume(x)
    if instr == SLEEP:
        if s[x] == 1:
            s[x] = SLEEPING
        return instr
    y = (x + 1) % n if instr == JUMP_RIGHT else (x - 1) % n
    s[x] -= 1
    s[y] = 2 if s[y] == SLEEPING else s[y] + 1
    return instr


def leftmost_policy(states: np.ndarray, rng=None) -> int:
    return int(np.flatnonzero(states >= 1)[0])


def rightmost_policy(states: np.ndarray, rng=None) -> int:
    return int(np.flatnonzero(states >= 1)[-1])


def random_policy(states: np.ndarray, rng: np.random.Generator) -> int:
    unstable = np.flatnonzero(states >= 1)
    return int(unstable[rng.integers(unstable.size)])


def stabilize(
    config: RingConfig,
    stacks,
    policy=leftmost_policy,
    step_cap: int = 10**9,
    policy_rng: np.random.Generator | None = None,
) -> StabilizeResult:
    """Topple policy-chosen unstable sites until stable or the cap runs out.

    Pure-Python reference driver; works with scripted stacks.  Cap exhaustion
    is reported through the terminated flag, not an error.
    """
    cfg = config.copy()
    steps = 0
    while steps < step_cap:
        if cfg.is_stable():
            break
        x = policy(cfg.states, policy_rng)
        topple(cfg, stacks, x)
        steps += 1
    return StabilizeResult(cfg, Odometer(stacks.h.copy(), stacks.jumps), cfg.is_stable(), steps)


def pre_flatten(config: RingConfig, stacks, step_cap: int = 10**9) -> StabilizeResult:
    """Topple sites holding >= 2 particles until none remain.

    A legal partial stabilization; sleeping singletons are left untouched and
    the particle count is preserved exactly.
    """
    cfg = config.copy()
    steps = 0
    while steps < step_cap:
        multi = np.flatnonzero(cfg.states >= 2)
        if multi.size == 0:
            break
        topple(cfg, stacks, int(multi[0]))
        steps += 1
    flat = bool(np.all(cfg.states < 2))
    return StabilizeResult(cfg, Odometer(stacks.h.copy(), stacks.jumps), flat, steps)


def abelian_check(
    config: RingConfig,
    stacks,
    policies,
    step_cap: int = 10**6,
) -> bool | None:
    """Stabilize once per policy on identical frozen stacks.

    True iff all runs agree exactly on final config, odometer and jump count;
    None if any run failed to terminate (inconclusive, distinct from False).
    """
    reference = None
    for policy in policies:
        if isinstance(policy, tuple):
            fn, rng_seed = policy
            rng = np.random.default_rng(rng_seed)
        else:
            fn, rng = policy, None
        res = stabilize(config, stacks.fresh_copy(), fn, step_cap, rng)
        if not res.terminated:
            return None
        key = (res.config.states.tolist(), res.odometer.h.tolist(), res.odometer.jumps)
        if reference is None:
            reference = key
        elif key != reference:
            return False
    return True


# ---------------------------------------------------------------------------
# numba fast path (leftmost policy, hashed stacks)
# ---------------------------------------------------------------------------

_U_GOLDEN = np.uint64(_GOLDEN)
_U_KSALT = np.uint64(_K_SALT)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * _U_MIX1
    z = (z ^ (z >> np.uint64(27))) * _U_MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _instr_nb(seed, x, k, t_left, t_right):
    zx = _mix64_nb(seed ^ (np.uint64(x + 1) * _U_GOLDEN))
    u = _mix64_nb(zx ^ (np.uint64(k + 1) * _U_KSALT))
    if u < t_left:
        return 0
    if u < t_right:
        return 1
    return 2


@njit(cache=True)
def _stabilize_leftmost_nb(states, h, seed, t_left, t_right, step_cap):
    n = states.shape[0]
    jumps = 0
    steps = 0
    p = 0
    while steps < step_cap:
        while p < n and states[p] < 1:
            p += 1
        if p == n:
            return jumps, steps, True
        x = p
        instr = _instr_nb(seed, x, h[x], t_left, t_right)
        h[x] += 1
        steps += 1
        if instr == 2:
            if states[x] == 1:
                states[x] = -1
        else:
            jumps += 1
            y = x + 1 if instr == 1 else x - 1
            if y < 0:
                y += n
            elif y >= n:
                y -= n
            states[x] -= 1
            if states[y] == -1:
                states[y] = 2
            else:
                states[y] += 1
            if y < p and states[y] >= 1:
                p = y
    # cap exhausted; report whether we happen to be stable
    stable = True
    for i in range(n):
        if states[i] >= 1:
            stable = False
            break
    return jumps, steps, stable


def stabilize_fast(
    config: RingConfig, lam: float, stack_seed: int, step_cap: int = 10**9
) -> StabilizeResult:
    """Leftmost-policy stabilization compiled with numba.

    Consumes the same hashed stacks as HashedStacks(n, lam, stack_seed), so
    results are exactly interchangeable with the reference driver.
    """
    t_left, t_right = instruction_thresholds(lam)
    states = config.states.copy()
    h = np.zeros(states.size, dtype=np.int64)
    jumps, steps, terminated = _stabilize_leftmost_nb(
        states,
        h,
        np.uint64(stack_seed & _MASK64),
        np.uint64(t_left),
        np.uint64(t_right),
        step_cap,
    )
    return StabilizeResult(RingConfig(states), Odometer(h, int(jumps)), bool(terminated), int(steps))


def stabilize_fast_resume(
    config: RingConfig, stacks: HashedStacks, step_cap: int = 10**9
) -> StabilizeResult:
    """Continue leftmost stabilization on partially consumed hashed stacks.

    Mutates the stacks' odometer and jump count, exactly as the reference
    driver would.
    """
    states = config.states.copy()
    jumps, steps, terminated = _stabilize_leftmost_nb(
        states,
        stacks.h,
        np.uint64(stacks.seed),
        np.uint64(stacks.t_left),
        np.uint64(stacks.t_right),
        step_cap,
    )
    stacks.jumps += int(jumps)
    return StabilizeResult(
        RingConfig(states), Odometer(stacks.h.copy(), stacks.jumps), bool(terminated), int(steps)
    )
