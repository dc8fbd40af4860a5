"""Branching process with genealogy: rooted trees, alive leaves, pruning.

Alive individuals are the alive leaves.  On a branching event the acting
leaf gains Z children and dies; when Z = 0 the tree is pruned: with R the
most recent common ancestor of the remaining alive leaves, either R is the
root and the dying leaf's dangling dead chain is removed, or everything
outside R's subtree is removed and R becomes the new root.  Dead unary
chains below the MCA are retained (they carry the affinity structure).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counts import OffspringDist, bridge_trajectory, extinction_grid


@dataclass
class _Node:
    parent: int
    children: list[int] = field(default_factory=list)
    alive: bool = True
    founder: int = 0


class GenealogyTree:
    """Mutable rooted tree; the empty tree (root None) is absorbing."""

    def __init__(self, n_founders: int = 1):
        self.nodes: dict[int, _Node] = {}
        self._next = 0
        self.root: int | None = None
        self.alive: list[int] = []
        if n_founders == 1:
            self.root = self._new(-1, founder=0)
        elif n_founders > 1:
            # founders are alive children of a common dead root
            self.root = self._new(-1, founder=-1)
            self.nodes[self.root].alive = False
            self.alive.remove(self.root)
            for f in range(n_founders):
                self._new(self.root, founder=f)

    def _new(self, parent: int, founder: int) -> int:
        nid = self._next
        self._next += 1
        self.nodes[nid] = _Node(parent, [], True, founder)
        if parent >= 0:
            self.nodes[parent].children.append(nid)
        self.alive.append(nid)
        return nid

    @property
    def is_empty(self) -> bool:
        return self.root is None

    def n_alive(self) -> int:
        return len(self.alive)

    def founders_alive(self) -> set[int]:
        return {self.nodes[v].founder for v in self.alive}

    def branch(self, leaf: int, n_children: int):
        """The alive leaf gains n_children and dies; prunes when childless."""
        node = self.nodes[leaf]
        if not node.alive:
            raise ValueError(f"vertex {leaf} is not alive")
        node.alive = False
        self.alive.remove(leaf)
        if n_children > 0:
            for _ in range(n_children):
                self._new(leaf, node.founder)
            return
        self._prune(leaf)

    def _prune(self, dying: int):
        if not self.alive:
            self.nodes.clear()
            self.root = None
            return
        # remove the dangling dead chain from the dying vertex upward
        v = dying
        while v != self.root and not self.nodes[v].children and not self.nodes[v].alive:
            parent = self.nodes[v].parent
            self.nodes[parent].children.remove(v)
            del self.nodes[v]
            v = parent
        # if the MCA of the alive leaves is below the root, re-root there by
        # descending through dead unary vertices and cutting everything above;
        # with a single alive leaf the chain to it is retained and the root
        # stays (the leaf itself would be the literal MCA)
        if len(self.alive) >= 2:
            r = self.root
            while not self.nodes[r].alive and len(self.nodes[r].children) == 1:
                nxt = self.nodes[r].children[0]
                del self.nodes[r]
                r = nxt
            self.nodes[r].parent = -1
            self.root = r

    # -- diagnostics ---------------------------------------------------------

    def check_invariants(self) -> list[str]:
        """Every vertex has an alive descendant; root is the MCA of alive leaves."""
        bad = []
        if self.root is None:
            return ["nonempty"] if self.alive else []
        has_alive: dict[int, bool] = {}

        def walk(v: int) -> bool:
            ok = self.nodes[v].alive
            for c in self.nodes[v].children:
                ok = walk(c) or ok
            has_alive[v] = ok
            return ok

        walk(self.root)
        if not all(has_alive.values()):
            bad.append("alive-descendant")
        root_kids_with_alive = sum(
            1 for c in self.nodes[self.root].children if has_alive.get(c)
        )
        if (
            not self.nodes[self.root].alive
            and root_kids_with_alive < 2
            and len(self.alive) >= 2
        ):
            bad.append("root-mca")
        return bad

    def stats(self) -> tuple[int, int]:
        """(number of alive leaves, tree diameter in edges)."""
        if self.root is None:
            return 0, 0
        if len(self.nodes) == 1:
            return self.n_alive(), 0

        def farthest(src: int) -> tuple[int, int]:
            seen = {src: 0}
            queue = [src]
            best, bestd = src, 0
            while queue:
                v = queue.pop()
                d = seen[v]
                nbrs = list(self.nodes[v].children)
                if self.nodes[v].parent >= 0:
                    nbrs.append(self.nodes[v].parent)
                for w in nbrs:
                    if w not in seen:
                        seen[w] = d + 1
                        if d + 1 > bestd:
                            best, bestd = w, d + 1
                        queue.append(w)
            return best, bestd

        u, _ = farthest(self.root)
        _, diam = farthest(u)
        return self.n_alive(), diam

    def canonical(self):
        """Root-preserving isomorphism invariant (alive flags included)."""
        if self.root is None:
            return ()

        def enc(v: int):
            return (int(self.nodes[v].alive), tuple(sorted(enc(c) for c in self.nodes[v].children)))

        return enc(self.root)


def evolve_genealogy(
    tree: GenealogyTree,
    dist: OffspringDist,
    stream: np.random.Generator,
    t: float,
    rate: float = 1.0,
    check: bool = False,
) -> GenealogyTree:
    """Run the tree dynamics to time t (alive leaves carry rate clocks)."""
    values = np.asarray(dist.values)
    probs = np.asarray(dist.probs)
    now = 0.0
    while tree.alive:
        n = len(tree.alive)
        now += stream.exponential(1.0 / (rate * n))
        if now >= t:
            break
        leaf = tree.alive[int(stream.integers(n))]
        z = int(values[int(stream.choice(len(values), p=probs))])
        tree.branch(leaf, z)
        if check and z == 0:
            bad = tree.check_invariants()
            if bad:
                raise RuntimeError(f"pruning invariants violated: {bad}")
    return tree


def conditioned_tree(
    dist: OffspringDist,
    n_founders: int,
    t: float,
    seed: int,
    rep: int,
    q_grid,
    dt_grid,
    stream: np.random.Generator,
    rate: float = 1.0,
) -> GenealogyTree:
    """Tree built over a survival-conditioned count path.

    Given the count trajectory, the acting leaf at each event is uniform
    among alive leaves, so the conditional law of the tree given the count
    path is realized exactly.
    """
    _, zs = bridge_trajectory(dist, n_founders, t, seed, rep, q_grid, dt_grid, rate)
    tree = GenealogyTree(n_founders)
    for z in zs:
        leaf = tree.alive[int(stream.integers(len(tree.alive)))]
        tree.branch(leaf, int(z))
    return tree


def o_t_statistics(
    dist: OffspringDist,
    n_founders: int,
    t: float,
    reps: int,
    seed: int,
    rate: float = 1.0,
) -> dict:
    """P(>= 2 founders with alive descendants at t | survival), via the bridge,
    plus the conditional diameter distribution on that event."""
    from ..harness import binomial_ci

    if n_founders < 2:
        return {"p_multi": 0.0, "reps": reps, "diameters": []}
    q_grid, dt_grid = extinction_grid(dist, t, rate)
    stream = np.random.default_rng(seed ^ 0xD1A6)
    multi = 0
    diameters = []
    for r in range(reps):
        tree = conditioned_tree(dist, n_founders, t, seed, r, q_grid, dt_grid, stream, rate)
        if len(tree.founders_alive()) >= 2:
            multi += 1
            diameters.append(tree.stats()[1])
    ci = binomial_ci(multi, reps, 0.95)
    return {
        "p_multi": multi / reps,
        "ci_lo": ci[0],
        "ci_hi": ci[1],
        "reps": reps,
        "diameters": diameters,
    }


def yaglom_trees(
    dist: OffspringDist,
    t: float,
    reps: int,
    stream: np.random.Generator,
    rate: float = 1.0,
) -> dict:
    """Empirical law of the canonical tree at t conditioned on survival."""
    counts: dict = {}
    survivors = 0
    for _ in range(reps):
        tree = evolve_genealogy(GenealogyTree(1), dist, stream, t, rate)
        if tree.is_empty:
            continue
        survivors += 1
        key = tree.canonical()
        counts[key] = counts.get(key, 0) + 1
    if survivors == 0:
        raise RuntimeError(f"no surviving runs out of {reps}")
    return {
        "distribution": {k: c / survivors for k, c in counts.items()},
        "survivors": survivors,
        "reps": reps,
    }
