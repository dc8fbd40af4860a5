import numpy as np
import pytest

from pdl.branching import (
    AbsorbedError,
    GenealogyTree,
    OffspringDist,
    REFERENCE_DIST,
    brw_offspring,
    build_subgenerator,
    canonical_brw,
    conditioned_brw,
    dense_eig_reference,
    estimate_g,
    evolve_genealogy,
    extinction_grid,
    o_t_statistics,
    q_process_simulate,
    simulate_brw,
    simulate_final_counts,
    spectral_oracle,
    step_branching,
    step_brw,
    support_diameter,
    survival_probability,
    walker_path,
    yaglom_trees,
)
from pdl.branching.counts import bridge_trajectory
from pdl.branching.brw import BrwEvent, BrwRun
from pdl.harness import tv_distance


def closed_form_extinction(t):
    # linear birth-death with death 2/3, birth 1/3 per capita
    return 2 * (np.exp(t / 3) - 1) / (2 * np.exp(t / 3) - 1)


def test_offspring_dist_validation():
    d = REFERENCE_DIST
    assert d.mean == pytest.approx(2 / 3)
    assert d.subcritical and d.non_lazy
    with pytest.raises(ValueError):
        OffspringDist.from_pmf({0: 0.5, 2: 0.4})
    with pytest.raises(ValueError):
        OffspringDist.from_pmf({-1: 0.5, 2: 0.5})


def test_step_branching_pure_death():
    rng = np.random.default_rng(0)
    dist = OffspringDist.from_pmf({0: 1.0})
    for _ in range(50):
        dt, nxt = step_branching(3, dist, rng)
        assert nxt == 2 and dt > 0
    with pytest.raises(AbsorbedError):
        step_branching(0, dist, rng)


def test_step_branching_law():
    rng = np.random.default_rng(1)
    outcomes = np.array([step_branching(1, REFERENCE_DIST, rng)[1] for _ in range(10**5)])
    p2 = np.mean(outcomes == 2)
    assert abs(p2 - 1 / 3) < 3 * np.sqrt((1 / 3) * (2 / 3) / outcomes.size)
    waits = np.array([step_branching(10, REFERENCE_DIST, rng)[0] for _ in range(10**5)])
    assert abs(waits.mean() - 0.1) < 3 * waits.std() / np.sqrt(waits.size)


def test_extinction_grid_matches_closed_form():
    q, dt = extinction_grid(REFERENCE_DIST, 15.0)
    ts = np.arange(q.size) * dt
    assert np.max(np.abs(q - closed_form_extinction(ts))) < 1e-9
    assert survival_probability(REFERENCE_DIST, 2, 10.0) == pytest.approx(
        1 - closed_form_extinction(10.0) ** 2, abs=1e-9
    )


def test_simulated_survival_matches_closed_form():
    finals = simulate_final_counts(REFERENCE_DIST, 1, 5.0, 10**5, seed=7)
    p_hat = np.mean(finals > 0)
    p = 1 - closed_form_extinction(5.0)
    assert abs(p_hat - p) < 3 * np.sqrt(p * (1 - p) / finals.size)


def test_spectral_oracle_reference_dist():
    sol = spectral_oracle(REFERENCE_DIST, n_max=200, tol=1e-10)
    assert abs(sol.alpha - 1 / 3) < 1e-6
    geo = np.array([0.5**j for j in range(1, 201)])
    geo /= geo.sum()
    assert 0.5 * np.abs(sol.nu - geo).sum() < 1e-6
    # h_j = j/2 for this law (nu-normalized)
    assert np.allclose(sol.h[:20], np.arange(1, 21) / 2, rtol=1e-5)
    assert np.all(sol.nu > 0) and np.all(sol.h > 0)
    assert sol.nu @ sol.h == pytest.approx(1.0)


def test_spectral_oracle_vs_dense():
    for pmf in ({0: 2 / 3, 2: 1 / 3}, {0: 0.55, 1: 0.2, 2: 0.15, 3: 0.1}):
        dist = OffspringDist.from_pmf(pmf)
        sol = spectral_oracle(dist, n_max=120, tol=1e-10)
        alpha_d, nu_d, h_d = dense_eig_reference(dist, 120)
        assert abs(sol.alpha - alpha_d) < 1e-8
        assert np.abs(sol.nu - nu_d).sum() < 1e-7
        assert np.allclose(sol.h, h_d, rtol=1e-6)


def test_spectral_oracle_pure_death():
    dist = OffspringDist.from_pmf({0: 1.0})
    sol = spectral_oracle(dist, n_max=50)
    assert abs(sol.alpha - 1.0) < 1e-8
    assert sol.nu[0] == pytest.approx(1.0, abs=1e-8)  # nu concentrated at state 1
    assert np.allclose(sol.h / sol.h[0], np.arange(1, 51), rtol=1e-6)


def test_spectral_solution_roundtrip():
    sol = spectral_oracle(REFERENCE_DIST, n_max=60)
    sol2 = type(sol).from_text(sol.to_text())
    assert sol2.alpha == sol.alpha
    assert np.array_equal(sol2.nu, sol.nu)
    assert np.array_equal(sol2.h, sol.h)


def test_yaglom_counts_vs_oracle():
    sol = spectral_oracle(REFERENCE_DIST, n_max=200)
    finals = simulate_final_counts(REFERENCE_DIST, 1, 8.0, 2 * 10**5, seed=11)
    alive = finals[finals > 0]
    assert alive.size > 5000
    emp = np.bincount(alive, minlength=201)[1:201] / alive.size
    # finite-t bias at t=8 is ~0.018; noise ~0.012
    assert 0.5 * np.abs(emp - sol.nu).sum() < 0.05


def test_q_process_occupation():
    sol = spectral_oracle(REFERENCE_DIST, n_max=200)
    rng = np.random.default_rng(13)
    out = q_process_simulate(sol, REFERENCE_DIST, 1, 3000.0, rng)
    assert out["state_min"] >= 1  # never absorbs
    target = sol.qprocess_stationary()
    assert 0.5 * np.abs(out["occupation"] - target).sum() < 0.05


def test_estimate_g_trivial_cases():
    assert estimate_g(REFERENCE_DIST, 5.0, 0, 100, seed=1)["p_hat"] == 1.0
    dist = OffspringDist.from_pmf({0: 1.0})
    out = estimate_g(dist, 5.0, 1, 2000, seed=2, method="direct")
    assert out["p_hat"] == 0.0


def test_estimate_g_bridge_matches_direct():
    direct = estimate_g(REFERENCE_DIST, 6.0, 2, 4 * 10**5, seed=3, method="direct")
    bridge = estimate_g(REFERENCE_DIST, 6.0, 2, 4 * 10**4, seed=4, method="bridge")
    se = np.sqrt(
        direct["p_hat"] * (1 - direct["p_hat"]) / direct["survivors"]
        + bridge["p_hat"] * (1 - bridge["p_hat"]) / bridge["survivors"]
    )
    assert abs(direct["p_hat"] - bridge["p_hat"]) < 4 * se + 0.01


def test_bridge_never_absorbs_and_matches_survival_marginal():
    # conditioned trajectories end at the exact conditional law marginal
    t = 10.0
    q_grid, dt = extinction_grid(REFERENCE_DIST, t)
    reps = 3 * 10**4
    finals = []
    for r in range(reps):
        _, zs = bridge_trajectory(REFERENCE_DIST, 1, t, 17, r, q_grid, dt)
        x = 1
        for z in zs:
            x = x - 1 + z
            assert x >= 1
        finals.append(x)
    finals = np.asarray(finals)
    direct = simulate_final_counts(REFERENCE_DIST, 1, t, 2 * 10**6, seed=18)
    alive = direct[direct > 0]
    k = max(finals.max(), alive.max())
    emp_b = np.bincount(finals, minlength=k + 1)[1:] / finals.size
    emp_d = np.bincount(alive, minlength=k + 1)[1:] / alive.size
    assert 0.5 * np.abs(emp_b - emp_d).sum() < 0.03


# -- genealogy ---------------------------------------------------------------


def test_tree_single_death_goes_empty():
    tree = GenealogyTree(1)
    tree.branch(tree.root, 0)
    assert tree.is_empty
    assert tree.stats() == (0, 0)


def test_prune_case_i_root_kept():
    # two alive leaves under the root; one dies: chain to survivor remains
    tree = GenealogyTree(2)
    a, b = tree.alive[0], tree.alive[1]
    root = tree.root
    tree.branch(a, 0)
    assert tree.root == root
    assert tree.alive == [b]
    assert len(tree.nodes) == 2  # root and survivor
    assert tree.check_invariants() == []


def test_prune_case_ii_reroot():
    # dying branch hangs off the root; other alive leaves sit under an
    # internal vertex: tree re-roots there and the off-branch is deleted
    tree = GenealogyTree(2)
    x, c = tree.alive[0], tree.alive[1]
    tree.branch(c, 2)  # c dies, leaves two grandchildren under c
    assert tree.check_invariants() == []
    tree.branch(x, 0)  # x dies: everything above c goes away
    assert tree.root == c
    assert tree.nodes[c].parent == -1
    assert len(tree.alive) == 2
    assert tree.check_invariants() == []


def test_tree_stats_examples():
    t1 = GenealogyTree(1)
    assert t1.stats() == (1, 0)
    # path of 4 vertices, one alive endpoint
    chain = GenealogyTree(1)
    for _ in range(3):
        chain.branch(chain.alive[0], 1)
    assert chain.stats() == (1, 3)
    # star: root with 3 alive children
    star = GenealogyTree(1)
    star.branch(star.alive[0], 3)
    assert star.stats() == (3, 2)


def test_canonical_tree_isomorphism():
    t1 = GenealogyTree(1)
    t1.branch(t1.alive[0], 2)
    t1.branch(t1.alive[0], 2)  # grow left child
    t2 = GenealogyTree(1)
    t2.branch(t2.alive[0], 2)
    t2.branch(t2.alive[1], 2)  # grow right child: mirror image
    assert t1.canonical() == t2.canonical()
    # same shape, different alive pattern differs
    t3 = GenealogyTree(1)
    t3.branch(t3.alive[0], 2)
    enc_before = t3.canonical()
    t3.nodes[t3.alive[0]].alive = False
    t3.alive.pop(0)
    assert t3.canonical() != enc_before
    assert t1.canonical() == t1.canonical()


def test_projection_commutes_with_counts():
    # alive-leaf count of the genealogy process is the plain branching law
    rng = np.random.default_rng(23)
    reps = 4 * 10**4
    pis = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        tree = evolve_genealogy(GenealogyTree(1), REFERENCE_DIST, rng, 2.0, check=True)
        pis[r] = tree.n_alive()
    counts = simulate_final_counts(REFERENCE_DIST, 1, 2.0, reps, seed=29)
    k = int(max(pis.max(), counts.max()))
    p = np.bincount(pis, minlength=k + 1) / reps
    q = np.bincount(counts, minlength=k + 1) / reps
    assert tv_distance(p, q) < 0.02


def test_yaglom_trees_projection():
    rng = np.random.default_rng(31)
    out = yaglom_trees(REFERENCE_DIST, 3.0, 2 * 10**4, rng)
    # project the conditioned tree law to counts and compare against the
    # conditioned plain branching law
    proj: dict[int, float] = {}

    def n_alive(enc):
        alive, kids = enc
        return alive + sum(n_alive(k) for k in kids)

    for enc, p in out["distribution"].items():
        n = n_alive(enc)
        proj[n] = proj.get(n, 0.0) + p
    finals = simulate_final_counts(REFERENCE_DIST, 1, 3.0, 2 * 10**5, seed=37)
    alive = finals[finals > 0]
    q = {int(j): float(c) for j, c in zip(*np.unique(alive, return_counts=True))}
    tot = sum(q.values())
    q = {j: c / tot for j, c in q.items()}
    assert tv_distance(proj, q) < 0.02


def test_o_t_single_founder_zero():
    out = o_t_statistics(REFERENCE_DIST, 1, 5.0, 100, seed=41)
    assert out["p_multi"] == 0.0


# -- branching random walk ----------------------------------------------------


def test_brw_offspring_projection():
    d = brw_offspring(0.5)
    assert d.prob_of(2) == pytest.approx(1 / 3)
    assert d.prob_of(0) == pytest.approx(2 / 3)


def test_brw_pure_death_time():
    rng = np.random.default_rng(43)
    times = []
    lam = 1e-9
    for _ in range(2000):
        run = simulate_brw([(0,)], lam, 50.0, rng)
        death = [e for e in run.events if e.kind == "death"]
        if death:
            times.append(death[0].time)
    m = np.mean(times)
    assert abs(m - 1.0) < 4 * np.std(times) / np.sqrt(len(times))


def test_brw_counts_project_to_branching():
    rng = np.random.default_rng(47)
    lam = 0.5
    reps = 3 * 10**4
    ns = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        run = simulate_brw([(0,)], lam, 2.0, rng)
        ns[r] = len(run.alive)
    counts = simulate_final_counts(brw_offspring(lam), 1, 2.0, reps, seed=53, rate=1 + lam)
    k = int(max(ns.max(), counts.max()))
    p = np.bincount(ns, minlength=k + 1) / reps
    q = np.bincount(counts, minlength=k + 1) / reps
    assert tv_distance(p, q) < 0.02


def test_canonical_brw():
    assert canonical_brw({(7, -3): 1}) == (((0, 0), 1),)
    a = {(0, 0): 2, (1, 0): 1}
    b = {(5, 5): 2, (6, 5): 1}
    assert canonical_brw(a) == canonical_brw(b)
    c = {(0, 0): 1, (1, 0): 2}
    assert canonical_brw(a) != canonical_brw(c)
    assert canonical_brw({}) == ()
    assert canonical_brw(dict(canonical_brw(a))) == canonical_brw(a)


def test_step_brw_neighbor_law():
    rng = np.random.default_rng(59)
    lam = 1e9  # births only
    hits = {(-1,): 0, (1,): 0}
    for _ in range(4000):
        _, occ = step_brw({(0,): 1}, lam, rng)
        for site in occ:
            if site != (0,):
                hits[site] += 1
    total = sum(hits.values())
    assert total == 4000
    assert abs(hits[(1,)] / total - 0.5) < 3 * np.sqrt(0.25 / total)


def test_support_diameter():
    assert support_diameter({(0, 0): 1}) == 0
    assert support_diameter({(0, 0): 1, (3, -2): 1}) == 3
    assert support_diameter({}) == 0


def test_walker_path_scripted():
    # founder births A (line survives), then walker A births B (line dies):
    # exactly one jump, at A's birth
    run = BrwRun(1, [(0,), (1,), (2,)], [-1, 0, 1], {1}, [])
    run.events = [
        BrwEvent(0.5, 0, "birth", 1, (1,)),
        BrwEvent(1.0, 1, "birth", 2, (1,)),
        BrwEvent(1.5, 2, "death"),
    ]
    jumps = walker_path(run, 0, 2.0)
    assert jumps == [(1,)]


def test_walker_no_births():
    run = BrwRun(1, [(0,)], [-1], {0}, [])
    assert walker_path(run, 0, 1.0) == []
    dead = BrwRun(1, [(0,)], [-1], set(), [BrwEvent(0.3, 0, "death")])
    with pytest.raises(AbsorbedError):
        walker_path(dead, 0, 1.0)


def test_conditioned_brw_founders():
    lam = 0.5
    dist = brw_offspring(lam)
    q_grid, dt = extinction_grid(dist, 5.0, rate=1 + lam)
    rng = np.random.default_rng(61)
    multi = 0
    for r in range(300):
        occ, founders = conditioned_brw(lam, 2, 1, 5.0, 67, r, q_grid, dt, rng)
        assert sum(occ.values()) >= 1
        assert founders
        multi += len(founders) >= 2
    assert 0 < multi < 300


def test_diameter_grows_given_both_alive():
    from pdl.branching.brw import diameter_given_both_alive

    d10 = diameter_given_both_alive(0.5, 1, 10.0, 1500, seed=71)
    d40 = diameter_given_both_alive(0.5, 1, 40.0, 1500, seed=72)
    se = np.sqrt(d10.var() / d10.size + d40.var() / d40.size)
    assert d40.mean() - d10.mean() > 3 * se
