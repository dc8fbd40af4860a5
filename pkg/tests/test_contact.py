import numpy as np
import pytest

from pdl.contact import (
    BOTH_EDGES,
    FILL_HEALTHY,
    FILL_INFECTED,
    RIGHT_EDGE_ONLY,
    ContactParams,
    GraphicalLog,
    InfectionConfig,
    build_log,
    couple,
    cylinder_pattern,
    dominate_edges,
    edge_view,
    estimate_cylinder,
    estimate_edge_speed,
    estimate_survival,
    evolve,
    log_for_run,
    restart_times,
)
from pdl.streams import SeedSpec, derive_stream


def scripted_log(lo, hi, t1, lam_max, events):
    """events: list of (time, site, kind, mark)."""
    events = sorted(events)
    return GraphicalLog(
        lo,
        hi,
        0.0,
        t1,
        lam_max,
        np.array([e[0] for e in events], dtype=np.float64),
        np.array([e[1] for e in events], dtype=np.int64),
        np.array([e[2] for e in events], dtype=np.int8),
        np.array([e[3] for e in events], dtype=np.float64),
    )


def test_empty_config_stays_empty():
    log = log_for_run(SeedSpec(1, "cp/empty"), -10, 10, 5.0, 2.0)
    cfg = InfectionConfig.from_sites([], -10, 10)
    final, _, _ = evolve(cfg, log, ContactParams(2.0, 2.0), 5.0)
    assert not final.infected.any()


def test_scripted_recovery():
    # {0, 1} infected; one recovery at site 1, time 0.5; no open edges
    log = scripted_log(-5, 5, 1.0, 2.0, [(0.5, 1, 0, 0.0)])
    cfg = InfectionConfig.from_sites([0, 1], -5, 5)
    final, _, _ = evolve(cfg, log, ContactParams(2.0, 2.0), 1.0)
    assert final.sites().tolist() == [0]


def test_scripted_edge_openness():
    # an edge event with mark u infects iff u < lam at the relevant site
    for mark, lam_e, expect in [(0.9, 1.0, True), (1.1, 1.0, False)]:
        log = scripted_log(-5, 5, 1.0, 2.0, [(0.5, 0, 1, mark)])
        cfg = InfectionConfig.from_sites([0], -5, 5)
        final, _, _ = evolve(cfg, log, ContactParams(0.0, lam_e), 1.0)
        assert (1 in final.sites().tolist()) == expect


def test_border_rate_vs_interior():
    # edge event at the right edge uses lam_e; same event inside uses lam_i
    log = scripted_log(-5, 5, 1.0, 2.0, [(0.5, 0, 1, 0.7)])
    # right edge of {-1, 0} is 0: lam_e = 1 opens it
    cfg = InfectionConfig.from_sites([-1, 0], -5, 5)
    final, _, _ = evolve(cfg, log, ContactParams(0.2, 1.0), 1.0)
    assert 1 in final.sites().tolist()
    # now 0 is interior in {-1, 0, 1}: lam_i = 0.2 leaves the event closed
    log2 = scripted_log(-5, 5, 1.0, 2.0, [(0.5, 0, 1, 0.7)])
    cfg2 = InfectionConfig.from_sites([-1, 0, 1], -5, 5)
    final2, _, _ = evolve(cfg2, log2, ContactParams(0.2, 1.0), 1.0)
    assert 2 not in final2.sites().tolist()


def test_right_edge_only_mode():
    # left-edge event gets no boost in RightEdgeOnly mode
    log = scripted_log(-5, 5, 1.0, 2.0, [(0.5, 0, 2, 0.7)])
    cfg = InfectionConfig.from_sites([0, 1], -5, 5)
    final, _, _ = evolve(cfg, log, ContactParams(0.2, 1.0, RIGHT_EDGE_ONLY), 1.0)
    assert -1 not in final.sites().tolist()
    final2, _, _ = evolve(
        InfectionConfig.from_sites([0, 1], -5, 5),
        scripted_log(-5, 5, 1.0, 2.0, [(0.5, 0, 2, 0.7)]),
        ContactParams(0.2, 1.0, BOTH_EDGES),
        1.0,
    )
    assert -1 in final2.sites().tolist()


def test_pure_death_survival():
    res = estimate_survival(
        ContactParams(0.0, 0.0), [0], t_max=5.0, reps=10**5, seed=SeedSpec(2, "cp/died")
    )
    p = np.exp(-5.0)
    se = np.sqrt(p * (1 - p) / res["reps"])
    assert abs(res["theta_hat"] - p) < 3 * se


def test_edge_view():
    assert edge_view([3, 5, 9]).tolist() == [-6, -4, 0]
    assert edge_view([-6, -4, 0]).tolist() == [-6, -4, 0]
    # translation invariance
    assert edge_view([13, 15, 19]).tolist() == [-6, -4, 0]
    with pytest.raises(ValueError):
        edge_view([])


def test_couple_containment():
    params = ContactParams(2.0, 1.0)  # attractive region
    times = np.linspace(0.5, 10.0, 8)
    for r in range(50):
        log = log_for_run(SeedSpec(3, f"cp/couple/{r}"), -40, 40, 10.0, 2.0)
        a = InfectionConfig.from_sites([0], -40, 40)
        b = InfectionConfig.from_sites([-3, 0, 2], -40, 40)
        _, _, contained = couple(a, b, log, params, times)
        assert contained


def test_couple_classical():
    params = ContactParams(1.5, 1.5)
    times = np.linspace(0.5, 8.0, 6)
    rng = np.random.default_rng(0)
    for r in range(50):
        log = log_for_run(SeedSpec(4, f"cp/classic/{r}"), -40, 40, 8.0, 1.5)
        base = sorted(set(rng.integers(-5, 6, size=4).tolist()))
        extra = sorted(set(base + rng.integers(-8, 9, size=3).tolist()))
        a = InfectionConfig.from_sites(base, -40, 40)
        b = InfectionConfig.from_sites(extra, -40, 40)
        _, _, contained = couple(a, b, log, params, times)
        assert contained


def test_dominate_edges():
    times = np.linspace(1.0, 20.0, 10)
    for r in range(25):
        log = log_for_run(SeedSpec(5, f"cp/dom/{r}"), -140, 80, 20.0, 1.7489)
        _, _, dominated = dominate_edges(log, 1.6489, 0.1, times)
        assert dominated
    # eps = 0: identical processes, equality
    log = log_for_run(SeedSpec(5, "cp/dom/eq"), -140, 80, 20.0, 1.6489)
    e_c, e_m, dominated = dominate_edges(log, 1.6489, 0.0, times)
    assert dominated and np.array_equal(e_c, e_m)


def test_truncation_bracketing():
    # AllHealthy window content is contained in AllInfected content pathwise
    params = ContactParams(1.6489, 1.6489)
    times = np.linspace(1.0, 15.0, 6)
    for r in range(25):
        log = log_for_run(SeedSpec(6, f"cp/brk/{r}"), -60, 60, 15.0, 1.6489)
        ind = np.zeros(121, dtype=np.int8)
        ind[:61] = 1  # sites -60..0
        healthy = InfectionConfig(-60, 60, ind.copy(), FILL_HEALTHY)
        infected = InfectionConfig(-60, 60, ind.copy(), FILL_INFECTED)
        _, snaps_h, _ = evolve(healthy, log, params, 15.0, times)
        _, snaps_i, _ = evolve(infected, log, params, 15.0, times)
        assert np.all(snaps_i[snaps_h == 1] == 1)


def test_cylinder_pattern_pins_edge():
    snap = np.zeros(20, dtype=np.int8)
    snap[[3, 5, 9]] = 1
    pat = cylinder_pattern(snap, lo=0, depth=4)
    # edge-rooted [-4..0] = sites 5..9 -> 1,0,0,0,1
    assert pat == 0b10001
    assert pat & 1 == 1  # the edge bit is always set
    assert cylinder_pattern(np.zeros(5, dtype=np.int8), 0, 3) is None


def test_estimate_cylinder_t0_point_mass():
    params = ContactParams(1.6489, 1.8489)
    out = estimate_cylinder(params, 4, [0.0], 50, SeedSpec(7, "cp/cyl0"), "full")
    dist = out["distributions"][0.0]
    assert dist[0b11111] == 1.0


def test_restart_trace():
    trace = restart_times(1.6489, 0.3, t_max=30.0, seed=SeedSpec(8, "cp/restart"))
    taus = trace.restart_times
    assert all(t2 > t1 for t1, t2 in zip(taus, taus[1:]))
    assert trace.final_age >= 0
    assert trace.n_restarts == len(taus)


def test_log_determinism():
    a = log_for_run(SeedSpec(9, "cp/det"), -10, 10, 5.0, 2.0)
    b = log_for_run(SeedSpec(9, "cp/det"), -10, 10, 5.0, 2.0)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)
    cfg = InfectionConfig.from_sites([0], -10, 10)
    f1, _, _ = evolve(cfg, a, ContactParams(1.0, 1.0), 5.0)
    f2, _, _ = evolve(cfg, b, ContactParams(1.0, 1.0), 5.0)
    assert np.array_equal(f1.infected, f2.infected)


def test_window_mismatch_rejected():
    log = log_for_run(SeedSpec(10, "cp/mismatch"), -10, 10, 5.0, 2.0)
    cfg = InfectionConfig.from_sites([0], -5, 5)
    with pytest.raises(ValueError):
        evolve(cfg, log, ContactParams(1.0, 1.0), 5.0)
    with pytest.raises(ValueError):
        evolve(InfectionConfig.from_sites([0], -10, 10), log, ContactParams(3.0, 1.0), 5.0)


def test_edge_speed_extremes():
    # very fast spread: speed close to lam_e; deep subcritical: negative
    fast = estimate_edge_speed(
        ContactParams(10.0, 10.0), t_max=40.0, reps=30, seed=SeedSpec(11, "cp/fast")
    )
    assert fast["speed"] > 7.0
    slow = estimate_edge_speed(
        ContactParams(0.5, 0.5), t_max=40.0, reps=30, seed=SeedSpec(12, "cp/slow")
    )
    assert slow["ci_hi"] < 0.0


def test_edge_speed_monotone_in_lambda():
    speeds = []
    for lam in (1.2, 1.6489, 2.2):
        out = estimate_edge_speed(
            ContactParams(lam, lam), t_max=50.0, reps=60, seed=SeedSpec(13, "cp/mono")
        )
        speeds.append(out)
    for a, b in zip(speeds, speeds[1:]):
        assert a["speed"] - 2 * a["se"] < b["speed"] + 2 * b["se"]


def test_survival_bands():
    # deep supercritical: well inside (0.3, 1.0) at t_max=100
    sup = estimate_survival(
        ContactParams(3.0, 3.0), [0], t_max=100.0, reps=10**4, seed=SeedSpec(14, "cp/sup")
    )
    assert 0.3 < sup["theta_hat"] < 1.0
    # deep subcritical: extinct
    sub = estimate_survival(
        ContactParams(0.5, 0.5), [0], t_max=100.0, reps=10**4, seed=SeedSpec(15, "cp/sub")
    )
    assert sub["theta_hat"] < 0.01


def test_restart_age_grows():
    # the age t - tau_N(t) of the running copy grows with the horizon
    hits = {20.0: 0, 60.0: 0}
    n_seeds = 150
    for t_max in hits:
        for s in range(n_seeds):
            trace = restart_times(1.6489, 0.1, t_max, SeedSpec(16, f"cp/age/{t_max}/{s}"))
            hits[t_max] += trace.final_age > 10.0
    p20, p60 = hits[20.0] / n_seeds, hits[60.0] / n_seeds
    se = np.sqrt(p20 * (1 - p20) / n_seeds + p60 * (1 - p60) / n_seeds + 1e-12)
    assert p60 >= p20 - 2 * se
