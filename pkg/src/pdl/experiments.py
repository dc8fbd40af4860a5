"""Experiment runners behind the CLI subcommands.

Every runner derives its randomness from "experiment/cell/replica" stream
labels, so reruns with the same config and seed are byte-identical and
fan-out over a worker pool cannot change the output (results merge in task
order).
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np

from .arw import HashedStacks, stabilize_fast
from .carpet import CarpetInvariantError
from .branching import (
    OffspringDist,
    brw_offspring,
    estimate_g,
    q_process_simulate,
    simulate_final_counts,
    spectral_oracle,
    yaglom_brw,
    yaglom_trees,
)
from .carpet import initial_ring, run_until_stable
from .contact import (
    ContactParams,
    cylinder_tv_trend,
    estimate_edge_speed,
    estimate_survival,
)
from .harness import (
    ExperimentConfig,
    ExperimentSpec,
    ParamSpec,
    _float_list,
    _int_list,
    linear_fit,
    parallel_map,
)
from .streams import SeedSpec, derive_stream, derive_u64


def _parse_pmf(raw: str) -> dict[int, float]:
    pmf = {}
    for tok in raw.split(","):
        k, _, v = tok.partition(":")
        pmf[int(k.strip())] = float(Fraction(v.strip()))
    return pmf


DEFAULT_PMF = "0:2/3,2:1/3"


# ---------------------------------------------------------------------------
# ARW experiments
# ---------------------------------------------------------------------------


def _stabilize_cell(args):
    n, zeta, lam, reps, seed, step_cap = args
    rows = []
    for rep in range(reps):
        spec = SeedSpec(seed, f"arw-stabilize/{n}/{zeta}/{rep}")
        cfg = initial_ring(n, zeta, 2, stream=derive_stream(spec))
        res = stabilize_fast(cfg, lam, derive_u64(spec.child("stacks")), step_cap)
        rows.append(
            {
                "n": n,
                "zeta": zeta,
                "lam": lam,
                "rep": rep,
                "jumps": res.odometer.jumps,
                "steps": res.steps,
                "terminated": int(res.terminated),
            }
        )
    return rows


def run_arw_stabilize(config: ExperimentConfig):
    p = config.params
    tasks = [
        (n, zeta, p["lam"], config.reps, config.seed, p["step_cap"])
        for n in p["n_grid"]
        for zeta in p["zeta_grid"]
    ]
    for rows in parallel_map(_stabilize_cell, tasks, config.threads):
        yield from rows


def phase_scaling_cell(args):
    n, zeta, lam, reps, seed, step_cap = args
    rows = []
    for rep in range(reps):
        spec = SeedSpec(seed, f"arw-phase/{n}/{zeta}/{rep}")
        cfg = initial_ring(n, zeta, 2, stream=derive_stream(spec))
        res = stabilize_fast(cfg, lam, derive_u64(spec.child("stacks")), step_cap)
        jumps = max(res.odometer.jumps, 1)
        rows.append(
            {
                "n": n,
                "zeta": zeta,
                "rep": rep,
                "jumps": res.odometer.jumps,
                "log_jumps": float(np.log(jumps)),
                "censored": int(not res.terminated),
            }
        )
    return rows


def phase_scaling_experiment(
    n_grid, zeta_grid, lam, reps, step_cap, seed, threads=1
):
    """Per-cell log-jump samples plus the per-zeta scaling fits."""
    tasks = [(n, z, lam, reps, seed, step_cap) for z in zeta_grid for n in n_grid]
    cell_rows = parallel_map(phase_scaling_cell, tasks, threads)
    rows = [r for rows in cell_rows for r in rows]
    fits = []
    for zeta in zeta_grid:
        means = []
        for n in n_grid:
            cell = [r["log_jumps"] for r in rows if r["n"] == n and r["zeta"] == zeta]
            means.append(np.mean(cell))
        lin = linear_fit(np.asarray(n_grid, dtype=float), means)
        loglog = linear_fit(np.log(np.asarray(n_grid, dtype=float)), means)
        censored = np.mean(
            [r["censored"] for r in rows if r["zeta"] == zeta]
        )
        fits.append(
            {
                "zeta": zeta,
                "slope_vs_n": lin.slope,
                "slope_se": lin.slope_se,
                "r2_vs_n": lin.r2,
                "slope_vs_logn": loglog.slope,
                "r2_vs_logn": loglog.r2,
                "censor_rate": float(censored),
            }
        )
    return rows, fits


def run_arw_phase(config: ExperimentConfig):
    p = config.params
    rows, fits = phase_scaling_experiment(
        p["n_grid"], p["zeta_grid"], p["lam"], config.reps, p["step_cap"], config.seed, config.threads
    )
    import csv

    with open(config.out / "arw-phase-fits.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "zeta", "slope_vs_n", "slope_se", "r2_vs_n",
                "slope_vs_logn", "r2_vs_logn", "censor_rate",
            ],
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(fits)
    yield from rows


def _carpet_cell(args):
    a, n_blocks, zeta, lam, reps, seed, emission_cap, mode_cap, out_dir = args
    n_sites = (n_blocks + 2) * a * a
    rows = []
    for rep in range(reps):
        spec = SeedSpec(seed, f"arw-carpet/{a}/{n_blocks}/{zeta}/{rep}")
        cfg = initial_ring(n_sites, zeta, a, stream=derive_stream(spec))
        stacks = HashedStacks(n_sites, lam, derive_u64(spec.child("stacks")))
        row = {
            "a": a,
            "n_blocks": n_blocks,
            "zeta": zeta,
            "lam": lam,
            "rep": rep,
        }
        try:
            res = run_until_stable(
                cfg, a, stacks, mode_cap=mode_cap, emission_cap=emission_cap, check=True
            )
        except CarpetInvariantError as exc:
            dump = Path(out_dir) / f"carpet-violation-{a}-{n_blocks}-{rep}.txt"
            dump.write_text(exc.snapshot + "\n")
            row.update({"modes": "", "jumps": "", "stabilized": 0,
                        "condition14_first_mode": "", "mass_balance_ok": 0,
                        "_failed": True})
            rows.append(row)
            continue
        cond = [int(s.condition_14()) for s in res.mode_stats]
        balance_ok = all(not s.mass_balance_violations() for s in res.mode_stats)
        row.update(
            {
                "modes": res.modes_completed,
                "jumps": res.total_jumps,
                "stabilized": int(res.stabilized),
                "condition14_first_mode": cond[0] if cond else "",
                "mass_balance_ok": int(balance_ok),
            }
        )
        rows.append(row)
    return rows


def run_arw_carpet(config: ExperimentConfig):
    p = config.params
    config.out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (p["a"], nb, zeta, p["lam"], config.reps, config.seed,
         p["emission_cap"], p["mode_cap"], str(config.out))
        for nb in p["n_blocks_grid"]
        for zeta in p["zeta_grid"]
    ]
    for rows in parallel_map(_carpet_cell, tasks, config.threads):
        yield from rows


# ---------------------------------------------------------------------------
# contact process experiments
# ---------------------------------------------------------------------------


def _survival_cell(args):
    lam_i, lam_e, t_max, reps, seed, lam_max = args
    out = estimate_survival(
        ContactParams(lam_i, lam_e),
        [0],
        t_max,
        reps,
        SeedSpec(seed, f"cp-survival/{lam_i}/{lam_e}"),
        lam_max=lam_max,
    )
    return {
        "lambda_i": lam_i,
        "lambda_e": lam_e,
        "t_max": t_max,
        "reps": out["reps"],
        "theta_hat": out["theta_hat"],
        "ci_lo": out["ci_lo"],
        "ci_hi": out["ci_hi"],
        "starved": out["starved"],
    }


def run_cp_survival(config: ExperimentConfig):
    p = config.params
    lam_max = max(max(p["lambda_i_grid"]), max(p["lambda_e_grid"]))
    tasks = [
        (li, le, p["t_max"], config.reps, config.seed, lam_max)
        for li in p["lambda_i_grid"]
        for le in p["lambda_e_grid"]
    ]
    yield from parallel_map(_survival_cell, tasks, config.threads)


def _edge_cell(args):
    lam_i, lam_e, t_max, reps, seed, window, lam_max = args
    out = estimate_edge_speed(
        ContactParams(lam_i, lam_e),
        t_max,
        reps,
        SeedSpec(seed, f"cp-edge/{lam_i}/{lam_e}"),
        window_width=window,
        lam_max=lam_max,
    )
    return {
        "lambda_i": lam_i,
        "lambda_e": lam_e,
        "t_max": t_max,
        "speed": out["speed"],
        "se": out["se"],
        "ci_lo": out["ci_lo"],
        "ci_hi": out["ci_hi"],
        "reps": out["reps"],
        "discarded": out["discarded"],
    }


def run_cp_edge(config: ExperimentConfig):
    p = config.params
    lam_max = max(p["lambda_grid"]) + p["lambda_e_offset"]
    tasks = [
        (lam, lam + p["lambda_e_offset"], p["t_max"], config.reps, config.seed, p["window"], lam_max)
        for lam in p["lambda_grid"]
    ]
    yield from parallel_map(_edge_cell, tasks, config.threads)


def run_cp_cylinder(config: ExperimentConfig):
    p = config.params
    params = ContactParams(p["lambda_i"], p["lambda_e"])
    out = cylinder_tv_trend(
        params,
        p["depth"],
        p["t_grid"],
        config.reps,
        SeedSpec(config.seed, "cp-cylinder"),
    )
    for t in sorted(p["t_grid"]):
        yield {
            "t": t,
            "depth": p["depth"],
            "lambda_i": p["lambda_i"],
            "lambda_e": p["lambda_e"],
            "tv": out[t]["tv_mean"],
            "tv_se": out[t]["tv_se"],
            "reps": config.reps,
        }


# ---------------------------------------------------------------------------
# branching experiments
# ---------------------------------------------------------------------------


def run_bp_yaglom(config: ExperimentConfig):
    p = config.params
    dist = OffspringDist.from_pmf(_parse_pmf(p["pmf"]))
    sol = spectral_oracle(dist, n_max=p["n_max"])
    finals = simulate_final_counts(
        dist, 1, p["t"], config.reps, seed=derive_u64(SeedSpec(config.seed, "bp-yaglom"))
    )
    alive = finals[finals > 0]
    if alive.size == 0:
        raise RuntimeError("no surviving runs; increase reps or lower t")
    emp = np.bincount(alive, minlength=sol.n_max + 1)[1:] / alive.size
    for j in range(1, min(sol.n_max, int(alive.max()) + 5) + 1):
        yield {
            "state": j,
            "freq_mc": float(emp[j - 1]),
            "nu_oracle": float(sol.nu[j - 1]),
            "survivors": int(alive.size),
            "t": p["t"],
        }


def run_bp_qprocess(config: ExperimentConfig):
    p = config.params
    dist = OffspringDist.from_pmf(_parse_pmf(p["pmf"]))
    sol = spectral_oracle(dist, n_max=p["n_max"])
    stream = derive_stream(SeedSpec(config.seed, "bp-qprocess"))
    out = q_process_simulate(sol, dist, p["initial"], p["horizon"], stream)
    target = sol.qprocess_stationary()
    for j in range(1, p["n_max"] + 1):
        if out["occupation"][j - 1] == 0 and target[j - 1] < 1e-12:
            continue
        yield {
            "state": j,
            "occupation": float(out["occupation"][j - 1]),
            "target": float(target[j - 1]),
            "horizon": p["horizon"],
        }


def run_bp_gevent(config: ExperimentConfig):
    p = config.params
    dist = OffspringDist.from_pmf(_parse_pmf(p["pmf"]))
    for t in p["t_grid"]:
        out = estimate_g(
            dist,
            t,
            p["k"],
            config.reps,
            seed=derive_u64(SeedSpec(config.seed, f"bp-gevent/{t}")),
            method=p["method"],
        )
        yield {
            "t": t,
            "k": p["k"],
            "p_hat": out["p_hat"],
            "ci_lo": out.get("ci_lo", ""),
            "ci_hi": out.get("ci_hi", ""),
            "survivors": out["survivors"],
            "method": out["method"],
        }


def run_brw_yaglom(config: ExperimentConfig):
    p = config.params
    stream = derive_stream(SeedSpec(config.seed, "brw-yaglom"))
    out = yaglom_brw(p["lam"], p["d"], p["t"], config.reps, stream)
    ranked = sorted(out["distribution"].items(), key=lambda kv: -kv[1])
    for enc, freq in ranked[: p["top"]]:
        yield {
            "encoding": repr(enc),
            "freq": freq,
            "survivors": out["survivors"],
            "t": p["t"],
            "lam": p["lam"],
        }


def run_tree_qsd(config: ExperimentConfig):
    p = config.params
    dist = OffspringDist.from_pmf(_parse_pmf(p["pmf"]))
    stream = derive_stream(SeedSpec(config.seed, "tree-qsd"))
    out = yaglom_trees(dist, p["t"], config.reps, stream)
    ranked = sorted(out["distribution"].items(), key=lambda kv: -kv[1])
    for enc, freq in ranked[: p["top"]]:
        yield {
            "encoding": repr(enc),
            "freq": freq,
            "survivors": out["survivors"],
            "t": p["t"],
        }


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def _ints(default):
    return ParamSpec(_int_list, default)


def _floats(default):
    return ParamSpec(_float_list, default)


def _f(default):
    return ParamSpec(float, default)


def _i(default):
    return ParamSpec(int, default)


def _s(default):
    return ParamSpec(str, default)


REGISTRY: dict[str, ExperimentSpec] = {
    spec.name: spec
    for spec in [
        ExperimentSpec(
            "arw-stabilize",
            ["n", "zeta", "lam", "rep", "jumps", "steps", "terminated"],
            run_arw_stabilize,
            {
                "n_grid": _ints([64]),
                "zeta_grid": _floats([0.5]),
                "lam": _f(1.0),
                "step_cap": _i(10**9),
            },
            default_reps=20,
        ),
        ExperimentSpec(
            "arw-phase",
            ["n", "zeta", "rep", "jumps", "log_jumps", "censored"],
            run_arw_phase,
            {
                "n_grid": _ints([32, 64, 128, 256]),
                "zeta_grid": _floats([0.2, 0.95]),
                "lam": _f(1.0),
                "step_cap": _i(3 * 10**6),
            },
            default_reps=200,
        ),
        ExperimentSpec(
            "arw-carpet",
            [
                "a", "n_blocks", "zeta", "lam", "rep", "modes", "jumps",
                "stabilized", "condition14_first_mode", "mass_balance_ok",
            ],
            run_arw_carpet,
            {
                "a": _i(2),
                "n_blocks_grid": _ints([8, 16]),
                "zeta_grid": _floats([0.8, 0.9375]),
                "lam": _f(1.0),
                "emission_cap": _i(10**5),
                "mode_cap": _i(100),
            },
            default_reps=10,
        ),
        ExperimentSpec(
            "cp-survival",
            ["lambda_i", "lambda_e", "t_max", "reps", "theta_hat", "ci_lo", "ci_hi", "starved"],
            run_cp_survival,
            {
                "lambda_i_grid": _floats([1.0, 1.6489, 2.5]),
                "lambda_e_grid": _floats([1.0, 1.6489, 2.5]),
                "t_max": _f(40.0),
            },
            default_reps=400,
        ),
        ExperimentSpec(
            "cp-edge",
            ["lambda_i", "lambda_e", "t_max", "speed", "se", "ci_lo", "ci_hi", "reps", "discarded"],
            run_cp_edge,
            {
                "lambda_grid": _floats([1.0, 1.4, 1.6, 1.8, 2.2, 2.5]),
                "lambda_e_offset": _f(0.0),
                "t_max": _f(60.0),
                "window": _i(200),
            },
            default_reps=300,
        ),
        ExperimentSpec(
            "cp-cylinder",
            ["t", "depth", "lambda_i", "lambda_e", "tv", "tv_se", "reps"],
            run_cp_cylinder,
            {
                "lambda_i": _f(1.6489),
                "lambda_e": _f(1.8489),
                "depth": _i(4),
                "t_grid": _floats([20.0, 200.0]),
            },
            default_reps=2000,
        ),
        ExperimentSpec(
            "bp-yaglom",
            ["state", "freq_mc", "nu_oracle", "survivors", "t"],
            run_bp_yaglom,
            {"pmf": _s(DEFAULT_PMF), "t": _f(15.0), "n_max": _i(200)},
            default_reps=10**6,
        ),
        ExperimentSpec(
            "bp-qprocess",
            ["state", "occupation", "target", "horizon"],
            run_bp_qprocess,
            {"pmf": _s(DEFAULT_PMF), "n_max": _i(200), "initial": _i(1), "horizon": _f(10**4)},
            default_reps=1,
        ),
        ExperimentSpec(
            "bp-gevent",
            ["t", "k", "p_hat", "ci_lo", "ci_hi", "survivors", "method"],
            run_bp_gevent,
            {
                "pmf": _s(DEFAULT_PMF),
                "k": _i(3),
                "t_grid": _floats([5.0, 10.0, 20.0, 40.0]),
                "method": _s("auto"),
            },
            default_reps=10**5,
        ),
        ExperimentSpec(
            "brw-yaglom",
            ["encoding", "freq", "survivors", "t", "lam"],
            run_brw_yaglom,
            {"lam": _f(0.5), "d": _i(1), "t": _f(3.0), "top": _i(30)},
            default_reps=10**4,
        ),
        ExperimentSpec(
            "tree-qsd",
            ["encoding", "freq", "survivors", "t"],
            run_tree_qsd,
            {"pmf": _s(DEFAULT_PMF), "t": _f(3.0), "top": _i(30)},
            default_reps=10**4,
        ),
    ]
}
