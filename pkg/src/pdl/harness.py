"""Experiment orchestration: configs, statistics, CSV and manifest emission.

Config files are INI sections keyed by experiment name; every key is
validated against the experiment's declared parameters before any simulation
starts, and unknown keys are rejected.  Reruns with identical config and seed
produce byte-identical CSVs; every row carries the seed and the config hash
that produced it.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
import scipy.stats

from . import __version__
from .streams import master_seed_from_env


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    slope_se: float
    intercept_se: float


def linear_fit(xs, ys) -> FitResult:
    """Ordinary least squares y = slope*x + intercept."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size or xs.size < 2 or np.unique(xs).size < 2:
        raise ValueError("need >= 2 distinct x values")
    n = xs.size
    xm, ym = xs.mean(), ys.mean()
    sxx = float(((xs - xm) ** 2).sum())
    sxy = float(((xs - xm) * (ys - ym)).sum())
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = ys - (slope * xs + intercept)
    ss_res = float((resid**2).sum())
    ss_tot = float(((ys - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    sigma2 = ss_res / (n - 2) if n > 2 else 0.0
    slope_se = float(np.sqrt(sigma2 / sxx))
    intercept_se = float(np.sqrt(sigma2 * (1.0 / n + xm**2 / sxx)))
    return FitResult(slope, intercept, r2, slope_se, intercept_se)


def tv_distance(p, q) -> float:
    """Total variation distance between two normalized distributions.

    Accepts mappings keyed by any hashable encoding, or equal-length arrays.
    """
    if isinstance(p, dict) or isinstance(q, dict):
        keys = set(p) | set(q)
        pv = np.array([p.get(k, 0.0) for k in keys], dtype=np.float64)
        qv = np.array([q.get(k, 0.0) for k in keys], dtype=np.float64)
    else:
        pv = np.asarray(p, dtype=np.float64)
        qv = np.asarray(q, dtype=np.float64)
        if pv.shape != qv.shape:
            raise ValueError("distributions must share an encoding")
    for v in (pv, qv):
        if np.any(v < -1e-12) or abs(v.sum() - 1.0) > 1e-6:
            raise ValueError("inputs must be normalized distributions")
    return float(0.5 * np.abs(pv - qv).sum())


def binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval."""
    if not 0 <= successes <= trials or trials < 1:
        raise ValueError(f"invalid counts {successes}/{trials}")
    z = float(scipy.stats.norm.ppf(0.5 + level / 2))
    p = successes / trials
    denom = 1 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denom
    lo = 0.0 if successes == 0 else max(0.0, float(center - half))
    hi = 1.0 if successes == trials else min(1.0, float(center + half))
    return (lo, hi)


def empirical_distribution(samples: Iterable[Any]) -> dict:
    counts: dict[Any, int] = {}
    n = 0
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
        n += 1
    if n == 0:
        raise ValueError("no samples")
    return {k: c / n for k, c in counts.items()}


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ParamSpec:
    parse: Callable[[str], Any]
    default: Any
    doc: str = ""


def _int_list(s: str) -> list[int]:
    return [int(tok) for tok in s.replace(",", " ").split()]


def _float_list(s: str) -> list[float]:
    return [float(tok) for tok in s.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    reps: int
    out: Path
    threads: int = 1
    params: dict[str, Any] = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(
            {"name": self.name, "seed": self.seed, "reps": self.reps, "params": self.params},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def resolve_config(
    name: str,
    registry: dict,
    config_path: str | None = None,
    seed: int | None = None,
    out: str | None = None,
    reps: int | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Merge experiment defaults, the INI section, and CLI overrides."""
    if name not in registry:
        raise ConfigError(f"unknown experiment {name!r}; known: {sorted(registry)}")
    spec = registry[name]
    params = {k: p.default for k, p in spec.params.items()}
    file_seed = None
    file_reps = None
    file_out = None
    file_threads = None
    if config_path:
        parser = configparser.ConfigParser()
        read = parser.read(config_path)
        if not read:
            raise ConfigError(f"config file {config_path} not found")
        if parser.has_section(name):
            for key, raw in parser.items(name):
                if key == "seed":
                    file_seed = int(raw)
                elif key == "reps":
                    file_reps = int(raw)
                elif key == "out":
                    file_out = raw
                elif key == "threads":
                    file_threads = int(raw)
                elif key in spec.params:
                    try:
                        params[key] = spec.params[key].parse(raw)
                    except Exception as exc:
                        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
                else:
                    raise ConfigError(f"unknown key {key!r} for experiment {name}")
    final_seed = seed if seed is not None else (file_seed if file_seed is not None else 0)
    final_seed = master_seed_from_env(final_seed)
    final_reps = reps if reps is not None else (file_reps if file_reps is not None else spec.default_reps)
    if final_reps < 0:
        raise ConfigError("reps must be >= 0")
    final_out = Path(out if out is not None else (file_out if file_out is not None else "results"))
    final_threads = threads if threads is not None else (file_threads or 1)
    if final_threads < 1:
        raise ConfigError("threads must be >= 1")
    return ExperimentConfig(name, final_seed, final_reps, final_out, final_threads, params)


@dataclass
class ExperimentSpec:
    name: str
    header: list[str]
    runner: Callable[[ExperimentConfig], Iterable[dict]]
    params: dict[str, ParamSpec] = field(default_factory=dict)
    default_reps: int = 100
    doc: str = ""


def parallel_map(fn: Callable, tasks: list, threads: int) -> list:
    """Map tasks over a worker pool; results merge in task order regardless
    of scheduling, so output is schedule-independent."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_experiment(config: ExperimentConfig, registry: dict) -> dict:
    """Execute the experiment, streaming rows to CSV; returns a summary.

    Writes <out>/<name>.csv and <out>/manifest.json.  Rows may carry a
    private "_failed" flag, surfaced in the `ok` column and in the summary.
    """
    spec = registry[config.name]
    config.out.mkdir(parents=True, exist_ok=True)
    csv_path = config.out / f"{config.name}.csv"
    chash = config.config_hash()
    failed = 0
    rows = 0
    header = spec.header + ["seed", "config_hash", "ok"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in spec.runner(config):
            bad = bool(row.pop("_failed", False))
            failed += bad
            rows += 1
            writer.writerow([_fmt(row.get(col, "")) for col in spec.header] + [config.seed, chash, int(not bad)])
    manifest = {
        "experiment": config.name,
        "seed": config.seed,
        "reps": config.reps,
        "params": {k: str(v) for k, v in sorted(config.params.items())},
        "config_hash": chash,
        "rows": rows,
        "failed_rows": failed,
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    with open(config.out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": str(csv_path), "rows": rows, "failed": failed}
