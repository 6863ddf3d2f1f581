"""Seeded experiment runner: streams x algorithms x horizons x replicates.

A run regenerates (or loads and truncates) the stream for every horizon
and replicate, plays each configured algorithm round by round recording
both the exact expected payoff and a realized sampled payoff, computes
the requested offline baselines, and writes plot-ready artifacts: one
long-form CSV of per-round rows and one summary JSON with aggregates and
the fully resolved parameters.

Seeding: every (horizon, replicate) pair gets its own stream substream
and every (horizon, replicate, algorithm-label) its own algorithm
substream, derived from the master seed by hashing the coordinates, so
adding an algorithm never perturbs the draws of the others and paired
comparisons across algorithms share instance draws.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environments import GENERATORS, UtilityStream, build_stream
from .errors import ParameterError, ValidationError
from .forecasters import (
    FORECASTERS,
    ForecasterConfig,
    default_params_adaptive,
    default_params_shifted,
    default_params_sparse,
    make_forecaster,
)
from .oracles import (
    StreamTable,
    adaptive_regret,
    shifted_opt,
    sparse_shifted_opt,
    top_decile_recurrence,
)

__all__ = ["RunConfig", "RunArtifact", "run", "resolve_algorithm"]

_STREAM_ROLE = 1
_ALGORITHM_ROLE = 2

CSV_COLUMNS = [
    "algorithm", "T", "replicate", "t",
    "expected_payoff", "realized_payoff", "cum_expected",
    "opt_prefix", "avg_regret",
]


def _substream(master_seed: int, role: int, *coords) -> np.random.Generator:
    entropy = [int(master_seed), int(role)] + [int(c) for c in coords]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


@dataclass
class RunConfig:
    """Validated run description; see from_dict for the JSON schema."""

    stream: dict
    algorithms: list[dict]
    horizons: list[int]
    replicates: int = 1
    master_seed: int = 0
    baselines: dict = field(default_factory=lambda: {"s": 1})
    beta: float = 0.5
    H: float = 1.0
    jobs: int = 1
    record_top_decile: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ValidationError("run config must be a JSON object")
        problems = []
        stream = data.get("stream")
        if not isinstance(stream, dict) or not ({"generator", "file"} & stream.keys()):
            problems.append("stream: need an object with 'generator' or 'file'")
        elif "generator" in stream and stream["generator"] not in GENERATORS:
            problems.append(
                f"stream.generator: unknown {stream['generator']!r}; "
                f"choose from {sorted(GENERATORS)}")
        algorithms = data.get("algorithms")
        if not isinstance(algorithms, list) or not algorithms:
            problems.append("algorithms: need a nonempty list")
        else:
            labels = set()
            for i, alg in enumerate(algorithms):
                if not isinstance(alg, dict) or "name" not in alg:
                    problems.append(f"algorithms[{i}]: need an object with 'name'")
                    continue
                if alg["name"] not in FORECASTERS:
                    problems.append(
                        f"algorithms[{i}].name: unknown {alg['name']!r}; "
                        f"choose from {sorted(FORECASTERS)}")
                label = alg.get("label", alg["name"])
                if label in labels:
                    problems.append(f"algorithms[{i}]: duplicate label {label!r}")
                labels.add(label)
        horizons = data.get("horizons")
        if (not isinstance(horizons, list) or not horizons
                or not all(isinstance(T, int) and T >= 1 for T in horizons)):
            problems.append("horizons: need a nonempty list of positive integers")
        replicates = data.get("replicates", 1)
        if not (isinstance(replicates, int) and replicates >= 1):
            problems.append("replicates: need an integer >= 1")
        baselines = data.get("baselines", {"s": 1})
        if not (isinstance(baselines, dict) and isinstance(baselines.get("s"), int)):
            problems.append("baselines: need an object with integer 's'")
        if "file" in (stream or {}):
            path = Path(stream["file"])
            if not path.exists():
                problems.append(f"stream.file: {path} does not exist")
        if problems:
            raise ValidationError("invalid run config: " + "; ".join(problems))
        return cls(
            stream=stream,
            algorithms=algorithms,
            horizons=list(horizons),
            replicates=replicates,
            master_seed=int(data.get("master_seed", 0)),
            baselines=baselines,
            beta=float(data.get("beta", 0.5)),
            H=float(data.get("H", 1.0)),
            jobs=int(data.get("jobs", 1)),
            record_top_decile=bool(data.get("record_top_decile", False)),
        )

    def to_dict(self) -> dict:
        return {
            "stream": self.stream,
            "algorithms": self.algorithms,
            "horizons": self.horizons,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "baselines": self.baselines,
            "beta": self.beta,
            "H": self.H,
            "jobs": self.jobs,
            "record_top_decile": self.record_top_decile,
        }


def resolve_algorithm(alg: dict, T: int, H: float, default_beta: float) -> tuple[str, str, ForecasterConfig]:
    """Resolve one algorithm entry at horizon T to (label, name, config)."""
    name = alg["name"]
    label = alg.get("label", name)
    beta = float(alg.get("beta", default_beta))
    lam = alpha = gamma = None
    preset = alg.get("preset")
    if preset is not None:
        kind = preset.get("kind")
        if kind == "shifted":
            lam, alpha = default_params_shifted(T, int(preset["s"]), beta, H)
        elif kind == "sparse":
            lam, alpha, gamma = default_params_sparse(
                T, int(preset["s"]), int(preset["m"]), beta, H)
        elif kind == "adaptive":
            lam, alpha = default_params_adaptive(int(preset["tau"]), beta, H)
        elif kind == "static":
            lam, _ = default_params_shifted(T, 1, beta, H)
            alpha = 0.0
        elif kind == "recency":
            # The clustering-experiment preset: light uniform exploration and
            # discounting at rate 1/T, step size from the 2-shift tuning.
            lam, _ = default_params_shifted(T, 2, beta, H)
            alpha = 1.0 / T
            gamma = 1.0 / T
        else:
            raise ParameterError(f"unknown preset kind {kind!r} for {label}")
    params = alg.get("params", {})
    lam = float(params.get("lam", lam)) if params.get("lam", lam) is not None else None
    alpha = float(params.get("alpha", alpha if alpha is not None else 0.0))
    gamma = float(params.get("gamma", gamma if gamma is not None else 0.0))
    if lam is None:
        raise ParameterError(f"algorithm {label}: no step size (give a preset or params.lam)")
    if name == "exponential":
        alpha = 0.0
    cfg = ForecasterConfig(lam=lam, alpha=alpha, gamma=gamma, H=H, beta=beta)
    return label, name, cfg


def _make_stream(config: RunConfig, T: int, rep: int) -> UtilityStream:
    spec = config.stream
    if "file" in spec:
        stream = UtilityStream.load(spec["file"])
        if len(stream) < T:
            raise ValidationError(
                f"stream file has {len(stream)} rounds, horizon {T} requested")
        return stream.truncated(T)
    rng = _substream(config.master_seed, _STREAM_ROLE, T, rep)
    params = dict(spec.get("params", {}))
    return build_stream(spec["generator"], T, rng, **params)


def _run_task(config: RunConfig, T: int, rep: int) -> dict:
    """Everything for one (horizon, replicate): all algorithms plus baselines."""
    stream = _make_stream(config, T, rep)
    table = StreamTable(stream)
    s = int(config.baselines["s"])
    m = config.baselines.get("m")
    tau = config.baselines.get("tau")
    shifted = shifted_opt(table, min(s, T))
    sparse = sparse_shifted_opt(table, min(s, T), int(m)) if m is not None else None

    out = {"T": T, "replicate": rep, "opt_shifted": shifted.value,
           "opt_sparse": None if sparse is None else sparse.value,
           "algorithms": {}}
    for alg in config.algorithms:
        label, name, cfg = resolve_algorithm(alg, T, config.H, config.beta)
        seed = np.random.SeedSequence(
            [config.master_seed, _ALGORITHM_ROLE, T, rep, _label_key(label)]
        ).generate_state(1)[0]
        cfg = ForecasterConfig(
            lam=cfg.lam, alpha=cfg.alpha, gamma=cfg.gamma, H=cfg.H,
            beta=cfg.beta, seed=int(seed))
        forecaster = make_forecaster(name, cfg, horizon=T)
        expected = np.empty(T)
        realized = np.empty(T)
        densities = [] if (config.record_top_decile and name != "discrete_fixed_share") else None
        for t, u in enumerate(stream):
            rho = forecaster.act()
            realized[t] = u(rho)
            expected[t] = forecaster.expected_payoff(u)
            if densities is not None:
                densities.append(forecaster.density())
            forecaster.update(u)
        entry = {
            "label": label,
            "name": name,
            "resolved": {"lam": cfg.lam, "alpha": cfg.alpha, "gamma": cfg.gamma,
                         "beta": cfg.beta, "H": cfg.H, "seed": int(seed)},
            "expected": expected.tolist(),
            "realized": realized.tolist(),
        }
        if tau is not None:
            entry["adaptive_regret"] = adaptive_regret(table, expected, int(tau))
        if densities is not None:
            grid, counts = top_decile_recurrence(densities)
            entry["top_decile"] = {"breakpoints": grid.tolist(),
                                   "counts": counts.tolist()}
        out["algorithms"][label] = entry
    out["opt_prefix"] = shifted.prefix.tolist()
    return out


def _run_task_tuple(args) -> dict:
    config_dict, T, rep = args
    return _run_task(RunConfig.from_dict(config_dict), T, rep)


@dataclass
class RunArtifact:
    """In-memory results of a run; write() persists the CSV + JSON pair."""

    config: RunConfig
    tasks: list[dict]

    def rounds_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for task in self.tasks:
            T, rep = task["T"], task["replicate"]
            prefix = task["opt_prefix"]
            for label in sorted(task["algorithms"]):
                entry = task["algorithms"][label]
                cum = 0.0
                for t in range(T):
                    cum += entry["expected"][t]
                    writer.writerow([
                        label, T, rep, t + 1,
                        repr(entry["expected"][t]), repr(entry["realized"][t]),
                        repr(cum), repr(prefix[t]),
                        repr((prefix[t] - cum) / (t + 1)),
                    ])
        return buf.getvalue()

    def aggregates(self) -> dict:
        acc: dict[str, dict[int, dict[str, list[float]]]] = {}
        resolved: dict[str, dict[int, dict]] = {}
        for task in self.tasks:
            T = task["T"]
            for label, entry in task["algorithms"].items():
                total = float(np.sum(entry["expected"]))
                stats = acc.setdefault(label, {}).setdefault(
                    T, {"avg_regret": [], "final_regret": [], "sparse_avg_regret": [],
                        "realized_avg_regret": []})
                stats["final_regret"].append(task["opt_shifted"] - total)
                stats["avg_regret"].append((task["opt_shifted"] - total) / T)
                stats["realized_avg_regret"].append(
                    (task["opt_shifted"] - float(np.sum(entry["realized"]))) / T)
                if task["opt_sparse"] is not None:
                    stats["sparse_avg_regret"].append(
                        (task["opt_sparse"] - total) / T)
                resolved.setdefault(label, {})[T] = entry["resolved"]
        out: dict = {}
        for label, per_t in acc.items():
            out[label] = {}
            for T, stats in sorted(per_t.items()):
                summary = {}
                for key, vals in stats.items():
                    if not vals:
                        continue
                    arr = np.asarray(vals)
                    summary[f"mean_{key}"] = float(arr.mean())
                    summary[f"stderr_{key}"] = (
                        float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0)
                summary["replicates"] = len(stats["avg_regret"])
                summary["resolved"] = resolved[label][T]
                out[label][str(T)] = summary
        return out

    def curves(self) -> dict:
        """Per-round average-regret curves: mean and standard error across
        replicates, per algorithm and horizon."""
        acc: dict[str, dict[int, list[np.ndarray]]] = {}
        for task in self.tasks:
            T = task["T"]
            prefix = np.asarray(task["opt_prefix"])
            t_axis = np.arange(1, T + 1)
            for label, entry in task["algorithms"].items():
                cum = np.cumsum(entry["expected"])
                acc.setdefault(label, {}).setdefault(T, []).append(
                    (prefix - cum) / t_axis)
        out: dict = {}
        for label, per_t in acc.items():
            out[label] = {}
            for T, rows in sorted(per_t.items()):
                stacked = np.stack(rows)
                mean = stacked.mean(axis=0)
                stderr = (stacked.std(axis=0, ddof=1) / math.sqrt(stacked.shape[0])
                          if stacked.shape[0] > 1 else np.zeros_like(mean))
                out[label][str(T)] = {
                    "t": list(range(1, T + 1)),
                    "mean_avg_regret": mean.tolist(),
                    "stderr_avg_regret": stderr.tolist(),
                }
        return out

    def summary(self) -> dict:
        baselines = {}
        for task in self.tasks:
            entry = baselines.setdefault(str(task["T"]), {"opt_shifted": [], "opt_sparse": []})
            entry["opt_shifted"].append(task["opt_shifted"])
            if task["opt_sparse"] is not None:
                entry["opt_sparse"].append(task["opt_sparse"])
        for entry in baselines.values():
            entry["opt_shifted_mean"] = float(np.mean(entry.pop("opt_shifted")))
            sparse = entry.pop("opt_sparse")
            if sparse:
                entry["opt_sparse_mean"] = float(np.mean(sparse))
        return {
            "config": self.config.to_dict(),
            "aggregates": self.aggregates(),
            "curves": self.curves(),
            "baselines": baselines,
        }

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "rounds.csv"
        csv_path.write_text(self.rounds_csv())
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(self.summary(), sort_keys=True, indent=1))
        return {"rounds": csv_path, "summary": summary_path}


def run(config: RunConfig, out_dir=None) -> RunArtifact:
    """Execute the full grid; deterministic given the config and master seed."""
    coords = [(T, rep) for T in config.horizons for rep in range(config.replicates)]
    if config.jobs > 1:
        payload = config.to_dict()
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            tasks = list(pool.map(_run_task_tuple,
                                  [(payload, T, rep) for T, rep in coords]))
    else:
        tasks = [_run_task(config, T, rep) for T, rep in coords]
    tasks.sort(key=lambda task: (task["T"], task["replicate"]))
    artifact = RunArtifact(config, tasks)
    if out_dir is not None:
        artifact.write(out_dir)
    return artifact
