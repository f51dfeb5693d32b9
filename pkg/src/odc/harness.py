"""Experiment configuration, trace ingestion, orchestration and result files."""

from __future__ import annotations

import csv
import dataclasses
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .bandit import (ArmId, BanditState, REWARD_ARMS, action_probabilities, density_ordered_knapsack,
                     draw_arm, pull_count_bound, record_pull, regret_bound, ucb_index)
from .models import (DEFAULT_SLOT_SECONDS, HarvestProcess, VoISource, mah_to_charge, phase_schedule,
                     uniform_units, voi_from_window)
from .network import check_flow_conservation, common_activity_table, random_topology, run_network_episode
from .schedulers import (POLICIES, Costs, NodeConfig, SlotLog, check_energy_neutrality,
                         run_node_episode, total_voi)

OUTPUT_ENV = "ODC_OUTPUT_DIR"
BUNDLED_TRACE = "bundled"


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class TraceError(ValueError):
    """Malformed harvest/lux trace file."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    scenario: str = "single"            # single | network
    policies: tuple[str, ...] = POLICIES
    horizon: int = 200
    slot_seconds: float = DEFAULT_SLOT_SECONDS
    harvest: str = "units"              # phase | units | trace | markov
    harvest_mah: float = 1.0            # phase schedules: total energy
    phases: tuple[tuple[int, int], ...] = ((0, 10),)
    unit_energy: float = 20.0           # mA-slot per unit
    units: int = 180
    markov_levels: tuple[float, ...] = (0.0, 20.0, 40.0)
    markov_stay: float = 0.8
    trace: str = BUNDLED_TRACE
    voi: str = "gaussian"               # gaussian | trace
    voi_mean: float = 1.0
    voi_variance: float = 0.5
    voi_window: int = 10
    voi_bins: int = 8
    cost_sample: float = 19.0
    cost_receive: float = 20.0
    cost_transmit: float = 21.0
    cost_store: float = 0.0
    eta: float = 0.8
    solar_threshold: float = 20.0
    capacity_mah: float = 40.0
    e0_mah: float | None = None         # None: half capacity
    exploration_constant: float = 2.0
    step_size: float = 0.1
    trials: int = 100
    base_seed: int = 0
    output_dir: str = "results"
    node_counts: tuple[int, ...] = tuple(range(50, 1001, 50))
    area: float = 100.0
    radius: float = 50.0
    network_harvest: str = "units"      # phase | units

    def __post_init__(self):
        if self.scenario not in ("single", "network"):
            raise ConfigError(f"scenario must be 'single' or 'network', got {self.scenario!r}")
        bad = [p for p in self.policies if p not in POLICIES]
        if bad or not self.policies:
            raise ConfigError(f"unknown policy {bad[0] if bad else '(none)'}; choose from {POLICIES}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must lie in (0, 1]")
        if min(self.cost_sample, self.cost_receive, self.cost_transmit) <= 0 or self.cost_store < 0:
            raise ConfigError("costs must be positive (store cost may be 0)")
        if self.harvest not in ("phase", "units", "trace", "markov"):
            raise ConfigError(f"unknown harvest kind {self.harvest!r}")
        if self.voi not in ("gaussian", "trace"):
            raise ConfigError(f"unknown voi kind {self.voi!r}")
        if self.network_harvest not in ("phase", "units"):
            raise ConfigError("network_harvest must be 'phase' or 'units'")
        if self.capacity_mah <= 0:
            raise ConfigError("capacity_mah must be positive")
        if self.e0_mah is not None and not 0 <= self.e0_mah <= self.capacity_mah:
            raise ConfigError("e0_mah must lie in [0, capacity_mah]")

    @property
    def costs(self) -> Costs:
        return Costs(self.cost_sample, self.cost_receive, self.cost_transmit, self.cost_store)

    @property
    def capacity(self) -> float:
        return mah_to_charge(self.capacity_mah, self.slot_seconds)

    @property
    def initial_energy(self) -> float:
        if self.e0_mah is None:
            return self.capacity / 2.0
        return mah_to_charge(self.e0_mah, self.slot_seconds)

    def node_config(self) -> NodeConfig:
        return NodeConfig(costs=self.costs, charge_efficiency=self.eta, capacity=self.capacity,
                          initial_energy=self.initial_energy, solar_threshold=self.solar_threshold,
                          exploration_constant=self.exploration_constant, step_size=self.step_size)

    def output_path(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)


PRESETS: dict[str, dict] = {
    "exp1": dict(name="exp1", harvest="phase", phases=((0, 10),), horizon=200),
    "exp2": dict(name="exp2", harvest="phase", phases=((0, 5), (90, 95)), horizon=200),
    "exp3": dict(name="exp3", harvest="units", units=180, unit_energy=20.0, horizon=200),
    "exp4": dict(name="exp4", harvest="trace", voi="trace", trace=BUNDLED_TRACE, e0_mah=20.0,
                 horizon=1440),
    "density": dict(name="density", scenario="network", horizon=200, trials=5,
                    network_harvest="units"),
}


def _convert(raw: str, ftype, key: str):
    text = raw.strip()
    try:
        if ftype in ("int",):
            return int(text)
        if ftype in ("float",):
            return float(text)
        if ftype == "float | None":
            return None if text.lower() in ("", "none", "default") else float(text)
        if ftype == "tuple[str, ...]":
            return tuple(p.strip() for p in text.split(",") if p.strip())
        if ftype == "tuple[int, ...]":
            return tuple(int(p) for p in text.split(",") if p.strip())
        if ftype == "tuple[float, ...]":
            return tuple(float(p) for p in text.split(",") if p.strip())
        if ftype == "tuple[tuple[int, int], ...]":
            spans = []
            for part in text.split(","):
                lo, hi = part.split("-")
                spans.append((int(lo), int(hi)))
            return tuple(spans)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw.strip()!r}") from exc
    return text


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Build a config from flat ``key = value`` lines.

    ``#`` starts a comment. A ``preset`` key (exp1..exp4, density) supplies
    defaults that later keys override.
    """
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    preset = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key == "preset":
            if raw not in PRESETS:
                raise ConfigError(f"{source}:{lineno}: unknown preset {raw!r}; choose from {sorted(PRESETS)}")
            preset = raw
            continue
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _convert(raw, types[key], key)
    merged = {**PRESETS.get(preset, {}), **values}
    return ExperimentConfig(**merged)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), str(path))


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return ExperimentConfig(**{**PRESETS[name], **overrides})


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    slot: int
    harvest_ma: float
    lux: float


def bundled_trace_path() -> Path:
    return Path(str(resources.files("odc") / "data" / "solar_day.csv"))


def load_trace(path) -> list[TraceRecord]:
    """Read and validate a ``slot,harvest_ma,lux`` file."""
    path = bundled_trace_path() if str(path) == BUNDLED_TRACE else Path(path)
    if not path.is_file():
        raise TraceError(f"trace file not found: {path}")
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in ("slot", "harvest_ma", "lux") if c not in header]
        if missing:
            raise TraceError(f"{path}: missing column(s) {', '.join(missing)}")
        for row_no, row in enumerate(reader, start=2):
            try:
                slot = int(row["slot"])
                harvest = float(row["harvest_ma"])
                lux = float(row["lux"])
            except (TypeError, ValueError) as exc:
                raise TraceError(f"{path}: row {row_no}: unparseable value") from exc
            expected = len(records)
            if slot != expected:
                raise TraceError(f"{path}: row {row_no}: slot gap, expected slot {expected} got {slot}")
            if harvest < 0:
                raise TraceError(f"{path}: row {row_no}: negative harvest_ma {harvest}")
            if lux < 0:
                raise TraceError(f"{path}: row {row_no}: negative lux {lux}")
            records.append(TraceRecord(slot, harvest, lux))
    return records


def lux_to_voi(lux, window: int = 10, bins: int = 8) -> np.ndarray:
    """Per-slot VoI: divergence of the latest ``window`` readings from the window before."""
    lux = np.asarray(lux, dtype=float)
    out = np.zeros(len(lux))
    for t in range(len(lux)):
        observed = lux[max(0, t - window + 1):t + 1]
        reference = lux[max(0, t - 2 * window + 1):max(1, t - window + 1)]
        out[t] = voi_from_window(observed, reference, bins)
    return out


# ---------------------------------------------------------------------------
# Stream generation (common random numbers)
# ---------------------------------------------------------------------------


def _seeds(seed: int, n: int = 3) -> list[int]:
    return [int(x) for x in np.random.SeedSequence(seed).generate_state(n)]


def make_streams(config: ExperimentConfig, seed: int, horizon: int | None = None,
                 node: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Harvest power and datum VoI for one node in one trial."""
    horizon = config.horizon if horizon is None else horizon
    h_seed, v_seed, _ = _seeds(seed * 1_000_003 + node)
    kind = config.harvest if config.scenario == "single" else config.network_harvest
    if kind == "phase":
        energy = mah_to_charge(config.harvest_mah, config.slot_seconds)
        proc = phase_schedule(energy, config.phases, horizon, config.solar_threshold)
    elif kind == "units":
        proc = uniform_units(config.unit_energy, config.units, horizon, h_seed, config.solar_threshold)
    elif kind == "markov":
        n = len(config.markov_levels)
        move = (1.0 - config.markov_stay) / (n - 1) if n > 1 else 0.0
        P = tuple(tuple(config.markov_stay if i == j else move for j in range(n)) for i in range(n))
        proc = HarvestProcess("markov", levels=config.markov_levels, transition=P,
                              solar_threshold=config.solar_threshold, seed=h_seed)
    else:
        records = load_trace(config.trace)
        proc = HarvestProcess("trace", power=tuple(r.harvest_ma for r in records),
                              solar_threshold=config.solar_threshold)
    harvest = proc.stream(horizon)
    if config.voi == "trace":
        records = load_trace(config.trace)
        lux = [r.lux for r in records]
        voi = VoISource("trace", values=tuple(lux_to_voi(lux, config.voi_window, config.voi_bins)))
    else:
        voi = VoISource("gaussian", config.voi_mean, config.voi_variance, seed=v_seed)
    return harvest, voi.stream(horizon)


# ---------------------------------------------------------------------------
# Regret
# ---------------------------------------------------------------------------


@dataclass
class RegretReport:
    cumulative: dict[str, np.ndarray]
    regret: dict[str, np.ndarray]
    bound: np.ndarray
    deltas: dict[str, float]
    pull_counts: dict[str, tuple[int, float]] = field(default_factory=dict)


def compute_regret(policy_logs: list[SlotLog], coa_logs: list[SlotLog], costs: Costs = Costs(),
                   e_prime: float = 2.0, policy: str = "policy") -> RegretReport:
    """Regret of ``policy_logs`` against the oracle plus the theoretical envelope.

    Gaps are estimated after the fact: the oracle's VoI per unit energy minus
    each reward arm's observed VoI per unit energy in the policy log. The
    envelope at slot ``t`` uses the number of sunny slots so far.
    """
    if len(policy_logs) != len(coa_logs):
        raise ValueError(f"horizon mismatch: {len(policy_logs)} vs {len(coa_logs)} slots")
    cum_p = np.cumsum([log.sink_voi for log in policy_logs])
    cum_c = np.cumsum([log.sink_voi for log in coa_logs])
    spent = sum(log.energy_spent for log in coa_logs)
    best = cum_c[-1] / spent if len(coa_logs) and spent else 0.0
    deltas, pulls = {}, {}
    for arm in REWARD_ARMS:
        chosen = [log for log in policy_logs if log.arm == arm.label]
        mean = (sum(log.reward for log in chosen) / (len(chosen) * costs.of(arm))) if chosen else 0.0
        deltas[arm.label] = max(best - mean, 1e-6)
    cmax, cmin = max(costs.reward_costs), min(costs.reward_costs)
    sunny = np.maximum(np.cumsum([log.solar_state for log in policy_logs]), 1)
    gaps = list(deltas.values())
    bound = np.array([regret_bound(gaps, cmax, cmin, e_prime, float(n), best) for n in sunny]) \
        if len(policy_logs) else np.zeros(0)
    for arm in REWARD_ARMS:
        n = sum(log.arm == arm.label for log in policy_logs)
        pulls[arm.label] = (n, pull_count_bound(deltas[arm.label], cmax, cmin, e_prime, float(sunny[-1]))
                            if len(policy_logs) else 0.0)
    return RegretReport({policy: cum_p, "coa": cum_c}, {policy: cum_c - cum_p}, bound, deltas, pulls)


@dataclass
class StationaryRun:
    chosen: np.ndarray          # arm index per slot
    pseudo_regret: np.ndarray   # cumulative expected regret
    pulls: np.ndarray


def run_stationary_bandit(means, horizon: int, seed: int, costs=(1.0, 1.0, 1.0),
                          e_prime: float = 2.0) -> StationaryRun:
    """Bernoulli arms with fixed means; the budget admits exactly one pull per slot.

    The selection goes through the same index, knapsack and draw code as the
    node policy. Regret is measured against always pulling the best arm.
    """
    means = np.asarray(means, dtype=float)
    if means.shape != (3,):
        raise ValueError("need three arm means")
    rng = np.random.default_rng(seed)
    state = BanditState.from_costs(costs, e_prime)
    budget = max(costs)
    rewards = rng.random((horizon, 3)) < means
    chosen = np.empty(horizon, dtype=int)
    best = float(np.max(means / np.asarray(costs)))
    regret = np.empty(horizon)
    acc = 0.0
    arms = [state.arms[a] for a in REWARD_ARMS]
    for t in range(horizon):
        unpulled = [j for j, s in enumerate(arms) if s.pull_count == 0]
        if unpulled:
            j = unpulled[0]
        else:
            n = max(state.total_pulls, 1)
            idx = [ucb_index(s, n, e_prime) for s in arms]
            sel = density_ordered_knapsack(idx, costs, budget)
            j = int(draw_arm(action_probabilities(sel), rng))
        record_pull(state, ArmId(j), float(rewards[t, j]))
        chosen[t] = j
        acc += best - means[j] / costs[j]
        regret[t] = acc
    return StationaryRun(chosen, regret, np.bincount(chosen, minlength=3))


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    logs: dict[str, list[list[SlotLog]]] = field(default_factory=dict)
    totals: dict[str, list[float]] = field(default_factory=dict)
    summary: list[dict] = field(default_factory=list)
    density: list[dict] = field(default_factory=list)
    activity: list[tuple[int, int, float, float]] = field(default_factory=list)

    def mean_cumulative(self, policy: str) -> np.ndarray:
        runs = self.logs.get(policy, [])
        if not runs:
            return np.zeros(0)
        return np.mean([np.cumsum([log.sink_voi for log in run]) for run in runs], axis=0)

    def ordering_count(self) -> int:
        """Trials in which the oracle beats ODC and ODC beats SDC."""
        if not all(p in self.totals for p in ("coa", "odc", "sdc")):
            return 0
        return sum(c > o > s for c, o, s in zip(self.totals["coa"], self.totals["odc"], self.totals["sdc"]))


def run_experiment(config: ExperimentConfig, write: bool = True, keep_logs: bool = True) -> ExperimentResult:
    """Run every configured policy on identical per-trial streams.

    Trial ``i`` uses seed ``base_seed + i``. Nothing is written until every
    trial has finished.
    """
    result = ExperimentResult(config)
    if config.scenario == "network":
        _run_density(config, result)
    else:
        _run_single(config, result, keep_logs)
    if write:
        emit_plot_data(result, config.output_path() / config.name)
    return result


def _run_single(config: ExperimentConfig, result: ExperimentResult, keep_logs: bool) -> None:
    node_cfg = config.node_config()
    cache: dict = {}
    spent: dict[str, list[float]] = {p: [] for p in config.policies}
    regrets: dict[str, list[float]] = {p: [] for p in config.policies}
    for p in config.policies:
        result.logs[p] = []
        result.totals[p] = []
    for trial in range(config.trials):
        seed = config.base_seed + trial
        harvest, voi = make_streams(config, seed)
        policy_seed = _seeds(seed)[2]
        trial_logs = {}
        for p in config.policies:
            # coa and sdc ignore the seed, so identical streams give identical logs
            key = (p, harvest.tobytes(), voi.tobytes()) if p != "odc" else None
            if key is not None and key in cache:
                logs = cache[key]
            else:
                logs = run_node_episode(p, harvest, voi, config.horizon, policy_seed, node_cfg)
                check_energy_neutrality(logs, node_cfg.e0)
                if key is not None:
                    cache[key] = logs
            trial_logs[p] = logs
            result.totals[p].append(total_voi(logs))
            spent[p].append(sum(log.energy_spent for log in logs))
            if keep_logs:
                result.logs[p].append(logs)
        if "coa" in trial_logs:
            for p in config.policies:
                regrets[p].append(result.totals["coa"][-1] - result.totals[p][-1])
    for p in config.policies:
        totals = np.array(result.totals[p])
        energy = np.array(spent[p])
        result.summary.append({
            "policy": p,
            "trials": config.trials,
            "mean_total_voi": float(totals.mean()),
            "std_total_voi": float(totals.std()),
            "mean_energy_spent": float(energy.mean()),
            "energy_efficiency": float(totals.sum() / energy.sum()) if energy.sum() else 0.0,
            "mean_regret": float(np.mean(regrets[p])) if regrets[p] else float("nan"),
        })


def _run_density(config: ExperimentConfig, result: ExperimentResult) -> None:
    node_cfg = config.node_config()
    for n in config.node_counts:
        row = {"nodes": n}
        for p in config.policies:
            sink = []
            for trial in range(config.trials):
                seed = config.base_seed + trial
                topo = random_topology(n, seed * 7919 + n, config.area, config.radius)
                streams = [make_streams(config, seed, node=i) for i in range(topo.n_nodes)]
                harvest = np.array([s[0] for s in streams])
                voi = np.array([s[1] for s in streams])
                ep = run_network_episode(topo, p, harvest, voi, seed, node_cfg)
                check_flow_conservation(ep)
                sink.append(ep.sink_total)
                if p == "odc":
                    result.activity.extend(common_activity_table(ep))
            row[p] = float(np.mean(sink))
        result.density.append(row)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([_fmt(x) for x in row])


SUMMARY_FIELDS = ("policy", "trials", "mean_total_voi", "std_total_voi", "mean_energy_spent",
                  "energy_efficiency", "mean_regret")


def emit_plot_data(result: ExperimentResult, out_dir) -> list[Path]:
    """Write every result file into ``out_dir`` at once.

    Files are staged in a temporary sibling directory and moved into place,
    so an interrupted run leaves no partial output.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir.parent))
    try:
        policies = ("coa", "odc", "sdc")
        curves = {p: result.mean_cumulative(p) for p in policies}
        horizon = max((len(c) for c in curves.values()), default=0)
        rows = [[t] + [float(curves[p][t]) if len(curves[p]) else "" for p in policies]
                for t in range(horizon)]
        _write_csv(stage / "cumulative_voi.csv", ("slot",) + policies, rows)
        _write_csv(stage / "summary.csv", SUMMARY_FIELDS,
                   ([s[f] for f in SUMMARY_FIELDS] for s in result.summary))
        n_trials = max((len(v) for v in result.totals.values()), default=0)
        _write_csv(stage / "totals.csv", ("trial",) + policies,
                   ([i] + [result.totals[p][i] if p in result.totals else "" for p in policies]
                    for i in range(n_trials)))
        _write_csv(stage / "voi_vs_density.csv", ("nodes",) + policies,
                   ([r["nodes"]] + [r.get(p, "") for p in policies] for r in result.density))
        by_k: dict[int, list[tuple[float, float]]] = {}
        for _, k, emp, closed in result.activity:
            by_k.setdefault(k, []).append((emp, closed))
        _write_csv(stage / "common_activity.csv", ("neighbors", "nodes", "empirical", "closed_form"),
                   ([k, len(v), float(np.mean([e for e, _ in v])), float(np.mean([c for _, c in v]))]
                    for k, v in sorted(by_k.items())))
        if result.logs:
            trial_dir = stage / "trials"
            trial_dir.mkdir()
            for p, runs in result.logs.items():
                for i, logs in enumerate(runs):
                    _write_csv(trial_dir / f"trial{i:03d}_{p}.csv", SlotLog.FIELDS,
                               (log.row() for log in logs))
        if out_dir.exists():
            shutil.rmtree(out_dir)
        stage.rename(out_dir)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return sorted(out_dir.rglob("*.csv"))


def bound_table(deltas, c_max: float, c_min: float, e_prime: float, horizon_prime: float,
                best_mean: float = 1.0) -> list[tuple[str, float]]:
    """Pull-count bounds per gap plus the total regret envelope."""
    rows = [(f"pulls(delta={d:g})", pull_count_bound(d, c_max, c_min, e_prime, horizon_prime))
            for d in deltas]
    rows.append(("pulls(store)", pull_count_bound(min(deltas), c_max, c_min, e_prime, horizon_prime,
                                                   store_arm=True)))
    rows.append(("regret", regret_bound(deltas, c_max, c_min, e_prime, horizon_prime, best_mean)))
    return rows


__all__ = [
    "OUTPUT_ENV", "ConfigError", "TraceError", "ExperimentConfig", "PRESETS", "parse_config",
    "load_config", "preset", "TraceRecord", "load_trace", "lux_to_voi", "make_streams",
    "RegretReport", "compute_regret", "run_stationary_bandit", "ExperimentResult",
    "run_experiment", "emit_plot_data", "bound_table",
]
