"""Per-node duty-cycling policies and the single-node episode driver.

Three policies share one energy model:

* ``odc`` -- online bandit with the adaptive VoI threshold,
* ``coa`` -- offline oracle planned by dynamic programming with full trace
  knowledge and lossless storage,
* ``sdc`` -- a fixed duty cycle computed in advance from the predicted
  harvest.

Energy model. In a slot whose harvest reaches the solar threshold (S=1) an
action is powered by the harvest first; any shortfall comes from the battery
and any surplus is discarded. With S=0 the full cost comes from the battery
and the sub-threshold harvest is lost. Storing is possible only when S=1 and
banks ``eta * e_h``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .ava import DEFAULT_STEP_SIZE, DEFAULT_THETA0, ControllerState, ava_step
from .bandit import (DEFAULT_E_PRIME, REWARD_ARMS, ArmId, BanditState, action_probabilities,
                     density_ordered_knapsack, draw_arm, record_pull, ucb_index)
from .models import DEFAULT_CAPACITY_MAH, Battery, draw_energy, mah_to_charge, store_energy

POLICIES = ("odc", "coa", "sdc")
DEFAULT_CAPACITY = mah_to_charge(DEFAULT_CAPACITY_MAH)


@dataclass(frozen=True)
class Costs:
    """Energy per pull of each arm, in mA-slot."""

    sample: float = 19.0
    receive: float = 20.0
    transmit: float = 21.0
    store: float = 0.0

    def __post_init__(self):
        if min(self.sample, self.receive, self.transmit) <= 0:
            raise ValueError("sample, receive and transmit costs must be positive")
        if self.store < 0:
            raise ValueError("store cost must be non-negative")

    def of(self, arm: ArmId) -> float:
        return (self.sample, self.receive, self.transmit, self.store)[int(arm)]

    @property
    def reward_costs(self) -> tuple[float, float, float]:
        return (self.sample, self.receive, self.transmit)


@dataclass(frozen=True)
class NodeConfig:
    costs: Costs = Costs()
    charge_efficiency: float = 0.8
    capacity: float = DEFAULT_CAPACITY
    initial_energy: float | None = None
    solar_threshold: float = 20.0
    exploration_constant: float = DEFAULT_E_PRIME
    step_size: float = DEFAULT_STEP_SIZE
    theta0: tuple[float, float, float] = DEFAULT_THETA0
    can_receive: bool = False
    fixed_threshold: float | None = None

    @property
    def e0(self) -> float:
        return self.capacity / 2.0 if self.initial_energy is None else float(self.initial_energy)


@dataclass
class SlotLog:
    """Everything that happened at one node in one slot."""

    slot: int
    arm: str
    harvest: float
    solar_state: int
    available_voi: float
    energy_spent: float = 0.0
    energy_direct: float = 0.0
    energy_from_battery: float = 0.0
    energy_stored: float = 0.0
    energy_wasted: float = 0.0
    battery: float = 0.0
    reward: float = 0.0
    sink_voi: float = 0.0
    sampled_voi: float = 0.0
    received_voi: float = 0.0
    transmitted_voi: float = 0.0
    threshold: float = 0.0
    backlog_voi: float = 0.0
    backlog_len: int = 0

    FIELDS = ("slot", "arm", "harvest", "solar_state", "available_voi", "energy_spent",
              "energy_direct", "energy_from_battery", "energy_stored", "energy_wasted",
              "battery", "reward", "sink_voi", "sampled_voi", "received_voi",
              "transmitted_voi", "threshold", "backlog_voi", "backlog_len")

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class SlotDecision:
    arm: ArmId
    energy_spent: float = 0.0
    energy_stored: float = 0.0
    reward: float = 0.0
    threshold_at_decision: float = 0.0


@dataclass
class NodeState:
    """Mutable state of one sensor node."""

    battery: Battery
    config: NodeConfig
    bandit: BanditState
    controller: ControllerState
    rng: np.random.Generator
    backlog: list[float] = field(default_factory=list)
    threshold: float = 0.0
    last_consumption: float = 0.0

    @classmethod
    def create(cls, config: NodeConfig = NodeConfig(), seed=0, eta: float | None = None) -> "NodeState":
        eta = config.charge_efficiency if eta is None else eta
        battery = Battery(min(config.e0, config.capacity), config.capacity, eta)
        bandit = BanditState.from_costs(config.costs.reward_costs, config.exploration_constant)
        controller = ControllerState(step_size=config.step_size, theta0=tuple(config.theta0))
        return cls(battery, config, bandit, controller, np.random.default_rng(seed))

    @property
    def costs(self) -> Costs:
        return self.config.costs

    @property
    def backlog_voi(self) -> float:
        return float(sum(self.backlog))

    def budget(self, e_h: float, s: int) -> float:
        return self.battery.level + s * e_h

    def affordable(self, arm: ArmId, e_h: float, s: int) -> bool:
        return self.costs.of(arm) <= self.budget(e_h, s) + 1e-9

    def available_arms(self) -> list[ArmId]:
        arms = [ArmId.SAMPLE]
        if self.config.can_receive:
            arms.append(ArmId.RECEIVE)
        if self.backlog:
            arms.append(ArmId.TRANSMIT)
        return arms

    def pop_best_packet(self) -> float:
        i = int(np.argmax(self.backlog))
        return self.backlog.pop(i)


# ---------------------------------------------------------------------------
# Energy accounting shared by every policy
# ---------------------------------------------------------------------------


def execute_energy(node: NodeState, arm: ArmId, e_h: float, s: int, log: SlotLog) -> ArmId:
    """Move energy for ``arm`` and fill the energy fields of ``log``.

    Returns the arm actually executed: an unaffordable action degrades to
    store (S=1) or idle-sleep (S=0, logged as store with zero gain).
    """
    if arm != ArmId.STORE and not node.affordable(arm, e_h, s):
        arm = ArmId.STORE
    if arm == ArmId.STORE:
        if s:
            before = node.battery
            node.battery = store_energy(before, e_h)
            log.energy_stored = node.battery.level - before.level
            log.energy_wasted = node.battery.wasted - before.wasted + (1 - before.charge_efficiency) * e_h
        else:
            log.energy_wasted = e_h
        log.energy_spent = node.costs.store if s else 0.0
        return arm
    cost = node.costs.of(arm)
    direct = min(cost, e_h) if s else 0.0
    from_battery = cost - direct
    node.battery = draw_energy(node.battery, from_battery)
    log.energy_spent = cost
    log.energy_direct = direct
    log.energy_from_battery = from_battery
    log.energy_wasted = e_h - direct
    return arm


# ---------------------------------------------------------------------------
# ODC
# ---------------------------------------------------------------------------


def odc_choose(node: NodeState, e_h: float, s: int) -> tuple[ArmId, float]:
    """Pick this slot's arm; returns ``(arm, threshold_in_force)``.

    The threshold in force was issued by the controller at the end of the
    previous slot (0 before the first slot).
    """
    threshold = node.threshold if node.config.fixed_threshold is None else node.config.fixed_threshold
    if node.bandit.best_estimate < threshold:
        return ArmId.STORE, threshold
    budget = node.budget(e_h, s)
    available = node.available_arms()
    for arm in available:
        if node.bandit.arms[arm].pull_count == 0 and node.costs.of(arm) <= budget + 1e-9:
            return arm, threshold
    indices, costs = [], []
    for arm in REWARD_ARMS:
        costs.append(node.costs.of(arm))
        if arm in available:
            indices.append(ucb_index(node.bandit.arms[arm], max(node.bandit.total_pulls, 1),
                                     node.bandit.exploration_constant))
        else:
            indices.append(-math.inf)
    selection = density_ordered_knapsack(indices, costs, budget + 1e-9)
    return draw_arm(action_probabilities(selection), node.rng), threshold


def settle(node: NodeState, arm: ArmId, reward: float, log: SlotLog, adapt: bool = False) -> None:
    """Book the reward and close the slot.

    With ``adapt`` the threshold controller observes this slot's harvest,
    consumption and remaining energy and issues next slot's threshold.
    """
    record_pull(node.bandit, arm, reward)
    node.last_consumption = log.energy_spent
    if adapt:
        node.threshold = ava_step(node.controller, log.harvest, log.energy_spent, node.battery.level)
    log.reward = reward
    log.battery = node.battery.level
    log.backlog_voi = node.backlog_voi
    log.backlog_len = len(node.backlog)


def odc_step(node: NodeState, e_h: float, s: int, available_voi: float, slot: int = 0,
             parent_receiving: bool = True) -> tuple[SlotDecision, SlotLog]:
    """One ODC slot for a node whose parent is the always-listening sink.

    Network simulations split this into :func:`odc_choose`, energy
    execution and settlement so transfers can be resolved between nodes.
    """
    log = SlotLog(slot, "", e_h, s, available_voi)
    arm, threshold = odc_choose(node, e_h, s)
    log.threshold = threshold
    arm = execute_energy(node, arm, e_h, s, log)
    reward = apply_local_reward(node, arm, available_voi, log, parent_receiving)
    log.arm = arm.label
    settle(node, arm, reward, log, adapt=True)
    return SlotDecision(arm, log.energy_spent, log.energy_stored, reward, threshold), log


def apply_local_reward(node: NodeState, arm: ArmId, available_voi: float, log: SlotLog,
                       parent_receiving: bool = True) -> float:
    """Reward of ``arm`` when no other node is involved (sink-adjacent node)."""
    if arm == ArmId.SAMPLE:
        node.backlog.append(available_voi)
        log.sampled_voi = available_voi
        return available_voi
    if arm == ArmId.TRANSMIT:
        packet = node.pop_best_packet()
        if parent_receiving:
            log.transmitted_voi = packet
            log.sink_voi = packet
            return packet
        node.backlog.append(packet)
        return 0.0
    return 0.0


# ---------------------------------------------------------------------------
# COA
# ---------------------------------------------------------------------------


def coa_schedule(harvest, voi, costs: Costs = Costs(), horizon: int | None = None, *,
                 capacity: float = DEFAULT_CAPACITY, initial_energy: float = 0.0,
                 solar_threshold: float = 20.0, charge_efficiency: float = 1.0,
                 quantum: float = 1.0, max_pending: int = 16, mode: str = "relay",
                 process_cost: float | None = None, forced_receive=None,
                 blocked_transmit=None) -> list[str]:
    """Offline VoI-maximising action plan by dynamic programming.

    The state is ``(slot, stored energy on a grid of width quantum, packets
    awaiting transmission)``. Harvest is rounded down and costs up, so a plan
    is always feasible under the exact energy model.

    ``mode="relay"`` plans sample/transmit pairs; a sample earns the datum's
    VoI and commits the node to transmit it before the horizon ends.
    ``mode="process"`` collapses sensing and delivery into one ``process``
    action costing ``process_cost``.

    ``forced_receive`` maps slot -> incoming packet VoI for slots in which a
    child is planned to transmit; the node may receive it there.
    ``blocked_transmit`` is a set of slots in which this node may not
    transmit.

    Returns a list of action labels, one per slot.
    """
    harvest = np.asarray(harvest, dtype=float)
    voi = np.asarray(voi, dtype=float)
    horizon = len(harvest) if horizon is None else int(horizon)
    if horizon == 0:
        return []
    if len(harvest) < horizon or len(voi) < horizon:
        raise ValueError("traces shorter than the horizon")
    if mode not in ("relay", "process"):
        raise ValueError(f"unknown COA mode {mode!r}")
    step_costs = [costs.sample, costs.transmit, costs.receive]
    if mode == "process":
        process_cost = costs.sample if process_cost is None else process_cost
        step_costs = [process_cost]
    if quantum <= 0 or quantum > min(step_costs):
        raise ValueError("quantization step must be positive and no larger than any cost")
    forced_receive = dict(forced_receive or {})
    blocked_transmit = set(blocked_transmit or ())

    def up(x):
        return int(math.ceil(x / quantum - 1e-9))

    def down(x):
        return int(math.floor(x / quantum + 1e-9))

    m = down(capacity) + 1
    k_cap = 0 if mode == "process" else int(max_pending)
    e0 = min(down(initial_energy), m - 1)
    s = (harvest[:horizon] >= solar_threshold).astype(int)
    e_grid = np.arange(m)

    # action codes, in tie-break preference order
    STORE, IDLE, TRANSMIT, RECEIVE, SAMPLE = range(5)
    labels = {STORE: "store", IDLE: "idle", TRANSMIT: "transmit", RECEIVE: "receive",
              SAMPLE: "process" if mode == "process" else "sample"}

    neg = -np.inf
    value = np.full((k_cap + 1, m), neg)
    value[0, :] = 0.0
    choice = np.empty((horizon, k_cap + 1, m), dtype=np.int8)

    def shifted(v_next, drain, k_shift, reward):
        # value of paying `drain` grid units from the battery and moving k by k_shift
        out = np.full_like(v_next, neg)
        if drain >= m:
            return out
        ks = slice(max(0, -k_shift), k_cap + 1 - max(0, k_shift))
        kd = slice(max(0, k_shift), k_cap + 1 - max(0, -k_shift))
        if ks.start >= ks.stop:
            return out
        out[ks, drain:] = v_next[kd, :m - drain] + reward
        return out

    for t in range(horizon - 1, -1, -1):
        e_q = down(harvest[t]) if s[t] else 0
        cands = {IDLE: value}
        if s[t]:
            gain = down(charge_efficiency * harvest[t])
            cands[STORE] = value[:, np.minimum(e_grid + gain, m - 1)]
        if mode == "process":
            cands[SAMPLE] = shifted(value, max(0, up(process_cost) - e_q), 0, voi[t])
        else:
            cands[SAMPLE] = shifted(value, max(0, up(costs.sample) - e_q), 1, voi[t])
            if t not in blocked_transmit:
                cands[TRANSMIT] = shifted(value, max(0, up(costs.transmit) - e_q), -1, 0.0)
            if t in forced_receive:
                cands[RECEIVE] = shifted(value, max(0, up(costs.receive) - e_q), 1,
                                         float(forced_receive[t]))
        # strict comparison in code order keeps the earlier action on ties
        best = np.full_like(value, neg)
        pick = np.full(value.shape, IDLE, dtype=np.int8)
        for code in sorted(cands):
            better = cands[code] > best
            best = np.where(better, cands[code], best)
            pick[better] = code
        choice[t] = pick
        value = best

    plan = []
    k, e = 0, e0
    for t in range(horizon):
        a = int(choice[t, k, e])
        e_q = down(harvest[t]) if s[t] else 0
        if a == STORE:
            e = min(e + down(charge_efficiency * harvest[t]), m - 1)
        elif a == SAMPLE:
            e -= max(0, up(process_cost if mode == "process" else costs.sample) - e_q)
            k += 0 if mode == "process" else 1
        elif a == TRANSMIT:
            e -= max(0, up(costs.transmit) - e_q)
            k -= 1
        elif a == RECEIVE:
            e -= max(0, up(costs.receive) - e_q)
            k += 1
        plan.append(labels[a])
    return plan


def plan_value(plan, voi) -> float:
    """VoI a relay/process plan delivers when every sample is transmitted."""
    return float(sum(v for a, v in zip(plan, voi) if a in ("sample", "process")))


def simulate_plan(plan, harvest, voi, costs: Costs = Costs(), *, capacity: float = DEFAULT_CAPACITY,
                  initial_energy: float = 0.0, solar_threshold: float = 20.0,
                  charge_efficiency: float = 1.0, process_cost: float | None = None) -> dict:
    """Replay ``plan`` under the exact energy model.

    Returns delivered VoI, consumption split and the energy-efficiency
    figure. Efficiency is VoI over the energy committed to processing:
    harvest consumed directly plus every charge banked before the last
    battery draw. Charge that is banked and never drawn does not count.
    """
    battery = float(initial_energy)
    backlog: list[float] = []
    delivered = direct_total = 0.0
    stored_events: list[float] = []
    committed_stored = 0.0
    for t, action in enumerate(plan):
        e_h = float(harvest[t])
        s = int(e_h >= solar_threshold)
        if action == "store":
            if s:
                gained = min(charge_efficiency * e_h, capacity - battery)
                battery += gained
                stored_events.append(gained)
            continue
        if action == "idle":
            continue
        if action == "process":
            cost = costs.sample if process_cost is None else process_cost
        else:
            cost = {"sample": costs.sample, "transmit": costs.transmit,
                    "receive": costs.receive}[action]
        direct = min(cost, e_h) if s else 0.0
        from_battery = cost - direct
        if from_battery > battery + 1e-9:
            raise ValueError(f"plan infeasible at slot {t}: needs {from_battery}, battery {battery}")
        battery -= from_battery
        direct_total += direct
        if from_battery > 0:
            committed_stored += sum(stored_events)
            stored_events = []
        if action == "process":
            delivered += float(voi[t])
        elif action == "sample":
            backlog.append(float(voi[t]))
        elif action == "transmit" and backlog:
            delivered += backlog.pop(int(np.argmax(backlog)))
    energy = direct_total + committed_stored
    return {"voi": delivered, "direct": direct_total, "stored_used": committed_stored,
            "battery": battery, "efficiency": delivered / energy if energy else 0.0}


def brute_force_coa(harvest, voi, costs: Costs = Costs(), *, capacity: float = DEFAULT_CAPACITY,
                    initial_energy: float = 0.0, solar_threshold: float = 20.0,
                    charge_efficiency: float = 1.0, mode: str = "relay",
                    process_cost: float | None = None) -> float:
    """Best delivered VoI over every action sequence (exponential; tiny horizons)."""
    actions = ("store", "idle", "process") if mode == "process" else \
        ("store", "idle", "sample", "transmit")
    best = 0.0
    for plan in itertools.product(actions, repeat=len(harvest)):
        try:
            out = simulate_plan(plan, harvest, voi, costs, capacity=capacity,
                                initial_energy=initial_energy, solar_threshold=solar_threshold,
                                charge_efficiency=charge_efficiency, process_cost=process_cost)
        except ValueError:
            continue
        best = max(best, out["voi"])
    return best


# ---------------------------------------------------------------------------
# SDC
# ---------------------------------------------------------------------------


def sdc_duty_cycle(predicted_total_harvest: float, average_cost: float, horizon: int,
                   charge_efficiency: float = 0.8) -> float:
    if average_cost <= 0:
        raise ValueError("average_cost must be positive")
    if horizon <= 0 or predicted_total_harvest <= 0:
        return 0.0
    return min(1.0, charge_efficiency * predicted_total_harvest / (horizon * average_cost))


def sdc_schedule(predicted_total_harvest: float, average_cost: float, horizon: int,
                 charge_efficiency: float = 0.8) -> list[int]:
    """Active slots of a fixed duty cycle spread evenly over the horizon.

    Slot ``t`` is active when ``floor((t + 1) d)`` steps past ``floor(t d)``,
    which places exactly ``floor(horizon * d)`` active slots at spacing
    ``1 / d``.
    """
    d = sdc_duty_cycle(predicted_total_harvest, average_cost, horizon, charge_efficiency)
    return [t for t in range(horizon) if math.floor((t + 1) * d + 1e-12) > math.floor(t * d + 1e-12)]


# ---------------------------------------------------------------------------
# Episode driver
# ---------------------------------------------------------------------------


def run_node_episode(policy: str, harvest, voi, horizon: int | None = None, seed: int = 0,
                     config: NodeConfig = NodeConfig(), coa_options: dict | None = None) -> list[SlotLog]:
    """Drive one policy at a single sink-adjacent node.

    ``harvest`` and ``voi`` are per-slot arrays (power in mA, VoI of the
    sampleable datum). COA stores losslessly; the other policies use the
    configured charge efficiency.
    """
    harvest = np.asarray(harvest, dtype=float)
    voi = np.asarray(voi, dtype=float)
    horizon = len(harvest) if horizon is None else int(horizon)
    if len(harvest) < horizon or len(voi) < horizon:
        raise ValueError(f"streams shorter than horizon {horizon}")
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    th = config.solar_threshold
    if policy == "odc":
        node = NodeState.create(config, seed)
        logs = []
        for t in range(horizon):
            s = int(harvest[t] >= th)
            _, log = odc_step(node, float(harvest[t]), s, float(voi[t]), t)
            logs.append(log)
        return logs

    eta = 1.0 if policy == "coa" else config.charge_efficiency
    node = NodeState.create(config, seed, eta=eta)
    if policy == "coa":
        opts = dict(coa_options or {})
        plan = coa_schedule(harvest[:horizon], voi[:horizon], config.costs, horizon,
                            capacity=config.capacity, initial_energy=config.e0,
                            solar_threshold=th, charge_efficiency=1.0, **opts)
        arms = [_label_to_arm(a) for a in plan]
    else:
        avg = (config.costs.sample + config.costs.transmit) / 2.0
        active = set(sdc_schedule(float(harvest[:horizon].sum()), avg, horizon,
                                  config.charge_efficiency))
        arms = None
    logs = []
    last_active = ArmId.TRANSMIT
    for t in range(horizon):
        e_h = float(harvest[t])
        s = int(e_h >= th)
        log = SlotLog(slot=t, arm="", harvest=e_h, solar_state=s, available_voi=float(voi[t]))
        if arms is not None:
            arm = arms[t]
            if arm == ArmId.TRANSMIT and not node.backlog:
                arm = ArmId.STORE
        elif t in active:
            if node.backlog and last_active == ArmId.SAMPLE:
                arm = ArmId.TRANSMIT
            else:
                arm = ArmId.SAMPLE
            if node.affordable(arm, e_h, s):
                last_active = arm
        else:
            arm = ArmId.STORE
        arm = execute_energy(node, arm, e_h, s, log)
        reward = apply_local_reward(node, arm, float(voi[t]), log)
        log.arm = arm.label
        settle(node, arm, reward, log)
        logs.append(log)
    return logs


def _label_to_arm(label: str) -> ArmId:
    return {"sample": ArmId.SAMPLE, "process": ArmId.SAMPLE, "receive": ArmId.RECEIVE,
            "transmit": ArmId.TRANSMIT, "store": ArmId.STORE, "idle": ArmId.STORE}[label]


def total_voi(logs) -> float:
    return float(sum(log.sink_voi for log in logs))


def check_energy_neutrality(logs, initial_energy: float, tol: float = 1e-6) -> None:
    """Raise if any prefix consumes more than initial, stored and directly used energy."""
    spent = stored = direct = 0.0
    for log in logs:
        spent += log.energy_spent
        stored += log.energy_stored
        direct += log.energy_direct
        if spent > initial_energy + stored + direct + tol:
            raise AssertionError(f"energy neutrality violated at slot {log.slot}")
        if log.battery < -tol:
            raise AssertionError(f"negative battery at slot {log.slot}")
        if log.arm == "store" and log.energy_stored > 0 and not log.solar_state:
            raise AssertionError(f"energy stored without sun at slot {log.slot}")


# ---------------------------------------------------------------------------
# Estimator wrappers
# ---------------------------------------------------------------------------


def _check_trace(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_min_samples=0)
    if X.shape[1] != 2:
        raise ValueError("expected two columns: harvested power (mA) and datum VoI")
    if np.any(X < 0):
        raise ValueError("harvest and VoI must be non-negative")
    return X


class _SchedulerBase(BaseEstimator):
    """Shared fit/predict/score surface; ``X`` columns are (harvest_ma, voi)."""

    policy = None

    def _node_config(self) -> NodeConfig:
        return NodeConfig(costs=Costs(*self.costs) if not isinstance(self.costs, Costs) else self.costs,
                          charge_efficiency=self.charge_efficiency, capacity=self.capacity,
                          initial_energy=self.initial_energy, solar_threshold=self.solar_threshold)

    def _run(self, X):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = _check_trace(X)
        self.n_features_in_ = 2
        self.log_ = self._run(X)
        self.actions_ = np.array([log.arm for log in self.log_], dtype=object)
        self.total_voi_ = total_voi(self.log_)
        spent = sum(log.energy_spent for log in self.log_)
        self.energy_efficiency_ = self.total_voi_ / spent if spent else 0.0
        return self

    def predict(self, X):
        """Action label per slot for the trace ``X``."""
        return self.fit(X).actions_

    def score(self, X, y=None):
        """Total VoI delivered to the sink."""
        return self.fit(X).total_voi_


class ODCScheduler(_SchedulerBase):
    policy = "odc"

    def __init__(self, costs=Costs(), charge_efficiency=0.8, capacity=DEFAULT_CAPACITY,
                 initial_energy=None, solar_threshold=20.0, exploration_constant=DEFAULT_E_PRIME,
                 step_size=DEFAULT_STEP_SIZE, theta0=DEFAULT_THETA0, random_state=0):
        self.costs = costs
        self.charge_efficiency = charge_efficiency
        self.capacity = capacity
        self.initial_energy = initial_energy
        self.solar_threshold = solar_threshold
        self.exploration_constant = exploration_constant
        self.step_size = step_size
        self.theta0 = theta0
        self.random_state = random_state

    def _run(self, X):
        cfg = replace(self._node_config(), exploration_constant=self.exploration_constant,
                      step_size=self.step_size, theta0=tuple(self.theta0))
        node = NodeState.create(cfg, self.random_state)
        logs = []
        for t, (e_h, v) in enumerate(X):
            s = int(e_h >= cfg.solar_threshold)
            logs.append(odc_step(node, float(e_h), s, float(v), t)[1])
        self.node_ = node
        return logs


class COAScheduler(_SchedulerBase):
    policy = "coa"

    def __init__(self, costs=Costs(), capacity=DEFAULT_CAPACITY, initial_energy=None,
                 solar_threshold=20.0, quantum=1.0, max_pending=16):
        self.costs = costs
        self.capacity = capacity
        self.initial_energy = initial_energy
        self.solar_threshold = solar_threshold
        self.quantum = quantum
        self.max_pending = max_pending

    @property
    def charge_efficiency(self):
        return 1.0

    def _run(self, X):
        return run_node_episode("coa", X[:, 0], X[:, 1], len(X), 0, self._node_config(),
                                {"quantum": self.quantum, "max_pending": self.max_pending})


class SDCScheduler(_SchedulerBase):
    policy = "sdc"

    def __init__(self, costs=Costs(), charge_efficiency=0.8, capacity=DEFAULT_CAPACITY,
                 initial_energy=None, solar_threshold=20.0):
        self.costs = costs
        self.charge_efficiency = charge_efficiency
        self.capacity = capacity
        self.initial_energy = initial_energy
        self.solar_threshold = solar_threshold

    def _run(self, X):
        return run_node_episode("sdc", X[:, 0], X[:, 1], len(X), 0, self._node_config())
