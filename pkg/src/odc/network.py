"""Multi-hop network: layered routing toward the sink, slot resolution, flow ledger.

Every node forwards to a single parent one hop closer to the sink. In each
slot all node decisions are collected first and then resolved together:
a transmission succeeds only when the parent is listening (the sink always
is) and the sender wins contention for that receiver.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .bandit import ArmId
from .schedulers import (NodeConfig, NodeState, SlotLog, coa_schedule, execute_energy,
                         odc_choose, sdc_duty_cycle, settle)


class DisconnectedNode(ValueError):
    """A node has no multi-hop path to the sink."""


@dataclass(frozen=True)
class Topology:
    positions: np.ndarray
    sink: int
    radius: float
    parent: tuple[int, ...]          # parent[sink] == -1
    hops: tuple[int, ...]
    layers: tuple[tuple[int, ...], ...]  # layers[0] == (sink,)

    @property
    def n_nodes(self) -> int:
        return len(self.hops)

    @property
    def sensors(self) -> list[int]:
        return [i for i in range(self.n_nodes) if i != self.sink]

    def children(self, node: int) -> list[int]:
        return [i for i, p in enumerate(self.parent) if p == node]

    def neighbours(self, node: int) -> list[int]:
        d = np.linalg.norm(self.positions - self.positions[node], axis=1)
        return [i for i in np.flatnonzero(d <= self.radius + 1e-12) if i != node]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "x", "y", "layer", "parent"])
            for i, (x, y) in enumerate(self.positions):
                w.writerow([i, repr(float(x)), repr(float(y)), self.hops[i], self.parent[i]])


def adjacency(positions, radius: float) -> list[list[int]]:
    pos = np.asarray(positions, dtype=float)
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    within = d <= radius + 1e-12
    np.fill_diagonal(within, False)
    return [list(np.flatnonzero(row)) for row in within]


def build_layers(positions, radius: float, sink: int = 0) -> Topology:
    """Hop layers by breadth-first search from the sink.

    A node's parent is its lowest-id neighbour in the previous layer.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("positions must be an (n, 2) array")
    n = len(pos)
    if not 0 <= sink < n:
        raise ValueError(f"sink id {sink} out of range for {n} nodes")
    if radius <= 0:
        raise ValueError("radius must be positive")
    adj = adjacency(pos, radius)
    hops = [-1] * n
    hops[sink] = 0
    queue = deque([sink])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if hops[v] < 0:
                hops[v] = hops[u] + 1
                queue.append(v)
    missing = [i for i, h in enumerate(hops) if h < 0]
    if missing:
        raise DisconnectedNode(f"node {missing[0]} has no route to sink {sink}"
                               + (f" ({len(missing)} nodes unreachable)" if len(missing) > 1 else ""))
    parent = [-1] * n
    for v in range(n):
        if v != sink:
            parent[v] = min(u for u in adj[v] if hops[u] == hops[v] - 1)
    layers = tuple(tuple(i for i in range(n) if hops[i] == k) for k in range(max(hops) + 1))
    return Topology(pos, sink, float(radius), tuple(parent), tuple(hops), layers)


def random_topology(n_sensors: int, seed: int, area: float = 100.0, radius: float = 50.0,
                    max_tries: int = 100) -> Topology:
    """Sensors uniform in a square with the sink at its centre (node 0).

    Redraws until every sensor reaches the sink.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pts = rng.uniform(0.0, area, size=(n_sensors, 2))
        pos = np.vstack([[area / 2, area / 2], pts])
        try:
            return build_layers(pos, radius, 0)
        except DisconnectedNode:
            continue
    raise DisconnectedNode(f"no connected placement of {n_sensors} nodes after {max_tries} draws")


def read_topology_csv(path, radius: float = 50.0, sink: int = 0) -> Topology:
    """Rebuild a topology from a ``node,x,y[,layer,parent]`` file."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("node", "x", "y") if c not in header]
        if missing:
            raise ValueError(f"topology file missing column(s): {', '.join(missing)}")
        rows = sorted(((int(r["node"]), float(r["x"]), float(r["y"])) for r in reader))
    ids = [r[0] for r in rows]
    if ids != list(range(len(ids))):
        raise ValueError("node ids must be 0..n-1 without gaps")
    return build_layers([(x, y) for _, x, y in rows], radius, sink)


# ---------------------------------------------------------------------------
# Slot resolution
# ---------------------------------------------------------------------------


@dataclass
class SlotResolution:
    actions: dict[int, ArmId]
    transfers: list[tuple[int, int, float]] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)
    sink_voi: float = 0.0

    def received_by(self, node: int) -> float | None:
        for _, dst, v in self.transfers:
            if dst == node:
                return v
        return None


def resolve_slot(topology: Topology, actions: dict[int, ArmId], packets: dict[int, float],
                 rng: np.random.Generator) -> SlotResolution:
    """Pair this slot's transmitters with listening parents.

    ``packets`` maps each transmitting node to the VoI of the packet it
    sends. Senders that target the same listening receiver contend; one
    wins uniformly at random.
    """
    res = SlotResolution(dict(actions))
    by_receiver: dict[int, list[int]] = {}
    for node in sorted(packets):
        if actions.get(node) != ArmId.TRANSMIT:
            continue
        dst = topology.parent[node]
        if dst != topology.sink and actions.get(dst) != ArmId.RECEIVE:
            res.failures.append((node, "parent not receiving"))
            continue
        by_receiver.setdefault(dst, []).append(node)
    for dst in sorted(by_receiver):
        senders = by_receiver[dst]
        winner = senders[int(rng.integers(len(senders)))] if len(senders) > 1 else senders[0]
        for s in senders:
            if s == winner:
                res.transfers.append((s, dst, float(packets[s])))
                if dst == topology.sink:
                    res.sink_voi += float(packets[s])
            else:
                res.failures.append((s, "collision"))
    return res


def common_active_probability(p_self: float, p_neighbor: float, k: int) -> float:
    """Chance a node is awake together with at least one of its ``k`` neighbours."""
    if not (0 <= p_self <= 1 and 0 <= p_neighbor <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if k < 1:
        raise ValueError("need at least one neighbour")
    return p_self * (1.0 - (1.0 - p_neighbor) ** k)


def simulate_common_activity(p_self: float, p_neighbor: float, k: int, slots: int,
                             rng: np.random.Generator) -> float:
    me = rng.random(slots) < p_self
    others = rng.random((slots, k)) < p_neighbor
    return float(np.mean(me & others.any(axis=1)))


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------


@dataclass
class NetworkEpisode:
    topology: Topology
    policy: str
    logs: dict[int, list[SlotLog]]
    resolutions: list[SlotResolution]
    sampled_voi: float = 0.0
    final_backlogs: dict[int, list[float]] = field(default_factory=dict)

    @property
    def sink_per_slot(self) -> np.ndarray:
        return np.array([r.sink_voi for r in self.resolutions])

    @property
    def sink_total(self) -> float:
        return float(self.sink_per_slot.sum())


def _sdc_cycle(can_receive: bool) -> list[ArmId]:
    return [ArmId.SAMPLE, ArmId.RECEIVE, ArmId.TRANSMIT] if can_receive else [ArmId.SAMPLE, ArmId.TRANSMIT]


def plan_network_coa(topology: Topology, harvest: np.ndarray, voi: np.ndarray,
                     config: NodeConfig, quantum: float = 1.0, max_pending: int = 16) -> dict[int, list[str]]:
    """Per-node COA plans, deepest layer first.

    Children claim transmit slots; siblings may not reuse a claimed slot; the
    parent is then planned with those slots offered as receive opportunities
    carrying the child's packet VoI.
    """
    horizon = harvest.shape[1]
    plans: dict[int, list[str]] = {}
    sent: dict[int, dict[int, float]] = {}   # node -> slot -> VoI sent
    for layer in reversed(topology.layers[1:]):
        claimed: dict[int, set[int]] = {}
        for node in layer:
            incoming = {}
            for child in topology.children(node):
                incoming.update(sent.get(child, {}))
            dst = topology.parent[node]
            plan = coa_schedule(harvest[node], voi[node], config.costs, horizon,
                                capacity=config.capacity, initial_energy=config.e0,
                                solar_threshold=config.solar_threshold, charge_efficiency=1.0,
                                quantum=quantum, max_pending=max_pending,
                                forced_receive=incoming, blocked_transmit=claimed.get(dst, set()))
            plans[node] = plan
            sent[node] = _replay_transmits(plan, voi[node], incoming)
            claimed.setdefault(dst, set()).update(sent[node])
    return plans


def _replay_transmits(plan, voi, incoming) -> dict[int, float]:
    backlog, out = [], {}
    for t, a in enumerate(plan):
        if a == "sample":
            backlog.append(float(voi[t]))
        elif a == "receive" and t in incoming:
            backlog.append(float(incoming[t]))
        elif a == "transmit" and backlog:
            i = int(np.argmax(backlog))
            out[t] = backlog.pop(i)
    return out


def run_network_episode(topology: Topology, policy: str, harvest, voi, seed: int = 0,
                        config: NodeConfig = NodeConfig(), coa_quantum: float = 1.0) -> NetworkEpisode:
    """Simulate every sensor under one policy.

    ``harvest`` and ``voi`` have shape ``(n_nodes, horizon)``; the sink's
    rows are ignored.
    """
    harvest = np.asarray(harvest, dtype=float)
    voi = np.asarray(voi, dtype=float)
    if harvest.shape != voi.shape or harvest.shape[0] != topology.n_nodes:
        raise ValueError("harvest and voi must both be (n_nodes, horizon)")
    horizon = harvest.shape[1]
    sensors = topology.sensors
    has_children = {i: bool(topology.children(i)) for i in sensors}
    eta = 1.0 if policy == "coa" else config.charge_efficiency
    nodes = {i: NodeState.create(replace(config, can_receive=has_children[i]),
                                 seed * 100003 + i, eta=eta) for i in sensors}
    contention = np.random.default_rng([seed, 7])

    plans = None
    active = {}
    cycle_pos = {i: 0 for i in sensors}
    if policy == "coa":
        plans = plan_network_coa(topology, harvest, voi, config, quantum=coa_quantum)
    elif policy == "sdc":
        for i in sensors:
            cyc = _sdc_cycle(has_children[i])
            avg = float(np.mean([config.costs.of(a) for a in cyc]))
            d = sdc_duty_cycle(float(harvest[i].sum()), avg, horizon, config.charge_efficiency)
            active[i] = {t for t in range(horizon) if np.floor((t + 1) * d + 1e-12) > np.floor(t * d + 1e-12)}
    elif policy != "odc":
        raise ValueError(f"unknown policy {policy!r}")

    logs = {i: [] for i in sensors}
    resolutions = []
    sampled = 0.0
    for t in range(horizon):
        actions: dict[int, ArmId] = {}
        slot_logs: dict[int, SlotLog] = {}
        for i in sensors:
            node = nodes[i]
            e_h = float(harvest[i, t])
            s = int(e_h >= config.solar_threshold)
            log = SlotLog(t, "", e_h, s, float(voi[i, t]))
            if policy == "odc":
                arm, log.threshold = odc_choose(node, e_h, s)
            elif policy == "coa":
                arm = _coa_arm(plans[i][t])
            else:
                arm = ArmId.STORE
                if t in active[i]:
                    cyc = _sdc_cycle(has_children[i])
                    arm = cyc[cycle_pos[i] % len(cyc)]
                    if arm == ArmId.TRANSMIT and not node.backlog:
                        arm = ArmId.SAMPLE
                    if node.affordable(arm, e_h, s):
                        cycle_pos[i] += 1
            if arm == ArmId.TRANSMIT and not node.backlog:
                arm = ArmId.STORE
            arm = execute_energy(node, arm, e_h, s, log)
            actions[i] = arm
            slot_logs[i] = log
        packets = {i: nodes[i].pop_best_packet() for i in sensors if actions[i] == ArmId.TRANSMIT}
        res = resolve_slot(topology, actions, packets, contention)
        delivered = {src: v for src, _, v in res.transfers}
        for i in sensors:
            node, arm, log = nodes[i], actions[i], slot_logs[i]
            reward = 0.0
            if arm == ArmId.SAMPLE:
                reward = log.available_voi
                node.backlog.append(reward)
                log.sampled_voi = reward
                sampled += reward
            elif arm == ArmId.TRANSMIT:
                if i in delivered:
                    reward = delivered[i]
                    log.transmitted_voi = reward
                    if topology.parent[i] == topology.sink:
                        log.sink_voi = reward
                else:
                    node.backlog.append(packets[i])
            elif arm == ArmId.RECEIVE:
                got = res.received_by(i)
                if got is not None:
                    reward = got
                    node.backlog.append(got)
                    log.received_voi = got
            log.arm = arm.label
            settle(node, arm, reward, log, adapt=policy == "odc")
            logs[i].append(log)
        resolutions.append(res)
    return NetworkEpisode(topology, policy, logs, resolutions, sampled,
                          {i: list(nodes[i].backlog) for i in sensors})


def _coa_arm(label: str) -> ArmId:
    return {"sample": ArmId.SAMPLE, "receive": ArmId.RECEIVE, "transmit": ArmId.TRANSMIT}.get(label, ArmId.STORE)


# ---------------------------------------------------------------------------
# Accounting
# ---------------------------------------------------------------------------


def sink_accounting(episode: NetworkEpisode) -> tuple[float, list[dict[int, tuple[float, float]]]]:
    """Total sink VoI and, per slot, ``layer -> (received, sent by next layer)``.

    Layer 0 is the sink. The two numbers in each entry must agree.
    """
    topo = episode.topology
    table = []
    for res in episode.resolutions:
        received = {k: 0.0 for k in range(len(topo.layers))}
        sent_up = {k: 0.0 for k in range(len(topo.layers))}
        for src, dst, v in res.transfers:
            received[topo.hops[dst]] += v
            sent_up[topo.hops[src] - 1] += v
        table.append({k: (received[k], sent_up[k]) for k in received})
    return episode.sink_total, table


def check_flow_conservation(episode: NetworkEpisode, tol: float = 1e-9) -> None:
    """Raise if any slot breaks the layer ledger or VoI is created or lost."""
    _, table = sink_accounting(episode)
    for t, row in enumerate(table):
        for k, (got, sent) in row.items():
            if abs(got - sent) > tol:
                raise AssertionError(f"layer {k} ledger off by {got - sent} at slot {t}")
    for t, res in enumerate(episode.resolutions):
        busy = [src for src, _, _ in res.transfers] + [dst for _, dst, _ in res.transfers
                                                          if dst != episode.topology.sink]
        if len(busy) != len(set(busy)):
            raise AssertionError(f"a node both sent and received, or received twice, at slot {t}")
    held = sum(sum(b) for b in episode.final_backlogs.values())
    if abs(episode.sink_total + held - episode.sampled_voi) > 1e-6 * max(1.0, episode.sampled_voi):
        raise AssertionError("VoI not conserved: sink + backlogs != sampled")


def awake_matrix(episode: NetworkEpisode) -> np.ndarray:
    """Boolean (n_nodes, horizon): node took a non-store action."""
    topo = episode.topology
    horizon = len(episode.resolutions)
    out = np.zeros((topo.n_nodes, horizon), dtype=bool)
    for i, logs in episode.logs.items():
        out[i] = [log.arm != "store" for log in logs]
    return out


def common_activity_table(episode: NetworkEpisode) -> list[tuple[int, int, float, float]]:
    """Per sensor: ``(node, k neighbours, empirical frequency, closed form)``.

    The closed form uses the node's own awake rate and the mean awake rate
    of its sensor neighbours.
    """
    awake = awake_matrix(episode)
    topo = episode.topology
    rows = []
    for i in topo.sensors:
        nbrs = [j for j in topo.neighbours(i) if j != topo.sink]
        if not nbrs:
            continue
        emp = float(np.mean(awake[i] & awake[nbrs].any(axis=0)))
        closed = common_active_probability(float(awake[i].mean()), float(awake[nbrs].mean()), len(nbrs))
        rows.append((i, len(nbrs), emp, closed))
    return rows
