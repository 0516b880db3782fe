"""Deterministic switch-fabric simulator with benign and carpet-bombing traffic.

The fabric models ``switch_count`` switches with ``hosts_per_switch`` hosts
each, every switch uplinked to a shared core. Host ``hN`` sits on switch
``s{ceil(N / hosts_per_switch)}`` behind port ``s<k>-eth<j>``; the uplink is
port ``eth{hosts_per_switch + 1}``.

Counter direction follows the switch: ``rx`` on a host port is traffic the
host sent into the switch, ``tx`` is traffic the switch delivered to the
host. A drop rule on a port discards everything arriving on that port after
it has been counted at ingress.

Time is a logical clock. ``advance`` walks it forward in sub-steps of at
most one second; benign and attack traffic draw from independent seeded
streams so that toggling mitigation never perturbs the benign traffic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import UnknownPort
from .telemetry import InterfaceCounters, InterfaceFeatures, compute_features, window_delta

ATTACK_INTENSITIES = (100_000, 66_666, 40_000, 20_000)
# benign share of a 100,000-record reference corpus (55,118 benign)
BENIGN_FRACTION = 55_118 / 100_000

PROTOCOLS = ("icmp", "tcp", "udp", "http")


@dataclass(frozen=True)
class TopologyConfig:
    switch_count: int = 6
    hosts_per_switch: int = 5
    tcp_servers: tuple = ("h5", "h15", "h25")
    udp_servers: tuple = ("h10", "h20", "h30")
    http_servers: tuple = ("h9", "h24")
    attackers: tuple = ("h2", "h7", "h12", "h17")

    def __post_init__(self):
        if self.switch_count < 1 or self.hosts_per_switch < 1:
            raise ValueError("need at least one switch and one host per switch")
        hosts = set(self.hosts)
        for h in self.servers + tuple(self.attackers):
            if h not in hosts:
                raise ValueError(f"unknown host {h!r} in topology config")
        overlap = set(self.attackers) & set(self.servers)
        if overlap:
            raise ValueError(f"attackers cannot be servers: {sorted(overlap)}")

    @property
    def hosts(self) -> tuple:
        return tuple(f"h{i}" for i in range(1, self.switch_count * self.hosts_per_switch + 1))

    @property
    def servers(self) -> tuple:
        return tuple(self.tcp_servers) + tuple(self.udp_servers) + tuple(self.http_servers)

    @property
    def clients(self) -> tuple:
        servers = set(self.servers)
        return tuple(h for h in self.hosts if h not in servers)

    def switch_of(self, host: str) -> int:
        return (int(host[1:]) - 1) // self.hosts_per_switch + 1

    def port_of(self, host: str) -> str:
        n = int(host[1:])
        return f"s{self.switch_of(host)}-eth{(n - 1) % self.hosts_per_switch + 1}"

    def uplink_of(self, switch: int) -> str:
        return f"s{switch}-eth{self.hosts_per_switch + 1}"

    @property
    def host_ports(self) -> tuple:
        return tuple(self.port_of(h) for h in self.hosts)

    @property
    def ports(self) -> tuple:
        uplinks = ()
        if self.switch_count > 1:
            uplinks = tuple(self.uplink_of(s) for s in range(1, self.switch_count + 1))
        return self.host_ports + uplinks

    def default_targets(self) -> dict:
        """Two victims per attacker, one TCP-style and one UDP flood."""
        tcp_like = list(self.tcp_servers) + list(self.http_servers)
        udp = list(self.udp_servers)
        targets = {}
        for i, a in enumerate(self.attackers):
            pair = []
            if tcp_like:
                pair.append((tcp_like[i % len(tcp_like)], "tcp"))
            if udp:
                pair.append((udp[i % len(udp)], "udp"))
            targets[a] = tuple(pair)
        return targets


@dataclass(frozen=True)
class BenignTrafficConfig:
    rate_range_pps: tuple = (5.0, 500.0)
    flow_start_rate: float = 0.3  # new flows per idle client per second
    flow_duration_s: tuple = (5.0, 40.0)
    protocol_weights: tuple = (("icmp", 0.2), ("tcp", 0.35), ("udp", 0.25), ("http", 0.2))
    tcp_size_range: tuple = (1434.0, 1447.0)
    udp_size_range: tuple = (512.0, 1450.0)
    http_request_size_range: tuple = (60.0, 400.0)
    http_response_size_range: tuple = (1200.0, 1448.0)
    icmp_size: float = 98.0
    ack_size: float = 66.0
    background_pps: float = 0.2  # ARP/LLDP-style chatter on every host port
    background_sizes: tuple = (42.0, 74.0, 98.0)


@dataclass(frozen=True)
class AttackConfig:
    start_s: float
    end_s: float
    aggregate_pps: float = 100_000
    targets: dict | None = None  # attacker -> ((server, protocol), ...)
    packet_size: tuple = (("tcp", 160.0), ("udp", 172.0))

    def __post_init__(self):
        if not self.aggregate_pps > 0:
            raise ValueError("aggregate_pps must be positive")
        if not self.end_s > self.start_s >= 0:
            raise ValueError("attack interval must satisfy 0 <= start < end")

    def overlaps(self, t0: float, t1: float) -> bool:
        return self.start_s < t1 and self.end_s > t0


@dataclass(frozen=True)
class FabricParams:
    idle_timeout_s: float = 10.0
    attack_new_flow_fraction: float = 0.02
    load_base: float = 5.0
    load_alpha: float = 0.01


@dataclass(frozen=True)
class ScenarioConfig:
    duration_s: float
    seed: int = 0
    name: str = "scenario"
    benign: BenignTrafficConfig = field(default_factory=BenignTrafficConfig)
    attacks: tuple = ()
    params: FabricParams = field(default_factory=FabricParams)

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        for a in self.attacks:
            if a.end_s > self.duration_s:
                raise ValueError(f"attack {a} runs past the scenario end {self.duration_s}")

    def is_attacker_active(self, host: str, t0: float, t1: float, topology: TopologyConfig) -> bool:
        for a in self.attacks:
            attackers = a.targets.keys() if a.targets else topology.attackers
            if host in attackers and a.overlaps(t0, t1):
                return True
        return False


@dataclass(frozen=True)
class TrafficSample:
    features: InterfaceFeatures
    label: int
    scenario: str
    switch: int
    port: str
    window: int
    elapsed_s: float
    timestamp: float = 0.0

    def metadata(self) -> dict:
        return {"scenario": self.scenario, "switch": self.switch, "port": self.port,
                "window": self.window, "elapsed_s": self.elapsed_s}


@dataclass(frozen=True)
class FabricSnapshot:
    timestamp: float
    counters: dict
    packet_in_count: int
    elapsed_s: float
    controller_load_proxy: float
    active_drops: frozenset


@dataclass
class _Flow:
    src: str
    dst: str
    protocol: str
    pps: float
    end_s: float
    size: float
    reply_size: float
    reply_ratio: float


class Fabric:
    def __init__(self, topology: TopologyConfig, scenario: ScenarioConfig):
        self.topology = topology
        self.scenario = scenario
        benign_seq, attack_seq = np.random.SeedSequence(scenario.seed).spawn(2)
        self._rng = np.random.default_rng(benign_seq)
        self._attack_rng = np.random.default_rng(attack_seq)
        self.now = 0.0
        self._counters = {p: [0, 0, 0, 0] for p in topology.ports}
        self._host_port = {h: topology.port_of(h) for h in topology.hosts}
        self.drops: set = set()
        self._flows: dict = {}
        self._flow_table: dict = {}
        self.packet_in_total = 0
        self.attack_emitted: dict = {}
        self.attack_delivered: dict = {}
        self._attack_carry: dict = {}
        self._packet_in_carry: dict = {}
        self._last_snapshot = (0.0, 0)
        self._attacks = []
        for a in scenario.attacks:
            targets = a.targets or topology.default_targets()
            for atk, pairs in targets.items():
                if atk not in self._host_port:
                    raise ValueError(f"unknown attacker {atk!r}")
                for victim, _ in pairs:
                    if victim not in self._host_port:
                        raise ValueError(f"unknown attack target {victim!r}")
            self._attacks.append((a, targets))
        weights = dict(scenario.benign.protocol_weights)
        self._protocols = [p for p in PROTOCOLS if weights.get(p, 0) > 0 and self._servers_for(p)]
        w = np.array([weights[p] for p in self._protocols], dtype=float)
        self._protocol_p = w / w.sum() if w.size else w

    # -- fabric interface ----------------------------------------------------

    def poll_counters(self, port: str) -> InterfaceCounters:
        try:
            rxp, rxb, txp, txb = self._counters[port]
        except KeyError:
            raise UnknownPort(port) from None
        return InterfaceCounters(port, self.now, rxp, rxb, txp, txb)

    def install_drop(self, port: str) -> None:
        self._check_port(port)
        self.drops.add(port)

    def remove_drop(self, port: str) -> None:
        self._check_port(port)
        self.drops.discard(port)

    def snapshot(self) -> FabricSnapshot:
        """Counters now, plus Packet-In activity since the previous snapshot."""
        t0, pin0 = self._last_snapshot
        elapsed = self.now - t0
        count = self.packet_in_total - pin0
        rate = count / elapsed if elapsed > 0 else 0.0
        p = self.scenario.params
        self._last_snapshot = (self.now, self.packet_in_total)
        return FabricSnapshot(
            timestamp=self.now,
            counters={port: self.poll_counters(port) for port in self.topology.ports},
            packet_in_count=count,
            elapsed_s=elapsed,
            controller_load_proxy=p.load_base + p.load_alpha * rate,
            active_drops=frozenset(self.drops),
        )

    def ground_truth(self, port: str, t0: float, t1: float) -> int:
        host = self._port_host().get(port)
        if host is None:
            return 0
        return int(self.scenario.is_attacker_active(host, t0, t1, self.topology))

    def advance(self, dt_s: float) -> None:
        if not dt_s > 0:
            raise ValueError("dt_s must be positive")
        end = self.now + dt_s
        while self.now < end - 1e-12:
            h = min(1.0, end - self.now)
            self._step(self.now, h)
            self.now = self.now + h
        self.now = end

    # -- internals -----------------------------------------------------------

    def _check_port(self, port):
        if port not in self._counters:
            raise UnknownPort(port)

    def _port_host(self):
        return {p: h for h, p in self._host_port.items()}

    def _servers_for(self, protocol):
        t = self.topology
        if protocol == "tcp":
            return tuple(t.tcp_servers)
        if protocol == "udp":
            return tuple(t.udp_servers)
        if protocol == "http":
            return tuple(t.http_servers)
        return t.hosts

    def _count(self, port, rx, n, nbytes):
        c = self._counters[port]
        if rx:
            c[0] += n
            c[1] += nbytes
        else:
            c[2] += n
            c[3] += nbytes

    def _forward(self, src, dst, n, nbytes) -> bool:
        """Carry n packets src->dst; returns False if a drop rule ate them."""
        t = self.topology
        src_port = self._host_port[src]
        self._count(src_port, True, n, nbytes)
        if src_port in self.drops:
            return False
        s_sw, d_sw = t.switch_of(src), t.switch_of(dst)
        if s_sw != d_sw:
            self._count(t.uplink_of(s_sw), False, n, nbytes)
            up = t.uplink_of(d_sw)
            self._count(up, True, n, nbytes)
            if up in self.drops:
                return False
        self._count(self._host_port[dst], False, n, nbytes)
        return True

    def _flow_packet_in(self, key, now):
        expiry = self._flow_table.get(key)
        if expiry is None or expiry <= now:
            self.packet_in_total += 1
        self._flow_table[key] = now + self.scenario.params.idle_timeout_s

    def _send_benign(self, src, dst, protocol, n, size, now):
        if n <= 0:
            return
        nbytes = int(round(n * size))
        if self._forward(src, dst, n, nbytes):
            self._flow_packet_in((src, dst, protocol), now)

    def _new_flow(self, client, now):
        b = self.scenario.benign
        rng = self._rng
        protocol = self._protocols[rng.choice(len(self._protocols), p=self._protocol_p)]
        candidates = [s for s in self._servers_for(protocol) if s != client]
        if not candidates:
            return None
        dst = candidates[rng.integers(len(candidates))]
        pps = rng.uniform(*b.rate_range_pps)
        end = now + rng.uniform(*b.flow_duration_s)
        if protocol == "tcp":
            return _Flow(client, dst, protocol, pps, end, rng.uniform(*b.tcp_size_range), b.ack_size, 0.5)
        if protocol == "udp":
            return _Flow(client, dst, protocol, pps, end, rng.uniform(*b.udp_size_range), 0.0, 0.0)
        if protocol == "http":
            return _Flow(client, dst, protocol, pps * 0.3, end, rng.uniform(*b.http_request_size_range),
                         rng.uniform(*b.http_response_size_range), 1.0 / 0.3)
        return _Flow(client, dst, protocol, pps, end, b.icmp_size, b.icmp_size, 1.0)

    def _step(self, now, h):
        rng = self._rng
        b = self.scenario.benign
        start_p = 1.0 - math.exp(-b.flow_start_rate * h)
        for client in self.topology.clients:
            flow = self._flows.get(client)
            if flow is not None and flow.end_s <= now:
                flow = None
                del self._flows[client]
            if flow is None and self._protocols and rng.random() < start_p:
                flow = self._new_flow(client, now)
                if flow is not None:
                    self._flows[client] = flow
            if flow is None:
                continue
            n = int(rng.poisson(flow.pps * h))
            self._send_benign(flow.src, flow.dst, flow.protocol, n, flow.size, now)
            if flow.reply_ratio > 0:
                m = int(rng.poisson(flow.pps * flow.reply_ratio * h))
                self._send_benign(flow.dst, flow.src, flow.protocol, m, flow.reply_size, now)
        if b.background_pps > 0:
            sizes = b.background_sizes
            for host in self.topology.hosts:
                port = self._host_port[host]
                for rx in (True, False):
                    n = int(rng.poisson(b.background_pps * h))
                    if n:
                        size = sizes[rng.integers(len(sizes))]
                        self._count(port, rx, n, int(n * size))
        for a, targets in self._attacks:
            overlap = min(a.end_s, now + h) - max(a.start_s, now)
            if overlap <= 0:
                continue
            sizes = dict(a.packet_size)
            per_attacker = a.aggregate_pps / len(targets)
            for atk in sorted(targets, key=lambda x: int(x[1:])):
                pairs = targets[atk]
                for victim, protocol in pairs:
                    key = (atk, victim, protocol)
                    self._emit_attack(key, per_attacker / len(pairs) * overlap,
                                      sizes.get(protocol, 166.0))

    def _emit_attack(self, key, expected, size):
        atk, victim, _ = key
        total = self._attack_carry.get(key, 0.0) + expected
        n = int(total)
        self._attack_carry[key] = total - n
        if n <= 0:
            return
        jitter = self._attack_rng.normal(0.0, 1.0)
        nbytes = int(round(n * (size + jitter)))
        pair = (atk, victim)
        self.attack_emitted[pair] = self.attack_emitted.get(pair, 0) + n
        if self._forward(atk, victim, n, nbytes):
            self.attack_delivered[pair] = self.attack_delivered.get(pair, 0) + n
            # spoofed, randomised headers: a fixed share of packets misses the flow table
            pin = self._packet_in_carry.get(key, 0.0) + n * self.scenario.params.attack_new_flow_fraction
            self.packet_in_total += int(pin)
            self._packet_in_carry[key] = pin - int(pin)
        else:
            self.attack_delivered.setdefault(pair, 0)


def build_fabric(topology: TopologyConfig, scenario: ScenarioConfig) -> Fabric:
    return Fabric(topology, scenario)


def run_windows(topology: TopologyConfig, scenario: ScenarioConfig, interval_s: float = 10.0):
    """Poll every host port each interval; yield one labelled sample per port window."""
    fabric = build_fabric(topology, scenario)
    ports = topology.host_ports
    prev = {p: fabric.poll_counters(p) for p in ports}
    window = 0
    while fabric.now + interval_s <= scenario.duration_s + 1e-9:
        t0 = fabric.now
        fabric.advance(interval_s)
        for port in ports:
            curr = fabric.poll_counters(port)
            delta = window_delta(prev[port], curr)
            prev[port] = curr
            yield TrafficSample(
                features=compute_features(delta),
                label=fabric.ground_truth(port, t0, fabric.now),
                scenario=scenario.name,
                switch=int(port.split("-")[0][1:]),
                port=port,
                window=window,
                elapsed_s=delta.elapsed_s,
                timestamp=fabric.now,
            )
        window += 1


def _derived_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def default_scenarios(seed: int = 0, target_records: int = 2000, *,
                      intensities=ATTACK_INTENSITIES, benign_fraction: float = BENIGN_FRACTION,
                      topology: TopologyConfig = TopologyConfig(), interval_s: float = 10.0,
                      warmup_s: float = 60.0, benign_duration_s: float = 600.0) -> list:
    """A benign-only period plus one attack scenario per intensity.

    Attack intervals are aligned to monitoring windows and long enough for
    each intensity to supply an even share of the attack records.
    """
    n_attack = round(target_records * (1 - benign_fraction))
    per_intensity = math.ceil(n_attack / max(1, len(intensities)))
    n_attackers = max(1, len(topology.attackers))
    windows = math.ceil(per_intensity / n_attackers) + 2
    attack_len = windows * interval_s
    scenarios = [ScenarioConfig(benign_duration_s, _derived_seed(seed, 0), "benign")]
    for i, pps in enumerate(intensities, 1):
        attack = AttackConfig(warmup_s, warmup_s + attack_len, float(pps))
        scenarios.append(ScenarioConfig(
            warmup_s + attack_len + warmup_s, _derived_seed(seed, i), f"attack_{int(pps)}",
            attacks=(attack,),
        ))
    return scenarios


def generate_dataset(topology: TopologyConfig, scenarios, seed: int = 0, *,
                     target_records: int | None = None,
                     benign_fraction: float = BENIGN_FRACTION,
                     interval_s: float = 10.0) -> list:
    """Run every scenario and collect labelled port windows.

    With ``target_records`` set, attack samples are drawn evenly across the
    attack scenarios and benign samples fill the remainder so the class
    ratio matches ``benign_fraction``. Output is ordered by scenario, window
    and port.
    """
    pools = {}
    order = []
    for sc in scenarios:
        order.append(sc.name)
        pools[sc.name] = list(run_windows(topology, sc, interval_s))
    if target_records is None:
        return [s for name in order for s in pools[name]]

    rng = np.random.default_rng(seed)
    n_attack = round(target_records * (1 - benign_fraction))
    n_benign = target_records - n_attack
    attack_groups = [name for name in order if any(s.label == 1 for s in pools[name])]
    chosen = []
    if n_attack:
        if not attack_groups:
            raise ValueError("no attack scenarios to draw attack samples from")
        base, extra = divmod(n_attack, len(attack_groups))
        for i, name in enumerate(attack_groups):
            quota = base + (1 if i < extra else 0)
            members = [s for s in pools[name] if s.label == 1]
            if len(members) < quota:
                raise ValueError(f"scenario {name} yields {len(members)} attack samples, need {quota}")
            picks = rng.choice(len(members), size=quota, replace=False)
            chosen += [members[j] for j in picks]
    benign_pool = [s for name in order for s in pools[name] if s.label == 0]
    if len(benign_pool) < n_benign:
        raise ValueError(f"only {len(benign_pool)} benign samples available, need {n_benign}")
    picks = rng.choice(len(benign_pool), size=n_benign, replace=False)
    chosen += [benign_pool[j] for j in picks]
    rank = {name: i for i, name in enumerate(order)}
    chosen.sort(key=lambda s: (rank[s.scenario], s.window, int(s.port[1:].split("-")[0]),
                               int(s.port.split("eth")[1])))
    return chosen


def single_attack_scenario(aggregate_pps: float, *, seed: int = 0, duration_s: float = 300.0,
                           attack_start_s: float = 60.0, attack_end_s: float | None = None,
                           name: str | None = None) -> ScenarioConfig:
    """One attack of the given intensity; ``aggregate_pps <= 0`` gives benign-only."""
    if aggregate_pps <= 0:
        return ScenarioConfig(duration_s, seed, name or "attack_free")
    end = duration_s if attack_end_s is None else attack_end_s
    return ScenarioConfig(duration_s, seed, name or f"attack_{int(aggregate_pps)}",
                          attacks=(AttackConfig(attack_start_s, end, float(aggregate_pps)),))


def with_seed(scenario: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(scenario, seed=seed)
