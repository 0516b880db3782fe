import numpy as np
import pytest

from carpetguard.exceptions import UnknownPort
from carpetguard.fabric_sim import (
    BENIGN_FRACTION,
    AttackConfig,
    BenignTrafficConfig,
    ScenarioConfig,
    TopologyConfig,
    build_fabric,
    default_scenarios,
    generate_dataset,
    run_windows,
    single_attack_scenario,
)

QUIET = BenignTrafficConfig(flow_start_rate=0.0, background_pps=0.0)
TOPO = TopologyConfig()


def test_default_topology_counts():
    assert len(TOPO.hosts) == 30
    assert len(TOPO.host_ports) == 30
    assert len(TOPO.ports) == 36
    assert len({TOPO.switch_of(h) for h in TOPO.hosts}) == 6
    assert len({TOPO.switch_of(a) for a in TOPO.attackers}) == 4
    for attacker, pairs in TOPO.default_targets().items():
        assert len(pairs) == 2
        assert {p for _, p in pairs} == {"tcp", "udp"}


def test_minimal_topology():
    t = TopologyConfig(switch_count=1, hosts_per_switch=2, tcp_servers=("h1",), udp_servers=(),
                       http_servers=(), attackers=("h2",))
    assert t.ports == ("s1-eth1", "s1-eth2")


@pytest.mark.parametrize("kwargs", [
    {"attackers": ("h5",)},
    {"attackers": ("h99",)},
    {"tcp_servers": ("h0",)},
    {"switch_count": 0},
])
def test_invalid_topology(kwargs):
    with pytest.raises(ValueError):
        TopologyConfig(**kwargs)


def test_invalid_scenario():
    with pytest.raises(ValueError):
        ScenarioConfig(0)
    with pytest.raises(ValueError):
        AttackConfig(10, 5)
    with pytest.raises(ValueError):
        AttackConfig(0, 5, aggregate_pps=0)
    with pytest.raises(ValueError):
        ScenarioConfig(50, attacks=(AttackConfig(0, 60),))
    with pytest.raises(ValueError):
        build_fabric(TOPO, ScenarioConfig(60, attacks=(AttackConfig(0, 60, targets={"h2": (("h77", "tcp"),)}),)))


def test_unknown_port():
    f = build_fabric(TOPO, ScenarioConfig(10))
    for op in (f.poll_counters, f.install_drop, f.remove_drop):
        with pytest.raises(UnknownPort):
            op("s9-eth9")


def test_quiet_fabric_is_silent():
    f = build_fabric(TOPO, ScenarioConfig(10, benign=QUIET))
    f.advance(10)
    snap = f.snapshot()
    assert snap.packet_in_count == 0
    for c in snap.counters.values():
        assert (c.rx_packets, c.rx_bytes, c.tx_packets, c.tx_bytes) == (0, 0, 0, 0)


def test_attack_split_is_even():
    sc = ScenarioConfig(10, benign=QUIET, attacks=(AttackConfig(0, 10, 20_000),))
    f = build_fabric(TOPO, sc)
    f.advance(10)
    for a in TOPO.attackers:
        assert f.poll_counters(TOPO.port_of(a)).rx_packets == 50_000
        emitted = sum(n for (atk, _), n in f.attack_emitted.items() if atk == a)
        assert emitted == 50_000
    assert sum(f.attack_emitted.values()) == 200_000


def test_attack_window_with_benign_traffic():
    sc = ScenarioConfig(10, seed=3, attacks=(AttackConfig(0, 10, 20_000),))
    f = build_fabric(TOPO, sc)
    f.advance(10)
    for a in TOPO.attackers:
        rx = f.poll_counters(TOPO.port_of(a)).rx_packets
        assert rx == pytest.approx(50_000, rel=0.15)


def test_attack_window_shape_at_high_rate():
    samples = [s for s in run_windows(TOPO, single_attack_scenario(100_000, seed=2, duration_s=120))
               if s.label == 1]
    assert samples
    for s in samples:
        if s.window > 6:  # fully inside the attack
            assert 10_000 <= s.features.received_pps < 100_000
            assert 150 <= s.features.avg_received_size <= 190


def test_determinism():
    sc = single_attack_scenario(40_000, seed=9, duration_s=120)
    a = list(run_windows(TOPO, sc))
    b = list(run_windows(TOPO, sc))
    assert a == b
    c = list(run_windows(TOPO, single_attack_scenario(40_000, seed=10, duration_s=120)))
    assert a != c


def test_drop_idempotent_and_inverse():
    f = build_fabric(TOPO, ScenarioConfig(10))
    f.install_drop("s1-eth2")
    f.install_drop("s1-eth2")
    assert f.drops == {"s1-eth2"}
    f.remove_drop("s1-eth2")
    f.remove_drop("s1-eth2")
    assert f.drops == set()


def _victim_rx(drop):
    sc = ScenarioConfig(20, seed=4, attacks=(AttackConfig(0, 20, 40_000),))
    f = build_fabric(TOPO, sc)
    if drop:
        f.install_drop(TOPO.port_of("h2"))
    f.advance(20)
    return f


def test_drop_blocks_forwarding_but_counts_ingress():
    open_, dropped = _victim_rx(False), _victim_rx(True)
    pairs = [k for k in open_.attack_emitted if k[0] == "h2"]
    for pair in pairs:
        assert open_.attack_delivered[pair] == open_.attack_emitted[pair]
        assert dropped.attack_delivered[pair] == 0
        assert dropped.attack_emitted[pair] == open_.attack_emitted[pair]
    port = TOPO.port_of("h2")
    assert dropped.poll_counters(port).rx_packets == open_.poll_counters(port).rx_packets
    for attacker in TOPO.attackers[1:]:
        for pair in (k for k in open_.attack_emitted if k[0] == attacker):
            assert dropped.attack_delivered[pair] == open_.attack_delivered[pair]


def test_conservation_per_attacker():
    for drop in (False, True):
        f = _victim_rx(drop)
        for pair, emitted in f.attack_emitted.items():
            assert 0 <= f.attack_delivered[pair] <= emitted


def test_packet_in_rises_under_attack():
    def window_packet_in(pps):
        sc = single_attack_scenario(pps, seed=5, duration_s=60, attack_start_s=0)
        f = build_fabric(TOPO, sc)
        f.advance(60)
        return f.snapshot()

    base, att = window_packet_in(0), window_packet_in(20_000)
    assert att.packet_in_count > base.packet_in_count
    assert att.controller_load_proxy > base.controller_load_proxy


def test_benign_only_labels():
    samples = list(run_windows(TOPO, ScenarioConfig(200, seed=1)))
    assert len(samples) == 20 * 30
    assert {s.label for s in samples} == {0}


def test_labels_follow_attack_timing_and_source():
    sc = single_attack_scenario(66_666, seed=1, duration_s=120, attack_start_s=30, attack_end_s=90)
    attacker_ports = {TOPO.port_of(a) for a in TOPO.attackers}
    for s in run_windows(TOPO, sc):
        t0 = s.window * 10
        active = t0 < 90 and t0 + 10 > 30
        assert s.label == int(active and s.port in attacker_ports)


def test_dataset_class_ratio_and_balance():
    scenarios = default_scenarios(seed=0, target_records=2000)
    data = generate_dataset(TOPO, scenarios, seed=0, target_records=2000)
    assert len(data) == 2000
    benign_share = np.mean([s.label == 0 for s in data])
    assert abs(benign_share - BENIGN_FRACTION) <= 0.03
    per_scenario = {}
    for s in data:
        if s.label == 1:
            per_scenario[s.scenario] = per_scenario.get(s.scenario, 0) + 1
    assert len(per_scenario) == 4
    assert max(per_scenario.values()) - min(per_scenario.values()) <= 1
    assert generate_dataset(TOPO, scenarios, seed=0, target_records=2000) == data
