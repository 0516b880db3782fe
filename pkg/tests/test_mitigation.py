import pytest
from hypothesis import given
from hypothesis import strategies as st

from carpetguard.exceptions import MitigationContractError
from carpetguard.mitigation import (
    Action,
    MitigationConfig,
    MitigationTable,
    PortMitigationState,
    on_classification,
    tick,
)


def test_attack_blocks_immediately():
    s, a = on_classification(PortMitigationState("p"), 1, 100)
    assert (s.blocked_since, a) == (100, Action.INSTALL_DROP)


def test_benign_is_noop():
    s0 = PortMitigationState("p")
    assert on_classification(s0, 0, 5) == (s0, Action.NONE)


def test_blocked_port_must_not_be_classified():
    for label in (0, 1):
        with pytest.raises(MitigationContractError):
            on_classification(PortMitigationState("p", 90), label, 100)


def test_bad_label():
    with pytest.raises(ValueError):
        on_classification(PortMitigationState("p"), 2, 0)


def test_recovery_boundary_inclusive():
    blocked = PortMitigationState("p", 100)
    assert tick(blocked, 139) == (blocked, Action.NONE)
    s, a = tick(blocked, 140)
    assert (s.blocked, a) == (False, Action.REMOVE_DROP)
    assert tick(PortMitigationState("p"), 1e6) == (PortMitigationState("p"), Action.NONE)


def test_config_invariants():
    with pytest.raises(ValueError):
        MitigationConfig(block_duration_s=0)
    with pytest.raises(ValueError):
        MitigationConfig(monitor_interval_s=-1)


def test_table_skips_blocked_ports():
    t = MitigationTable(["a", "b"])
    assert t.classify("a", 1, 10) is Action.INSTALL_DROP
    assert t.monitored_ports() == ["b"]
    assert t.tick_all(40) == []
    assert t.tick_all(50) == [("a", Action.REMOVE_DROP)]
    assert not t.is_blocked("a")


@given(st.lists(st.integers(0, 1), min_size=1, max_size=60))
def test_trace_properties(labels):
    """Actions alternate, blocks never outlast duration plus one interval, replay is deterministic."""
    cfg = MitigationConfig()

    def replay():
        state, actions, since_log = PortMitigationState("p"), [], []
        for i, label in enumerate(labels):
            now = 10.0 * (i + 1)
            if not state.blocked:
                state, act = on_classification(state, label, now)
                if act is Action.INSTALL_DROP:
                    actions.append(act)
                    since_log.append(now)
            state, act = tick(state, now, cfg)
            if act is Action.REMOVE_DROP:
                actions.append(act)
                assert now - since_log[-1] <= cfg.block_duration_s + cfg.monitor_interval_s
        return actions

    actions = replay()
    assert actions == replay()
    for prev, cur in zip(actions, actions[1:]):
        assert prev is not cur
    if actions:
        assert actions[0] is Action.INSTALL_DROP
