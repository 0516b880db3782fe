"""Per-port drop-rule state machine with timed recovery.

A port is either monitored or blocked since some timestamp. An attack
classification installs a drop rule; the rule is removed at the first tick
at or past ``block_duration_s`` after blocking.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .exceptions import MitigationContractError


class Action(str, enum.Enum):
    INSTALL_DROP = "InstallDrop"
    REMOVE_DROP = "RemoveDrop"
    NONE = "None"


@dataclass(frozen=True)
class PortMitigationState:
    port_id: str
    blocked_since: float | None = None

    @property
    def blocked(self) -> bool:
        return self.blocked_since is not None


@dataclass(frozen=True)
class MitigationConfig:
    block_duration_s: float = 40.0
    monitor_interval_s: float = 10.0

    def __post_init__(self):
        if not (self.block_duration_s > 0 and self.monitor_interval_s > 0):
            raise ValueError("block duration and monitor interval must be positive")


def on_classification(state: PortMitigationState, label: int, now: float):
    if state.blocked:
        raise MitigationContractError(
            f"port {state.port_id} is blocked since {state.blocked_since}; it must not be classified"
        )
    if label == 1:
        return PortMitigationState(state.port_id, now), Action.INSTALL_DROP
    if label == 0:
        return state, Action.NONE
    raise ValueError(f"label must be 0 or 1, got {label!r}")


def tick(state: PortMitigationState, now: float, cfg: MitigationConfig = MitigationConfig()):
    if state.blocked and now - state.blocked_since >= cfg.block_duration_s:
        return PortMitigationState(state.port_id), Action.REMOVE_DROP
    return state, Action.NONE


class MitigationTable:
    """States for a set of ports, driven by a single control loop."""

    def __init__(self, ports, cfg: MitigationConfig = MitigationConfig()):
        self.cfg = cfg
        self.states = {p: PortMitigationState(p) for p in ports}

    def is_blocked(self, port) -> bool:
        return self.states[port].blocked

    def monitored_ports(self):
        return [p for p, s in self.states.items() if not s.blocked]

    def classify(self, port, label: int, now: float) -> Action:
        self.states[port], action = on_classification(self.states[port], label, now)
        return action

    def tick_all(self, now: float) -> list[tuple[str, Action]]:
        """Advance recovery timers; returns the ports that were released."""
        released = []
        for port, state in self.states.items():
            self.states[port], action = tick(state, now, self.cfg)
            if action is Action.REMOVE_DROP:
                released.append((port, action))
        return released
