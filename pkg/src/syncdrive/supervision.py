"""Safety supervisor for the follower's actuation.

Watches CAM freshness, controller liveness and solver health and escalates
Nominal -> BackupActive -> ActuationDisabled. Driver input on an enabled
actuation channel latches ManualOverride. Disabled and override are
absorbing; leaving them takes an explicit :func:`operator_reset`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

CHANNELS = frozenset({"longitudinal", "lateral"})


class Mode(str, enum.Enum):
    NOMINAL = "Nominal"
    BACKUP = "BackupActive"
    DISABLED = "ActuationDisabled"
    OVERRIDE = "ManualOverride"

    def __str__(self) -> str:
        return self.value


ESCALATION = {Mode.NOMINAL: 0, Mode.BACKUP: 1, Mode.DISABLED: 2}


@dataclass(frozen=True)
class SupervisionConfig:
    comm_stale_backup_s: float = 0.5
    comm_stale_disable_s: float = 2.0
    control_tick_timeout_s: float = 0.6
    backup_ramp_s: float = 2.0
    channels_enabled: frozenset = frozenset({"longitudinal"})

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels_enabled", frozenset(self.channels_enabled))
        if not 0 < self.comm_stale_backup_s < self.comm_stale_disable_s:
            raise ValueError("0 < comm_stale_backup_s < comm_stale_disable_s required")
        if not self.backup_ramp_s > 0:
            raise ValueError("backup_ramp_s must be > 0")
        if not self.control_tick_timeout_s > 0:
            raise ValueError("control_tick_timeout_s must be > 0")
        unknown = self.channels_enabled - CHANNELS
        if unknown:
            raise ValueError(f"unknown channels {sorted(unknown)}; valid: {sorted(CHANNELS)}")


@dataclass(frozen=True)
class SupervisionInputs:
    now_s: float
    last_cam_rx_s: float
    last_control_s: float
    controller_converged: bool = True
    manual_input: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class SupervisionState:
    mode: Mode = Mode.NOMINAL
    entered_at_s: float = 0.0
    trigger: str = ""


@dataclass(frozen=True)
class CommandGate:
    mode: Mode
    scale: float
    actuation_on: bool


def _classify(inputs: SupervisionInputs, cfg: SupervisionConfig) -> tuple[Mode, str]:
    cam_age = inputs.now_s - inputs.last_cam_rx_s
    control_gap = inputs.now_s - inputs.last_control_s
    if cam_age > cfg.comm_stale_disable_s:
        return Mode.DISABLED, "cam_stale"
    if control_gap > cfg.control_tick_timeout_s + cfg.backup_ramp_s:
        return Mode.DISABLED, "control_timeout"
    if cam_age > cfg.comm_stale_backup_s:
        return Mode.BACKUP, "cam_stale"
    if control_gap > cfg.control_tick_timeout_s:
        return Mode.BACKUP, "control_gap"
    if not inputs.controller_converged:
        return Mode.BACKUP, "not_converged"
    return Mode.NOMINAL, "recovered"


def step(
    state: SupervisionState, inputs: SupervisionInputs, cfg: SupervisionConfig
) -> tuple[SupervisionState, CommandGate]:
    manual = frozenset(inputs.manual_input) & cfg.channels_enabled
    if state.mode is Mode.OVERRIDE:
        mode, trigger = Mode.OVERRIDE, state.trigger
    elif manual:
        mode, trigger = Mode.OVERRIDE, "manual:" + ",".join(sorted(manual))
    elif state.mode is Mode.DISABLED:
        mode, trigger = Mode.DISABLED, state.trigger
    else:
        mode, trigger = _classify(inputs, cfg)

    if mode is state.mode:
        new_state = SupervisionState(mode, state.entered_at_s, state.trigger)
    else:
        new_state = SupervisionState(mode, inputs.now_s, trigger)

    if mode is Mode.NOMINAL:
        gate = CommandGate(mode, 1.0, True)
    elif mode is Mode.BACKUP:
        elapsed = inputs.now_s - new_state.entered_at_s
        gate = CommandGate(mode, max(0.0, 1.0 - elapsed / cfg.backup_ramp_s), True)
    else:
        gate = CommandGate(mode, 0.0, False)
    return new_state, gate


def gate_command(gate: CommandGate, raw_accel: float) -> tuple[float, bool]:
    if not gate.actuation_on:
        return 0.0, False
    return raw_accel * gate.scale, True


def operator_reset(now_s: float) -> SupervisionState:
    """Re-engage after a latched stop. Not reachable through :func:`step`."""
    return SupervisionState(Mode.NOMINAL, now_s, "operator_reset")
