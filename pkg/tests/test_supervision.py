import pytest
from hypothesis import given
from hypothesis import strategies as st

from syncdrive.supervision import (
    ESCALATION,
    CommandGate,
    Mode,
    SupervisionConfig,
    SupervisionInputs,
    SupervisionState,
    gate_command,
    operator_reset,
    step,
)

CFG = SupervisionConfig()


def fresh(now=10.0, **kw):
    return SupervisionInputs(now_s=now, last_cam_rx_s=now, last_control_s=now, **kw)


def test_nominal_pass_through():
    state, gate = step(SupervisionState(), fresh(), CFG)
    assert state.mode is Mode.NOMINAL
    assert gate_command(gate, 0.4) == (0.4, True)


def test_stale_cam_enters_backup_and_ramps():
    eps = 1e-6
    now = 10.0
    inputs = SupervisionInputs(now, now - CFG.comm_stale_backup_s - eps, now)
    state, gate = step(SupervisionState(), inputs, CFG)
    assert state.mode is Mode.BACKUP and state.entered_at_s == now
    assert gate.scale == 1.0
    half = now + CFG.backup_ramp_s / 2
    state2, gate2 = step(state, SupervisionInputs(half, inputs.last_cam_rx_s + 0.9, half), CFG)
    assert state2.mode is Mode.BACKUP and state2.entered_at_s == now
    assert gate2.scale == pytest.approx(0.5)
    accel, on = gate_command(gate2, 0.4)
    assert accel == pytest.approx(0.2) and on


def test_backup_ramp_floors_at_zero():
    state = SupervisionState(Mode.BACKUP, 0.0, "not_converged")
    _, gate = step(state, fresh(now=100.0, controller_converged=False), CFG)
    assert gate.scale == 0.0


def test_very_stale_cam_disables():
    now = 10.0
    state, gate = step(SupervisionState(), SupervisionInputs(now, now - 2.01, now), CFG)
    assert state.mode is Mode.DISABLED
    assert gate_command(gate, 0.4) == (0.0, False)


def test_control_gap_escalation():
    now = 10.0
    s1, _ = step(SupervisionState(), SupervisionInputs(now, now, now - 0.7), CFG)
    assert (s1.mode, s1.trigger) == (Mode.BACKUP, "control_gap")
    s2, _ = step(s1, SupervisionInputs(now, now, now - 0.6 - 2.0 - 0.01), CFG)
    assert (s2.mode, s2.trigger) == (Mode.DISABLED, "control_timeout")


def test_non_convergence_triggers_backup_and_recovers():
    s1, _ = step(SupervisionState(), fresh(controller_converged=False), CFG)
    assert s1.mode is Mode.BACKUP
    s2, gate = step(s1, fresh(now=10.2), CFG)
    assert s2.mode is Mode.NOMINAL and gate.scale == 1.0


def test_manual_override_regardless_of_freshness():
    inputs = SupervisionInputs(10.0, 0.0, 0.0, manual_input=frozenset({"longitudinal"}))
    state, gate = step(SupervisionState(Mode.DISABLED, 1.0, "cam_stale"), inputs, CFG)
    assert state.mode is Mode.OVERRIDE
    assert gate_command(gate, -1.0) == (0.0, False)


def test_manual_on_disabled_channel_ignored():
    state, _ = step(SupervisionState(), fresh(manual_input=frozenset({"lateral"})), CFG)
    assert state.mode is Mode.NOMINAL


def test_latched_states_and_reset():
    over = SupervisionState(Mode.OVERRIDE, 1.0, "manual:longitudinal")
    assert step(over, fresh(), CFG)[0].mode is Mode.OVERRIDE
    dis = SupervisionState(Mode.DISABLED, 1.0, "cam_stale")
    assert step(dis, fresh(), CFG)[0].mode is Mode.DISABLED
    assert operator_reset(5.0).mode is Mode.NOMINAL


def test_gate_examples():
    assert gate_command(CommandGate(Mode.NOMINAL, 1.0, True), 0.4) == (0.4, True)
    assert gate_command(CommandGate(Mode.DISABLED, 0.0, False), 0.4) == (0.0, False)
    assert gate_command(CommandGate(Mode.BACKUP, 0.5, True), 0.4) == (0.2, True)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"comm_stale_backup_s": 0.0},
        {"comm_stale_backup_s": 2.0, "comm_stale_disable_s": 2.0},
        {"backup_ramp_s": 0.0},
        {"channels_enabled": {"vertical"}},
    ],
)
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        SupervisionConfig(**kwargs)


channel_sets = st.frozensets(st.sampled_from(["longitudinal", "lateral"]))
modes = st.sampled_from(list(Mode))


@st.composite
def scenarios(draw):
    now = draw(st.floats(0, 1000))
    inputs = SupervisionInputs(
        now_s=now,
        last_cam_rx_s=now - draw(st.floats(0, 10)),
        last_control_s=now - draw(st.floats(0, 10)),
        controller_converged=draw(st.booleans()),
        manual_input=draw(channel_sets),
    )
    state = SupervisionState(draw(modes), now - draw(st.floats(0, 10)), "x")
    cfg = SupervisionConfig(channels_enabled=draw(channel_sets))
    return state, inputs, cfg


@given(scenarios())
def test_escalation_is_monotone_except_backup_recovery(case):
    state, inputs, cfg = case
    new, gate = step(state, inputs, cfg)
    if state.mode in ESCALATION and new.mode in ESCALATION:
        if ESCALATION[new.mode] < ESCALATION[state.mode]:
            assert state.mode is Mode.BACKUP and new.mode is Mode.NOMINAL
            assert new.trigger == "recovered"
    if state.mode is Mode.OVERRIDE:
        assert new.mode is Mode.OVERRIDE


@given(scenarios(), st.floats(-10, 10))
def test_channel_gating_and_zero_output(case, raw):
    state, inputs, cfg = case
    new, gate = step(state, inputs, cfg)
    if new.mode in (Mode.DISABLED, Mode.OVERRIDE):
        assert gate_command(gate, raw) == (0.0, False)
    if state.mode is not Mode.OVERRIDE and not (inputs.manual_input & cfg.channels_enabled):
        assert new.mode is not Mode.OVERRIDE


@given(scenarios())
def test_step_is_pure(case):
    assert step(*case) == step(*case)
