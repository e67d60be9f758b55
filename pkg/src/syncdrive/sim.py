"""Fixed-step leader/follower synchronised-driving scenario.

Per sim tick at ``t = k * sim_dt_s``:

1. the leader publishes a CAM of its current state when a publish instant
   is due (``cam_rate_hz``);
2. the follower polls the broker and keeps the newest CAM by generation
   time as its reference;
3. on controller ticks the MPC is solved, the supervisor is stepped and
   the gated first control element becomes the held command;
4. a trace row is appended;
5. both vehicles integrate over ``sim_dt_s`` (leader on its profile,
   follower on the held command).

Messages still in flight at the end are drained so that
``sent == delivered + dropped``; drained messages never reach the controller
and are not latency samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .latency import LatencySample, LatencySink
from .model import LeadProfile, VehicleState, lead_accel, step_state
from .mpc import MpcConfig, MpcController, ReferenceState
from .supervision import (
    Mode,
    SupervisionConfig,
    SupervisionInputs,
    SupervisionState,
    gate_command,
)
from .supervision import step as supervise
from .v2x import CamMessage, NetworkModel, SimBroker, cam_topic, decode_cam, encode_cam

TRACE_HEADER = (
    "time_s",
    "lead_v",
    "lead_a",
    "lead_x",
    "fol_v",
    "fol_a",
    "fol_x",
    "cmd_a",
    "mode",
    "latency_ms",
)
EVENT_HEADER = ("time_s", "old_mode", "new_mode", "trigger")
_EPS = 1e-9


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    duration_s: float = 120.0
    sim_dt_s: float = 0.02
    controller_period_s: float = 0.2
    cam_rate_hz: float = 10.0
    lead_profile: LeadProfile = field(default_factory=LeadProfile)
    lead_initial: VehicleState = field(default_factory=lambda: VehicleState(position=30.0, speed=10.0))
    follower_initial: VehicleState = field(default_factory=lambda: VehicleState(position=0.0, speed=10.0))
    mpc: MpcConfig = field(default_factory=MpcConfig)
    network: NetworkModel = field(default_factory=NetworkModel)
    supervision: SupervisionConfig = field(default_factory=SupervisionConfig)
    seed: int = 1
    lead_station_id: int = 1
    clock_skew_ms: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ScenarioError("duration_s must be > 0")
        if not self.sim_dt_s > 0:
            raise ScenarioError("sim_dt_s must be > 0")
        if self.sim_dt_s > self.controller_period_s:
            raise ScenarioError("sim_dt_s must be <= controller_period_s")
        ratio = self.controller_period_s / self.sim_dt_s
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ScenarioError("controller_period_s must be an integer multiple of sim_dt_s")
        if not self.cam_rate_hz > 0:
            raise ScenarioError("cam_rate_hz must be > 0")
        if not math.isfinite(self.clock_skew_ms):
            raise ScenarioError("clock_skew_ms must be finite")

    @property
    def n_ticks(self) -> int:
        return round(self.duration_s / self.sim_dt_s)

    @property
    def control_every(self) -> int:
        return round(self.controller_period_s / self.sim_dt_s)


@dataclass(frozen=True)
class TraceRow:
    time_s: float
    lead_v: float
    lead_a: float
    lead_x: float
    fol_v: float
    fol_a: float
    fol_x: float
    cmd_a: float
    mode: str
    latency_ms: Optional[float]


@dataclass(frozen=True)
class ModeEvent:
    time_s: float
    old_mode: str
    new_mode: str
    trigger: str


@dataclass
class RunTrace:
    rows: list[TraceRow] = field(default_factory=list)
    events: list[ModeEvent] = field(default_factory=list)
    messages_sent: int = 0
    messages_delivered: int = 0
    messages_dropped: int = 0
    latency: LatencySink = field(default_factory=LatencySink)
    solver_failures: int = 0


@dataclass(frozen=True)
class RunMetrics:
    rms_speed_error_mps: float
    max_speed_error_mps: float
    mean_latency_ms: float
    messages_sent: int
    messages_delivered: int
    messages_dropped: int
    ticks_in_each_supervision_mode: dict
    final_mode: str

    def as_row(self) -> dict:
        row = {k: v for k, v in self.__dict__.items() if k != "ticks_in_each_supervision_mode"}
        for mode in Mode:
            row[f"ticks_{mode.value}"] = self.ticks_in_each_supervision_mode.get(mode.value, 0)
        return row


def run_scenario(sc: Scenario) -> tuple[RunTrace, RunMetrics]:
    if not isinstance(sc, Scenario):
        raise ScenarioError("run_scenario expects a Scenario")
    dt = sc.sim_dt_s
    rng = np.random.default_rng([sc.seed, sc.network.seed])
    broker = SimBroker(sc.network, rng)
    topic = cam_topic(sc.lead_station_id)
    sub = broker.subscribe(topic)
    controller = MpcController(sc.mpc)

    trace = RunTrace()
    lead, fol = sc.lead_initial, sc.follower_initial
    sup_state = SupervisionState(Mode.NOMINAL, 0.0, "start")
    ref: Optional[ReferenceState] = None
    newest_gen_ms = -1
    last_cam_rx_s = 0.0
    last_nominal_cmd = 0.0
    cmd = 0.0
    cam_period = 1.0 / sc.cam_rate_hz
    next_pub = 0.0

    for k in range(sc.n_ticks + 1):
        t = k * dt

        if t >= next_pub - _EPS:
            gen_ms = max(0, round(t * 1000.0 + sc.clock_skew_ms))
            msg = CamMessage(
                station_id=sc.lead_station_id,
                generation_time_ms=gen_ms,
                x_m=lead.position,
                speed_mps=lead.speed,
                accel_mps2=lead.acceleration,
            )
            broker.publish(topic, encode_cam(msg), t)
            next_pub += cam_period

        latency_ms = None
        for d in broker.poll_deliveries(t):
            if d.subscription is not sub:
                continue
            cam = decode_cam(d.payload)
            sample = LatencySample(cam.generation_time_ms, d.delivery_time_ms, d.topic)
            trace.latency.record(sample)
            latency_ms = sample.latency_ms
            if cam.generation_time_ms > newest_gen_ms:
                newest_gen_ms = cam.generation_time_ms
                ref = ReferenceState(cam.speed_mps, cam.accel_mps2, cam.generation_time_ms / 1000.0)
                last_cam_rx_s = d.delivery_time

        if k % sc.control_every == 0:
            converged = True
            raw = 0.0
            if ref is not None:
                raw, seq = controller.step(fol.speed, ref)
                converged = seq.converged
                if not converged:
                    trace.solver_failures += 1
            inputs = SupervisionInputs(
                now_s=t,
                last_cam_rx_s=last_cam_rx_s,
                last_control_s=t,
                controller_converged=converged,
            )
            new_state, gate = supervise(sup_state, inputs, sc.supervision)
            if new_state.mode is not sup_state.mode:
                trace.events.append(
                    ModeEvent(t, sup_state.mode.value, new_state.mode.value, new_state.trigger)
                )
            sup_state = new_state
            if gate.mode is Mode.NOMINAL:
                last_nominal_cmd = raw
                cmd, _ = gate_command(gate, raw)
            else:
                cmd, _ = gate_command(gate, last_nominal_cmd)

        trace.rows.append(
            TraceRow(
                t,
                lead.speed,
                lead.acceleration,
                lead.position,
                fol.speed,
                fol.acceleration,
                fol.position,
                cmd,
                sup_state.mode.value,
                latency_ms,
            )
        )
        if k < sc.n_ticks:
            lead = step_state(lead, lead_accel(sc.lead_profile, t), dt)
            fol = step_state(fol, cmd, dt)

    broker.drain()
    totals = broker.totals()
    trace.messages_sent = totals.published
    trace.messages_delivered = totals.delivered
    trace.messages_dropped = totals.dropped
    return trace, compute_metrics(trace)


def compute_metrics(trace: RunTrace) -> RunMetrics:
    if not trace.rows:
        raise ScenarioError("cannot compute metrics of an empty trace")
    err = np.array([r.fol_v - r.lead_v for r in trace.rows])
    ticks = {m.value: 0 for m in Mode}
    for r in trace.rows:
        ticks[r.mode] += 1
    mean_latency = trace.latency.stats().mean_ms if len(trace.latency) else math.nan
    return RunMetrics(
        rms_speed_error_mps=float(np.sqrt(np.mean(err * err))),
        max_speed_error_mps=float(np.max(np.abs(err))),
        mean_latency_ms=mean_latency,
        messages_sent=trace.messages_sent,
        messages_delivered=trace.messages_delivered,
        messages_dropped=trace.messages_dropped,
        ticks_in_each_supervision_mode=ticks,
        final_mode=trace.rows[-1].mode,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def output_paths(out_dir: Path | str, run_name: str, seed: int) -> dict[str, Path]:
    stem = Path(out_dir) / f"{run_name}_seed{seed}"
    return {
        "trace": stem.with_name(stem.name + "_trace.csv"),
        "events": stem.with_name(stem.name + "_events.csv"),
        "metrics": stem.with_name(stem.name + "_metrics.csv"),
    }


def _write_csv(path: Path, header, rows) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_trace(trace: RunTrace, path: Path | str, events_path: Path | str | None = None) -> None:
    """Write the per-tick trace CSV and, next to it, the mode-event CSV."""
    path = Path(path)
    if events_path is None:
        events_path = path.with_name(path.stem.removesuffix("_trace") + "_events.csv")
    _write_csv(path, TRACE_HEADER, ([getattr(r, h) for h in TRACE_HEADER] for r in trace.rows))
    _write_csv(Path(events_path), EVENT_HEADER, ([getattr(e, h) for h in EVENT_HEADER] for e in trace.events))


def export_metrics(metrics: RunMetrics, path: Path | str) -> None:
    row = metrics.as_row()
    _write_csv(Path(path), list(row), [list(row.values())])
