"""Connected speed-synchronisation simulator: MPC follower, simulated V2X link, safety supervisor."""

from .model import LeadProfile, VehicleState, lead_accel, step_state
from .mpc import ControlSequence, MpcConfig, MpcController, ReferenceState, apply_first, cost, cost_gradient, rollout, solve
from .sim import RunMetrics, RunTrace, Scenario, compute_metrics, export_trace, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ControlSequence",
    "LeadProfile",
    "MpcConfig",
    "MpcController",
    "ReferenceState",
    "RunMetrics",
    "RunTrace",
    "Scenario",
    "VehicleState",
    "apply_first",
    "compute_metrics",
    "cost",
    "cost_gradient",
    "export_trace",
    "lead_accel",
    "rollout",
    "run_scenario",
    "solve",
    "step_state",
]
