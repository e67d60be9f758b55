"""Longitudinal point-mass plant and lead-vehicle acceleration profiles."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field


class ModelError(ValueError):
    """Raised for non-finite or out-of-domain plant inputs."""


@dataclass(frozen=True)
class VehicleState:
    position: float = 0.0
    speed: float = 0.0
    acceleration: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        for name in ("position", "speed", "acceleration", "timestamp"):
            if not math.isfinite(getattr(self, name)):
                raise ModelError(f"{name} must be finite")
        if self.speed < 0:
            raise ModelError("speed must be >= 0")


PROFILE_KINDS = ("constant", "sine", "piecewise")


@dataclass(frozen=True)
class LeadProfile:
    """Acceleration schedule for the leading vehicle.

    ``sine`` gives ``offset + amplitude * sin(2*pi*t/period)``, ``constant``
    gives ``offset`` and ``piecewise`` holds the value of the latest breakpoint
    at or before ``t`` (zero before the first one).
    """

    kind: str = "sine"
    amplitude: float = 0.5
    period: float = 30.0
    offset: float = 0.0
    breakpoints: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ModelError(f"kind must be one of {PROFILE_KINDS}, got {self.kind!r}")
        if self.kind == "sine" and not self.period > 0:
            raise ModelError("period must be > 0 for a sine profile")
        bps = tuple((float(t), float(a)) for t, a in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        times = [t for t, _ in bps]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ModelError("breakpoint times must be strictly increasing")


def step_state(state: VehicleState, command_accel: float, dt: float) -> VehicleState:
    """Advance ``state`` by ``dt`` under constant commanded acceleration.

    Speed is clamped at standstill; when the clamp engages mid-step the
    vehicle travels only the distance needed to stop and ends the step at
    rest with zero realized acceleration.
    """
    if not (math.isfinite(command_accel) and math.isfinite(dt)):
        raise ModelError("command_accel and dt must be finite")
    if dt <= 0:
        raise ModelError("dt must be > 0")

    v0 = state.speed
    v1 = v0 + command_accel * dt
    if v1 >= 0:
        dx = v0 * dt + 0.5 * command_accel * dt * dt
        realized = command_accel
    else:
        # stops inside the step: t_stop = v0 / -a
        dx = 0.5 * v0 * v0 / -command_accel
        v1 = 0.0
        realized = 0.0
    return VehicleState(
        position=state.position + dx,
        speed=v1,
        acceleration=realized,
        timestamp=state.timestamp + dt,
    )


def lead_accel(profile: LeadProfile, t: float) -> float:
    if profile.kind == "constant":
        return profile.offset
    if profile.kind == "sine":
        return profile.offset + profile.amplitude * math.sin(2.0 * math.pi * t / profile.period)
    times = [bp[0] for bp in profile.breakpoints]
    idx = bisect.bisect_right(times, t) - 1
    if idx < 0:
        return 0.0
    return profile.breakpoints[idx][1]
