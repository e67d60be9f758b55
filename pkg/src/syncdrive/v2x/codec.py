"""Flat CAM-style awareness message and its JSON wire format.

Wire format: one UTF-8 JSON object, no whitespace, keys in the order of
``CAM_FIELDS``. Integers are plain JSON integers; reals use Python's
shortest round-trip ``repr``. Unknown keys are ignored on decode. The
generation time is a full 64-bit millisecond count rather than the
16-bit ``generationDeltaTime`` used by ETSI CAMs, so there is no wrap.
"""

from __future__ import annotations

import json
import math
from dataclasses import astuple, dataclass

CAM_FIELDS = (
    "station_id",
    "generation_time_ms",
    "x_m",
    "y_m",
    "heading_rad",
    "speed_mps",
    "accel_mps2",
    "curvature_inv_m",
)
_INT_FIELDS = ("station_id", "generation_time_ms")
_REAL_FIELDS = CAM_FIELDS[2:]
_U32 = 2**32
_U64 = 2**64
TWO_PI = 2.0 * math.pi


class CamError(ValueError):
    """Message violates the CAM invariants and cannot be encoded."""


class CamDecodeError(ValueError):
    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class CamMessage:
    station_id: int
    generation_time_ms: int
    x_m: float = 0.0
    y_m: float = 0.0
    heading_rad: float = 0.0
    speed_mps: float = 0.0
    accel_mps2: float = 0.0
    curvature_inv_m: float = 0.0

    def violations(self) -> list[str]:
        out = []
        for name in _INT_FIELDS:
            value = getattr(self, name)
            limit = _U32 if name == "station_id" else _U64
            if isinstance(value, bool) or not isinstance(value, int):
                out.append(f"{name} must be an integer")
            elif not 0 <= value < limit:
                out.append(f"{name} out of unsigned range")
        for name in _REAL_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                out.append(f"{name} must be a real number")
            elif not math.isfinite(value):
                out.append(f"{name} must be finite")
        if not out:
            if self.speed_mps < 0:
                out.append("speed_mps must be >= 0")
            if not 0.0 <= self.heading_rad < TWO_PI:
                out.append("heading_rad must lie in [0, 2*pi)")
        return out


def encode_cam(msg: CamMessage) -> bytes:
    problems = msg.violations()
    if problems:
        raise CamError("; ".join(problems))
    obj = {}
    for name, value in zip(CAM_FIELDS, astuple(msg)):
        obj[name] = int(value) if name in _INT_FIELDS else float(value)
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")


def decode_cam(payload: bytes) -> CamMessage:
    try:
        obj = json.loads(payload)
    except (UnicodeDecodeError, ValueError) as exc:
        raise CamDecodeError(f"malformed CAM payload: {exc}") from exc
    if not isinstance(obj, dict):
        raise CamDecodeError("CAM payload must be a JSON object")

    values = {}
    for name in CAM_FIELDS:
        if name not in obj:
            raise CamDecodeError(f"missing field {name}", name)
        value = obj[name]
        if name in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise CamDecodeError(f"field {name} must be an integer", name)
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise CamDecodeError(f"field {name} must be a number", name)
            value = float(value)
        values[name] = value

    msg = CamMessage(**values)
    problems = msg.violations()
    if problems:
        raise CamDecodeError("; ".join(problems), problems[0].split()[0])
    return msg


def cam_topic(station_id: int) -> str:
    return f"vehicles/{int(station_id)}/cam"


def station_from_topic(topic: str) -> int:
    parts = topic.split("/")
    if len(parts) != 3 or parts[0] != "vehicles" or parts[2] != "cam" or not parts[1].isdigit():
        raise ValueError(f"not a CAM topic: {topic!r}")
    return int(parts[1])
