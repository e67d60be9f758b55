"""Speed/acceleration synchronisation MPC.

The controller predicts the ego speed over ``horizon`` steps of length
``t_s`` with a pure integrator, ``v[k+1] = v[k] + u[k] * t_s``. The last
received reference sample ``(v_ref, a_ref)`` drives the relative-speed
recursion ``dv[k+1] = dv[k] + (u[k] - a_ref) * t_s``, ``dv[0] = v_ego - v_ref``.
The cost

    J(u) = sum_k c_v dv[k+1]^2 + c_a (u[k] - a_ref)^2 + c_u ||u - u_prev||^2

is a convex quadratic in ``u``, minimised under box bounds on every
element of ``u`` by projected gradient with exact line search, accelerated
by a Newton step on the currently free coordinates.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class MpcError(ValueError):
    """Invalid controller configuration or mismatched control vectors."""


@dataclass(frozen=True)
class MpcConfig:
    c_v: float = 1.0
    c_a: float = 0.5
    c_u: float = 0.1
    t_s: float = 0.2
    horizon: int = 15
    a_min: float = -3.0
    a_max: float = 2.0
    solver_tol: float = 1e-8
    max_iters: int = 200

    def __post_init__(self) -> None:
        if isinstance(self.horizon, bool) or int(self.horizon) != self.horizon:
            raise MpcError("horizon must be an integer")
        object.__setattr__(self, "horizon", int(self.horizon))
        for name in ("c_v", "c_a", "c_u", "t_s", "a_min", "a_max", "solver_tol"):
            if not math.isfinite(getattr(self, name)):
                raise MpcError(f"{name} must be finite")
        if min(self.c_v, self.c_a, self.c_u) < 0:
            raise MpcError("weights c_v, c_a, c_u must be >= 0")
        if self.c_v + self.c_a <= 0:
            raise MpcError("c_v + c_a must be > 0")
        if not self.a_min < self.a_max:
            raise MpcError("a_min < a_max required")
        if self.t_s <= 0:
            raise MpcError("t_s must be > 0")
        if self.horizon < 1:
            raise MpcError("horizon ≥ 1 required")
        if self.solver_tol <= 0 or self.max_iters < 1:
            raise MpcError("solver_tol > 0 and max_iters >= 1 required")


@dataclass(frozen=True)
class ReferenceState:
    v_ref: float
    a_ref: float
    source_timestamp: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(x) for x in (self.v_ref, self.a_ref, self.source_timestamp)):
            raise MpcError("reference values must be finite")


@dataclass
class ControlSequence:
    """Acceleration plan over the horizon plus solver bookkeeping."""

    u: np.ndarray
    step_index: int = 0
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0
    cost_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=float).reshape(-1)

    def __len__(self) -> int:
        return self.u.size

    @classmethod
    def zeros(cls, horizon: int) -> "ControlSequence":
        return cls(np.zeros(horizon))


ControlLike = Union[ControlSequence, Sequence[float], np.ndarray]


def _vec(u: ControlLike) -> np.ndarray:
    if isinstance(u, ControlSequence):
        return u.u
    return np.asarray(u, dtype=float).reshape(-1)


@functools.lru_cache(maxsize=32)
def _matrices(horizon: int, t_s: float) -> tuple[np.ndarray, np.ndarray]:
    # speeds = v_ego + P @ u ; PtP is reused by the Hessian
    P = t_s * np.tril(np.ones((horizon, horizon)))
    P.setflags(write=False)
    PtP = P.T @ P
    PtP.setflags(write=False)
    return P, PtP


def _hessian(cfg: MpcConfig) -> np.ndarray:
    _, PtP = _matrices(cfg.horizon, cfg.t_s)
    return 2.0 * (cfg.c_v * PtP + (cfg.c_a + cfg.c_u) * np.eye(cfg.horizon))


def rollout(v_ego: float, ref: ReferenceState, u: ControlLike, cfg: MpcConfig) -> np.ndarray:
    """Predicted speeds v_1..v_H. No standstill clamp inside the prediction."""
    uv = _vec(u)
    P, _ = _matrices(uv.size, cfg.t_s)
    return v_ego + P @ uv


def relative_speeds(v_ego: float, ref: ReferenceState, u: ControlLike, cfg: MpcConfig) -> np.ndarray:
    """Speed differences dv_1..dv_H to the reference.

    ``dv[k+1] = dv[k] + (u[k] - a_ref) * t_s`` with ``dv[0] = v_ego - v_ref``,
    i.e. the reference keeps accelerating at ``a_ref`` over the horizon.
    """
    uv = _vec(u)
    P, _ = _matrices(uv.size, cfg.t_s)
    return v_ego - ref.v_ref + P @ (uv - ref.a_ref)


def _check_pair(u: np.ndarray, u_prev: np.ndarray) -> None:
    if u.shape != u_prev.shape:
        raise MpcError(f"length mismatch: u has {u.size} elements, u_prev has {u_prev.size}")
    if u.size == 0:
        raise MpcError("control sequence is empty")


def cost(
    u: ControlLike,
    u_prev: ControlLike,
    v_ego: float,
    ref: ReferenceState,
    cfg: MpcConfig,
) -> float:
    uv, pv = _vec(u), _vec(u_prev)
    _check_pair(uv, pv)
    r = relative_speeds(v_ego, ref, uv, cfg)
    ea = uv - ref.a_ref
    du = uv - pv
    return float(cfg.c_v * (r @ r) + cfg.c_a * (ea @ ea) + cfg.c_u * (du @ du))


def cost_gradient(
    u: ControlLike,
    u_prev: ControlLike,
    v_ego: float,
    ref: ReferenceState,
    cfg: MpcConfig,
) -> np.ndarray:
    uv, pv = _vec(u), _vec(u_prev)
    _check_pair(uv, pv)
    P, _ = _matrices(uv.size, cfg.t_s)
    r = relative_speeds(v_ego, ref, uv, cfg)
    return 2.0 * (cfg.c_v * (P.T @ r) + cfg.c_a * (uv - ref.a_ref) + cfg.c_u * (uv - pv))


def warm_start(u_prev: np.ndarray) -> np.ndarray:
    """Shift left by one step, repeating the last element."""
    if u_prev.size == 0:
        return u_prev.copy()
    return np.append(u_prev[1:], u_prev[-1])


def solve(
    v_ego: float,
    ref: ReferenceState,
    u_prev: Optional[ControlLike],
    cfg: MpcConfig,
    *,
    step_index: int = 0,
    record_history: bool = False,
) -> ControlSequence:
    """Minimise the cost over the box ``[a_min, a_max]^H``.

    Converged when ``||u - clip(u - grad)|| <= solver_tol``. Hitting
    ``max_iters`` returns the last (best, by monotone descent) iterate with
    ``converged=False``.
    """
    if not math.isfinite(v_ego):
        raise MpcError("v_ego must be finite")
    H = cfg.horizon
    prev = np.zeros(H) if u_prev is None else _vec(u_prev)
    if prev.size != H:
        raise MpcError(f"u_prev must have length {H}, got {prev.size}")

    lo, hi = cfg.a_min, cfg.a_max
    Q = _hessian(cfg)
    lip = float(np.linalg.eigvalsh(Q)[-1])

    def grad(x: np.ndarray) -> np.ndarray:
        return cost_gradient(x, prev, v_ego, ref, cfg)

    def f(x: np.ndarray) -> float:
        return cost(x, prev, v_ego, ref, cfg)

    u = np.clip(warm_start(prev), lo, hi)
    history = [f(u)] if record_history else []
    converged = False
    residual = math.inf
    it = 0
    for it in range(cfg.max_iters + 1):
        g = grad(u)
        residual = float(np.linalg.norm(u - np.clip(u - g, lo, hi)))
        if residual <= cfg.solver_tol:
            converged = True
            break
        if it == cfg.max_iters:
            break

        # projected gradient segment, exact minimiser on [0, 1]
        d = np.clip(u - g / lip, lo, hi) - u
        curv = float(d @ Q @ d)
        if curv > 0:
            t = min(1.0, max(0.0, -float(g @ d) / curv))
            u = np.clip(u + t * d, lo, hi)

        # Newton step restricted to the coordinates not pinned by a bound
        g = grad(u)
        pinned = ((u <= lo) & (g > 0)) | ((u >= hi) & (g < 0))
        free = ~pinned
        if free.any():
            d = np.zeros(H)
            d[free] = np.linalg.solve(Q[np.ix_(free, free)], -g[free])
            trial = np.clip(u + d, lo, hi)
            if f(trial) <= f(u):
                u = trial
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    room = np.where(d > 0, (hi - u) / d, np.where(d < 0, (lo - u) / d, np.inf))
                t = min(1.0, float(room.min()))
                u = np.clip(u + t * d, lo, hi)
        if record_history:
            history.append(f(u))

    return ControlSequence(
        u=u,
        step_index=step_index,
        converged=converged,
        iterations=it,
        residual=residual,
        cost_history=history,
    )


def apply_first(u: ControlLike, cfg: Optional[MpcConfig] = None) -> float:
    uv = _vec(u)
    if uv.size == 0:
        raise MpcError("control sequence is empty")
    a = float(uv[0])
    if cfg is not None:
        a = min(max(a, cfg.a_min), cfg.a_max)
    return a


class MpcController:
    """Receding-horizon wrapper that owns the previous solution."""

    def __init__(self, cfg: MpcConfig) -> None:
        self.cfg = cfg
        self.last = ControlSequence.zeros(cfg.horizon)
        self.step_index = 0

    def step(self, v_ego: float, ref: ReferenceState) -> tuple[float, ControlSequence]:
        self.step_index += 1
        seq = solve(v_ego, ref, self.last, self.cfg, step_index=self.step_index)
        self.last = seq
        return apply_first(seq, self.cfg), seq
