"""Explicit Runge-Kutta time stepping for the scenario families.

The driver advances a state with classical RK4 (fixed step, or adaptive by
step doubling), evaluates the pinching monitor on accepted steps and stops
on the first of: reaching ``t_max``, the curvature norm exceeding
``blowup_threshold``, a non-finite or non-positive monitored quantity, or
twenty consecutive step halvings after degenerate trial steps. Accepted
states are passed through ``regauge``, which may swap a warped state for
a better resolved coordinate representation of the same metric.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import pinching_monitor as pm
from .errors import DegenerateState, InvalidConfig, InvalidState
from .geometry_catalog import (
    WarpedSphereState,
    check_state,
    flow_vector_field,
    regauge,
    state_from_array,
    state_to_array,
    warped_sectional,
)

log = logging.getLogger(__name__)

MAX_HALVINGS = 20


class Termination(str, Enum):
    HORIZON = "horizon"
    BLOWUP = "blowup_threshold_hit"
    DEGENERATE = "degenerate_state"
    UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4-fixed"
    dt_initial: float = 1e-3
    dt_safety: float = 0.2
    t_max: float = 1.0
    blowup_threshold: float = 1e8
    tol_step: float = 1e-10
    sample_stride: int = 1
    regauge: bool = True

    def __post_init__(self):
        if self.method not in ("rk4-fixed", "rk4-adaptive"):
            raise InvalidConfig(f"unknown integrator method {self.method!r}")
        for name in ("dt_initial", "dt_safety", "blowup_threshold", "tol_step"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.t_max < 0:
            raise InvalidConfig("t_max must be nonnegative")
        if self.dt_safety > 1:
            raise InvalidConfig("dt_safety must be at most 1")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise InvalidConfig("sample_stride must be a positive integer")


@dataclass
class FlowTrace:
    samples: list[pm.PinchSample] = field(default_factory=list)
    termination: Termination | None = None
    t_final: float = 0.0
    monitor: pm.MonitorState | None = None
    n: int = 0
    tolerance: float = 1e-6
    steps: int = 0
    message: str = ""

    def terminate(self, reason: Termination, t: float, message: str = "") -> None:
        if self.termination is not None:
            raise RuntimeError("termination already recorded")
        self.termination = reason
        self.t_final = t
        self.message = message

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    @property
    def verdicts(self) -> list[pm.Verdict]:
        return [pm.verdict(s, self.tolerance) for s in self.samples]


def step(state, dt: float):
    """One classical RK4 step; raises ``DegenerateState`` if any stage leaves the admissible set."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = state_to_array(state)

    def f(yy):
        s = state_from_array(state, yy)
        check_state(s)
        return flow_vector_field(s)

    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    new = state_from_array(state, y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    check_state(new)
    return new


def stability_limit(state, safety: float) -> float:
    """Largest explicit step for the warped PDE; infinite for ODE families.

    Combines the parabolic limit ``safety * (min phi dx)^2`` with
    ``safety / max|sectional curvature|`` for the reaction terms.
    """
    if not isinstance(state, WarpedSphereState):
        return math.inf
    ds_min = float(np.min(state.phi)) * state.dx
    L, K = warped_sectional(state)
    kmax = float(max(np.max(np.abs(L)), np.max(np.abs(K)), 1e-300))
    return safety * min(ds_min**2, 1.0 / kmax)


def _adaptive_trial(state, dt, tol):
    """Step doubling: returns the two-half-step result and its error estimate."""
    big = step(state, dt)
    half = step(step(state, 0.5 * dt), 0.5 * dt)
    y_big, y_half = state_to_array(big), state_to_array(half)
    scale = 1.0 + np.abs(y_half)
    err = float(np.max(np.abs(y_half - y_big) / scale)) / 15.0
    return half, err


def run(
    state,
    integrator: IntegratorConfig,
    monitor: pm.MonitorConfig | None = None,
    on_sample: Callable[[pm.PinchSample], None] | None = None,
) -> FlowTrace:
    """Integrate Ricci flow from ``state`` and monitor the pinching estimate."""
    monitor = monitor or pm.MonitorConfig()
    check_state(state)
    pc = pm.pointwise(state)
    mstate = pm.start(pc, monitor)
    tol = monitor.tolerance_rel if monitor.tolerance_rel is not None else pm.default_tolerance(state)
    trace = FlowTrace(n=pc.n, tolerance=tol)

    def record(t, pc):
        nonlocal mstate
        if not np.all(np.isfinite(pc.R)) or not np.all(np.isfinite(pc.a)) or not np.all(np.isfinite(pc.W)):
            trace.terminate(Termination.DEGENERATE, t, f"non-finite curvature at t={t!r}")
            return False
        if float((pc.R + mstate.c).min()) <= 0:
            trace.terminate(Termination.DEGENERATE, t, f"b_min <= 0 at t={t!r}")
            return False
        mstate, sample = pm.measure(t, pc, mstate)
        trace.samples.append(sample)
        if on_sample is not None:
            on_sample(sample)
        return True

    t = 0.0
    if not record(t, pc):
        trace.monitor = mstate
        return trace

    adaptive = integrator.method == "rk4-adaptive"
    dt = integrator.dt_initial
    halvings = 0
    steps = 0
    t_max = integrator.t_max
    last_recorded = 0

    while t_max - t > 1e-14 * max(1.0, t_max):
        remaining = t_max - t
        h = min(dt, remaining, stability_limit(state, integrator.dt_safety))
        try:
            if adaptive:
                new, err = _adaptive_trial(state, h, integrator.tol_step)
                if err > integrator.tol_step:
                    dt = h * max(0.2, 0.9 * (integrator.tol_step / err) ** 0.2)
                    if dt < 1e-14 * max(1.0, t):
                        trace.terminate(Termination.UNDERFLOW, t, "adaptive step size underflow")
                        break
                    continue
            else:
                new = step(state, h)
        except (DegenerateState, InvalidState) as exc:
            halvings += 1
            dt = 0.5 * h
            if halvings > MAX_HALVINGS or dt < 1e-14 * max(1.0, t):
                trace.terminate(Termination.UNDERFLOW, t, f"{halvings} consecutive halvings: {exc}")
                break
            continue

        if adaptive:
            grow = 2.0 if err == 0 else min(2.0, max(0.2, 0.9 * (integrator.tol_step / err) ** 0.2))
            dt = h * grow if h < remaining else dt
        elif halvings:
            # let the step recover after a degenerate trial
            dt = min(integrator.dt_initial, 2.0 * h)
        halvings = 0
        state = regauge(new) if integrator.regauge else new
        t = t + h
        steps += 1

        try:
            rm_max = pm.curvature_norm_max(state)
        except (DegenerateState, InvalidState) as exc:
            trace.terminate(Termination.DEGENERATE, t, str(exc))
            break
        blowup = not math.isfinite(rm_max) or rm_max > integrator.blowup_threshold
        at_end = t_max - t <= 1e-14 * max(1.0, t_max)
        if steps % integrator.sample_stride == 0 or blowup or at_end:
            if not record(t, pm.pointwise(state)):
                break
            last_recorded = steps
        if blowup:
            trace.terminate(Termination.BLOWUP, t, f"|Rm|_max = {rm_max:.6g}")
            break

    if trace.termination is None:
        trace.terminate(Termination.HORIZON, t)
    trace.steps = steps
    trace.monitor = mstate
    log.debug("run finished: %s at t=%g after %d steps (%d recorded)", trace.termination, t, steps, last_recorded)
    return trace
