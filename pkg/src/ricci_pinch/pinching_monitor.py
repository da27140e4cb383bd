"""Pinching quantities along a flow and the barrier comparison.

With ``a = |F|`` and ``b = R + c`` the monitored ratio is ``phi = a / b``.
The comparison function is

    Phi(t) = C1 + C2 * max_{s <= t} sqrt(|W|_max(s) / b_min(s)),

with ``C1 = max(alpha^2 + beta, phi_max(0) + epsilon)`` and ``C2 = gamma``,
where ``alpha^2 = c1``, ``beta^2 = (n-2)/(n(n-1))`` and ``gamma^2 = c2``.
``c1`` and ``c2`` default to the explicit values ``2/sqrt(n(n-1))`` and 1.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

from . import curvature_algebra as ca
from .errors import InvalidConfig, InvalidSample, UnsupportedCheck
from .geometry_catalog import HomogeneousState, WarpedSphereState, curvature_field, invariant_gradient_norm_sq


def default_c1(n: int) -> float:
    return 2.0 / np.sqrt(n * (n - 1))


DEFAULT_C2 = 1.0


@dataclass(frozen=True)
class MonitorConfig:
    c_override: float | None = None
    epsilon: float = 1e-3
    c1: float | None = None
    c2: float = DEFAULT_C2
    tolerance_rel: float | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidConfig(f"epsilon must be positive, got {self.epsilon}")
        if self.c1 is not None and not self.c1 > 0:
            raise InvalidConfig(f"c1 must be positive, got {self.c1}")
        if not self.c2 > 0:
            raise InvalidConfig(f"c2 must be positive, got {self.c2}")
        if self.c_override is not None and self.c_override < 0:
            raise InvalidConfig(f"c must be nonnegative, got {self.c_override}")
        if self.tolerance_rel is not None and self.tolerance_rel < 0:
            raise InvalidConfig("tolerance_rel must be nonnegative")


def default_tolerance(state) -> float:
    return 1e-3 if isinstance(state, WarpedSphereState) else 1e-6


def choose_c(R_min_initial: float, c_override: float | None = None) -> float:
    """Additive constant making ``R_min(0) + c`` positive.

    An explicit override is honoured if it is large enough; otherwise ``c = 0``
    when the initial scalar curvature is already positive and ``1 - R_min(0)``
    (so that ``b_min(0) = 1``) when it is not.
    """
    if c_override is not None:
        if R_min_initial + c_override <= 0:
            raise InvalidConfig(f"c = {c_override} does not make R_min(0) + c positive (R_min(0) = {R_min_initial})")
        return float(c_override)
    if R_min_initial > 0:
        return 0.0
    return 1.0 - R_min_initial


@dataclass(frozen=True)
class MonitorState:
    n: int
    c: float
    alpha_sq: float
    beta: float
    gamma: float
    epsilon: float
    C1: float
    C2: float
    phi0_max: float
    running_max: float = 0.0

    @classmethod
    def create(cls, n: int, c: float, phi0_max: float, config: MonitorConfig) -> "MonitorState":
        c1 = default_c1(n) if config.c1 is None else config.c1
        alpha_sq = c1
        beta = np.sqrt((n - 2) / (n * (n - 1)))
        gamma = np.sqrt(config.c2)
        return cls(
            n=n,
            c=c,
            alpha_sq=alpha_sq,
            beta=beta,
            gamma=gamma,
            epsilon=config.epsilon,
            C1=max(alpha_sq + beta, phi0_max + config.epsilon),
            C2=gamma,
            phi0_max=phi0_max,
        )


def barrier(state: MonitorState, W_max: float, b_min: float) -> tuple[MonitorState, float]:
    """Fold one sample into the running max and return the barrier value."""
    if not b_min > 0:
        raise InvalidSample(f"b_min must be positive, got {b_min}")
    if W_max < 0:
        raise InvalidSample(f"W_max must be nonnegative, got {W_max}")
    running = max(state.running_max, float(np.sqrt(W_max / b_min)))
    state = replace(state, running_max=running)
    return state, state.C1 + state.C2 * running


def reaction_term(a, b, c, trF3, WFF, n):
    """Zeroth-order coefficient in the evolution inequality for ``phi``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (
        (n - 2) / (n * (n - 1)) * (b - c)
        - 2.0 / (n - 2) * trF3 / a**2
        + WFF / a**2
        - (b - c) ** 2 / (n * b)
        - a * (a / b)
    )


def reaction_upper_bound(a, b, c, W, n, c1=None, c2=DEFAULT_C2):
    """Bound on the reaction term after replacing the cubic and Weyl terms by c1 a and c2 |W|."""
    if c1 is None:
        c1 = default_c1(n)
    return (n - 2) / (n * (n - 1)) * (b - c) + c1 * a + c2 * W - (b - c) ** 2 / (n * b) - a * a / b


def barrier_threshold(state: MonitorState, b, W):
    """Smallest ``a`` at which the reaction bound is guaranteed nonpositive."""
    return (state.alpha_sq + state.beta) * b + state.gamma * np.sqrt(b * W)


@dataclass(frozen=True)
class PinchSample:
    t: float
    R_min: float
    R_max: float
    b_min: float
    a_max: float
    W_max: float
    phi_max: float
    Phi: float
    margin: float
    rho_at_argmax: float
    Rm_max: float


SAMPLE_FIELDS = tuple(f.name for f in fields(PinchSample))


@dataclass(frozen=True)
class PointwiseCurvature:
    """Per-point invariants over every sample point of a state."""

    n: int
    R: np.ndarray
    a: np.ndarray
    W: np.ndarray
    trF3: np.ndarray
    WFF: np.ndarray
    Rm: np.ndarray


def pointwise(state) -> PointwiseCurvature:
    g, Rm = curvature_field(state)
    d = ca.decompose(Rm, g)
    return PointwiseCurvature(
        n=g.n,
        R=np.atleast_1d(d.R),
        a=np.atleast_1d(d.normF),
        W=np.atleast_1d(d.normW),
        trF3=np.atleast_1d(ca.tr_F_cubed(d.F, g)),
        WFF=np.atleast_1d(ca.weyl_quadratic(d.W, d.F, g)),
        Rm=np.atleast_1d(d.normRm),
    )


def curvature_norm_max(state) -> float:
    """``max |Rm|`` over the sample points, without the full decomposition."""
    g, Rm = curvature_field(state)
    return float(np.max(ca.riemann_norm(Rm, g)))


def phi_values(pc: PointwiseCurvature, c: float) -> np.ndarray:
    b = pc.R + c
    return np.where(pc.a == 0, 0.0, pc.a / b)


def start(pc: PointwiseCurvature, config: MonitorConfig) -> MonitorState:
    c = choose_c(float(pc.R.min()), config.c_override)
    phi0 = float(phi_values(pc, c).max())
    return MonitorState.create(pc.n, c, phi0, config)


def measure(t: float, pc: PointwiseCurvature, state: MonitorState) -> tuple[MonitorState, PinchSample]:
    """Reduce pointwise invariants to one sample and advance the barrier."""
    b = pc.R + state.c
    b_min = float(b.min())
    W_max = float(pc.W.max())
    phi = phi_values(pc, state.c)
    k = int(np.argmax(phi))
    state, Phi = barrier(state, W_max, b_min)
    if pc.a[k] > 0:
        rho = float(reaction_term(pc.a[k], b[k], state.c, pc.trF3[k], pc.WFF[k], pc.n))
    else:
        rho = float("nan")
    phi_max = float(phi[k])
    sample = PinchSample(
        t=float(t),
        R_min=float(pc.R.min()),
        R_max=float(pc.R.max()),
        b_min=b_min,
        a_max=float(pc.a.max()),
        W_max=W_max,
        phi_max=phi_max,
        Phi=float(Phi),
        margin=float(Phi - phi_max),
        rho_at_argmax=rho,
        Rm_max=float(pc.Rm.max()),
    )
    return state, sample


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


def verdict(sample: PinchSample, tol: float) -> Verdict:
    """``phi_max <= Phi (1 + tol) + tol``."""
    ok = sample.phi_max <= sample.Phi * (1.0 + tol) + tol
    return Verdict.PASS if ok else Verdict.FAIL


def _gradient_F_sq(state) -> float:
    """``|nabla F|^2``; zero on space forms and on products of round spheres."""
    if not isinstance(state, HomogeneousState):
        return 0.0
    g, Rm = curvature_field(state)
    F = ca.decompose(Rm, g).F[0]
    return invariant_gradient_norm_sq(state, F)


def evolution_residuals(state0, state1, dt: float, c: float = 0.0, floor: float = 1e-12) -> tuple[float, float]:
    """Relative residuals of the |F|^2 and b evolution laws between two ODE states.

    Laplacians vanish for spatially homogeneous curvature, leaving
    ``d|F|^2/dt = -2|nabla F|^2 + 4(n-2)/(n(n-1)) R|F|^2 - 8/(n-2) tr F^3 + 4 W(F,F)``
    and ``db/dt = 2a^2 + (2/n)(b-c)^2``. The gradient term is not zero on a
    left-invariant metric, where ``F`` has constant frame components but is
    not parallel; it is computed from the Levi-Civita connection. The
    difference quotient over ``dt`` is compared against the trapezoid
    average of the right-hand sides, which is second-order accurate about
    the midpoint.
    """
    if isinstance(state0, WarpedSphereState) or isinstance(state1, WarpedSphereState):
        raise UnsupportedCheck("evolution residuals are only defined for spatially homogeneous states")
    if dt <= 0:
        raise ValueError("dt must be positive")

    def parts(state):
        pc = pointwise(state)
        n = pc.n
        R, a2 = pc.R[0], pc.a[0] ** 2
        rhs_F2 = (
            -2.0 * _gradient_F_sq(state)
            + 4.0 * (n - 2) / (n * (n - 1)) * R * a2
            - 8.0 / (n - 2) * pc.trF3[0]
            + 4.0 * pc.WFF[0]
        )
        b = R + c
        rhs_b = 2.0 * a2 + 2.0 / n * (b - c) ** 2
        return a2, b, rhs_F2, rhs_b

    F2_0, b0, rF0, rb0 = parts(state0)
    F2_1, b1, rF1, rb1 = parts(state1)
    rhs_F = 0.5 * (rF0 + rF1)
    rhs_b = 0.5 * (rb0 + rb1)
    res_F2 = abs((F2_1 - F2_0) / dt - rhs_F) / (abs(rhs_F) + floor)
    res_b = abs((b1 - b0) / dt - rhs_b) / (abs(rhs_b) + floor)
    return float(res_F2), float(res_b)
