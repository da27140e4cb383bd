"""Scenario families with closed-form curvature and Ricci-flow vector fields.

Four families are provided:

* ``SpaceFormState``     round S^n, stored through its squared scale factor.
* ``ProductSphereState`` S^p(r1) x S^q(r2).
* ``HomogeneousState``   left-invariant metrics on 3D unimodular groups in a
  Milnor frame (SU(2), Nil; Sol and SL(2,R) accepted but experimental).
* ``WarpedSphereState``  rotationally symmetric metrics
  ``phi(x)^2 dx^2 + psi(x)^2 g_{S^k}`` on S^{k+1}, discretised on a fixed
  uniform grid in x.

Warped states flow in a gauge that adds a tangential vector field chosen
so that ``phi/psi`` stays constant at every node. In the stretched
conformal coordinate built by ``conformal_warped`` the grid spacing at a
neck is then a fixed fraction of the neck radius. ``regauge`` resamples
the metric with a larger mid-grid stretch when the caps crowd the poles.

Every family answers the same questions through single-dispatch functions:
``curvature_field`` (metric and curvature at every sample point),
``flow_vector_field`` (time derivative of the packed state under
``dg/dt = -2 Rc``), ``metric_rate`` (the induced ``dg/dt`` in the frame of
``curvature_field``), plus packing helpers used by the integrator.

``coordinate_curvature_oracle`` and ``koszul_curvature`` are independent
routes to the curvature used to validate the closed forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache, singledispatch
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq

from .curvature_algebra import Metric, kulkarni_nomizu
from .errors import DegenerateMetric, DegenerateState, InvalidLocation, InvalidState

POLE_REGULARITY_TOL = 0.05
DEFAULT_STRETCH = 4.0
MAX_STRETCH = 100.0
# pole_crowding of the default dumbbell data, and the factor that triggers a resample
POLE_CROWDING_TARGET = 3.33
REGAUGE_TRIGGER = 2.0

MILNOR_STRUCTURES = {
    "su2": (1.0, 1.0, 1.0),
    "nil": (1.0, 0.0, 0.0),
    "sol": (1.0, -1.0, 0.0),
    "sl2": (1.0, 1.0, -1.0),
}
EXPERIMENTAL_STRUCTURES = {"sol", "sl2"}


def _plane(n: int, i: int, j: int) -> np.ndarray:
    """Curvature tensor with unit sectional curvature on the (i, j) plane only."""
    Ei = np.zeros((n, n))
    Ej = np.zeros((n, n))
    Ei[i, i] = 1.0
    Ej[j, j] = 1.0
    return kulkarni_nomizu(Ei, Ej)


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceFormState:
    """Round S^n with metric ``scale_sq * g_round``; curvature ``1/scale_sq``."""

    n: int
    scale_sq: float

    @classmethod
    def from_kappa(cls, n: int, kappa: float) -> "SpaceFormState":
        if kappa <= 0:
            raise InvalidState(f"kappa must be positive, got {kappa}")
        return cls(n=n, scale_sq=1.0 / kappa)

    @property
    def kappa(self) -> float:
        return 1.0 / self.scale_sq


@dataclass(frozen=True)
class ProductSphereState:
    p: int
    q: int
    r1sq: float
    r2sq: float

    @property
    def n(self) -> int:
        return self.p + self.q


@dataclass(frozen=True)
class HomogeneousState:
    """Diagonal left-invariant metric ``diag(A, B, C)`` in a Milnor frame.

    ``structure`` holds ``(nu1, nu2, nu3)`` with ``[X2, X3] = nu1 X1``,
    ``[X3, X1] = nu2 X2`` and ``[X1, X2] = nu3 X3``.
    """

    structure: tuple[float, float, float]
    A: float
    B: float
    C: float

    n = 3

    @classmethod
    def named(cls, group: str, A: float, B: float, C: float) -> "HomogeneousState":
        key = group.lower()
        if key not in MILNOR_STRUCTURES:
            raise InvalidState(f"unknown Milnor structure {group!r}; expected one of {sorted(MILNOR_STRUCTURES)}")
        if key in EXPERIMENTAL_STRUCTURES:
            warnings.warn(f"structure {key!r} is experimental", stacklevel=2)
        return cls(structure=MILNOR_STRUCTURES[key], A=A, B=B, C=C)


@dataclass(frozen=True)
class WarpedSphereState:
    """Rotationally symmetric metric on S^{n_fiber+1} sampled on ``x in [0, 1]``."""

    n_fiber: int
    phi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.n_fiber + 1

    @property
    def M(self) -> int:
        return len(self.psi) - 1

    @property
    def dx(self) -> float:
        return 1.0 / self.M

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)

    @classmethod
    def from_profile(cls, n_fiber: int, M: int, psi_fn: Callable, phi_fn: Callable) -> "WarpedSphereState":
        x = np.linspace(0.0, 1.0, M + 1)
        psi = np.asarray(psi_fn(x), dtype=float)
        psi[0] = psi[-1] = 0.0
        phi = np.broadcast_to(np.asarray(phi_fn(x), dtype=float), x.shape).copy()
        state = cls(n_fiber=n_fiber, phi=phi, psi=psi)
        check_state(state)
        return state


def round_profile(x):
    return np.sin(np.pi * x)


def dumbbell_profile(neck_depth: float = 0.8):
    """Reflection-symmetric two-bulb profile with its thinnest neck at x = 1/2."""

    def psi(x):
        s = np.sin(np.pi * x)
        return s * (1.0 - neck_depth * s**2)

    return psi


def constant_phi(value: float = np.pi):
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


def round_warped(n_fiber: int, M: int) -> WarpedSphereState:
    """Unit round S^{n_fiber+1}: ``psi = sin(pi x)``, ``phi = pi``."""
    return WarpedSphereState.from_profile(n_fiber, M, round_profile, constant_phi(np.pi))


def dumbbell_warped(
    n_fiber: int = 3,
    M: int = 400,
    neck_depth: float = 0.8,
    phi0: float = np.pi,
    conformal: bool = True,
    stretch: float = DEFAULT_STRETCH,
) -> WarpedSphereState:
    """Dumbbell data ``psi = sin(pi x)(1 - d sin^2(pi x))``, ``phi = phi0``.

    With ``conformal`` the same metric is resampled by ``conformal_warped``,
    which keeps a pinching neck resolved on the fixed grid.
    """
    if conformal:
        return conformal_warped(n_fiber, M, dumbbell_profile(neck_depth), constant_phi(phi0), stretch)
    return WarpedSphereState.from_profile(n_fiber, M, dumbbell_profile(neck_depth), constant_phi(phi0))


def gauge_weight(y, stretch: float = DEFAULT_STRETCH):
    """``rho(y) = 1 + (stretch - 1) sin^2(pi y)``: equal to 1 at the poles, ``stretch`` mid-grid."""
    return 1.0 + (stretch - 1.0) * np.sin(np.pi * np.asarray(y, dtype=float)) ** 2


def _stretched_coordinate(M: int, ratio: Callable, stretch: float) -> np.ndarray:
    """Old coordinate ``x`` at the nodes of the new coordinate ``y``.

    Solves ``dx/dy = rho(y) pi ratio(x) / sin(pi y)`` outward from
    ``x(1/2) = 1/2``, where ``ratio = psi / phi`` in the old coordinate.
    """
    if M % 2:
        raise InvalidState("conformal resampling needs an even number of grid intervals")
    if not stretch >= 1:
        raise InvalidState(f"stretch must be >= 1, got {stretch}")
    y = np.linspace(0.0, 1.0, M + 1)

    def rhs(yy, xx):
        return gauge_weight(yy, stretch) * np.pi * ratio(xx) / np.sin(np.pi * yy)

    x = np.empty(M + 1)
    x[0], x[-1] = 0.0, 1.0
    mid = M // 2
    for sl in (slice(mid, 0, -1), slice(mid, M)):
        ys = y[sl]
        sol = solve_ivp(rhs, (0.5, ys[-1]), [0.5], t_eval=ys, method="DOP853", rtol=1e-13, atol=1e-15)
        if not sol.success or sol.y.shape[1] != len(ys):
            raise InvalidState(f"conformal resampling failed: {sol.message}")
        x[sl] = sol.y[0]
    return x


def _stretched_state(n_fiber: int, psi: np.ndarray, stretch: float) -> WarpedSphereState:
    y = np.linspace(0.0, 1.0, len(psi))
    psi = psi.copy()
    psi[0] = psi[-1] = 0.0
    phi = np.empty_like(psi)
    phi[1:-1] = gauge_weight(y[1:-1], stretch) * np.pi * psi[1:-1] / np.sin(np.pi * y[1:-1])
    _pole_extrapolate(phi)
    state = WarpedSphereState(n_fiber=n_fiber, phi=phi, psi=psi)
    check_state(state)
    return state


def conformal_warped(
    n_fiber: int, M: int, psi_fn: Callable, phi_fn: Callable, stretch: float = DEFAULT_STRETCH
) -> WarpedSphereState:
    """Resample ``phi(x)^2 dx^2 + psi(x)^2 g`` in a coordinate y with ``phi_y = rho(y) pi psi / sin(pi y)``.

    ``rho = gauge_weight(y, stretch)``; ``stretch = 1`` is the conformal
    coordinate of the round sphere. The flow keeps ``phi/psi`` fixed, so
    the arclength spacing near a neck stays proportional to the neck
    radius. The new coordinate is anchored at ``x(1/2) = 1/2``, which suits
    profiles symmetric about the midpoint.
    """
    x = _stretched_coordinate(M, lambda xx: psi_fn(xx) / phi_fn(xx), stretch)
    return _stretched_state(n_fiber, np.asarray(psi_fn(x), dtype=float), stretch)


def _profile_splines(state: WarpedSphereState):
    """Quintic splines of ``psi / sin(pi x)`` and ``phi``, both smooth up to the poles."""
    x = state.grid
    psi_s, _ = warped_derivatives(state)
    A = np.empty_like(x)
    A[1:-1] = state.psi[1:-1] / np.sin(np.pi * x[1:-1])
    A[0] = psi_s[0] * state.phi[0] / np.pi
    A[-1] = -psi_s[-1] * state.phi[-1] / np.pi
    return make_interp_spline(x, A, k=5), make_interp_spline(x, state.phi, k=5)


def resample_warped(state: WarpedSphereState, stretch: float, splines=None) -> WarpedSphereState:
    """The same metric in the stretched conformal coordinate with weight ``stretch``."""
    A, P = splines if splines is not None else _profile_splines(state)
    x = _stretched_coordinate(state.M, lambda xx: np.sin(np.pi * xx) * A(xx) / P(xx), stretch)
    return _stretched_state(state.n_fiber, np.sin(np.pi * x) * A(x), stretch)


def pole_crowding(state: WarpedSphereState) -> float:
    """Mean pole ``phi`` over ``max psi``: grid spacing at the caps relative to their size."""
    return 0.5 * (state.phi[0] + state.phi[-1]) / float(state.psi.max())


@singledispatch
def regauge(state):
    """Return ``state`` or an equivalent, better resolved representation of the same metric."""
    return state


@regauge.register
def _(state: WarpedSphereState):
    # The ratio-preserving gauge pushes the caps toward the poles as a neck
    # lengthens. Once the crowding doubles, pick a larger mid-grid stretch
    # that restores the target and resample.
    if pole_crowding(state) < REGAUGE_TRIGGER * POLE_CROWDING_TARGET:
        return state
    splines = _profile_splines(state)

    def excess(log_stretch):
        try:
            trial = resample_warped(state, math.exp(log_stretch), splines)
        except (InvalidState, DegenerateState):
            return -1.0
        return math.log(pole_crowding(trial) / POLE_CROWDING_TARGET)

    try:
        log_stretch = brentq(excess, 0.0, math.log(MAX_STRETCH), xtol=1e-4)
        return resample_warped(state, math.exp(log_stretch), splines)
    except (ValueError, InvalidState, DegenerateState):
        return state


# ---------------------------------------------------------------------------
# validity and packing
# ---------------------------------------------------------------------------


@singledispatch
def check_state(state) -> None:
    """Raise ``DegenerateState`` unless the state's positivity invariants hold."""
    raise TypeError(f"unsupported state type {type(state).__name__}")


@check_state.register
def _(state: SpaceFormState):
    if not (state.n >= 2 and np.isfinite(state.scale_sq) and state.scale_sq > 0):
        raise DegenerateState(f"space form needs scale_sq > 0, got {state.scale_sq}")


@check_state.register
def _(state: ProductSphereState):
    if state.p < 2 or state.q < 2:
        raise InvalidState("factor dimensions must be >= 2")
    for name in ("r1sq", "r2sq"):
        v = getattr(state, name)
        if not (np.isfinite(v) and v > 0):
            raise DegenerateState(f"{name} must be positive, got {v}")


@check_state.register
def _(state: HomogeneousState):
    for name in ("A", "B", "C"):
        v = getattr(state, name)
        if not (np.isfinite(v) and v > 0):
            raise DegenerateState(f"{name} must be positive, got {v}")


@check_state.register
def _(state: WarpedSphereState):
    if state.n_fiber < 2:
        raise InvalidState("fiber sphere dimension must be >= 2")
    if state.M < 8:
        raise InvalidState("warped grid needs at least 9 points")
    if not (np.all(np.isfinite(state.phi)) and np.all(np.isfinite(state.psi))):
        raise DegenerateState("non-finite warped state")
    if np.any(state.phi <= 0):
        raise DegenerateState("phi must be positive everywhere")
    if np.any(state.psi[1:-1] <= 0):
        raise DegenerateState("psi must be positive at interior points")
    if state.psi[0] != 0.0 or state.psi[-1] != 0.0:
        raise InvalidState("psi must vanish at both poles")


@singledispatch
def state_to_array(state) -> np.ndarray:
    raise TypeError(f"unsupported state type {type(state).__name__}")


@state_to_array.register
def _(state: SpaceFormState):
    return np.array([state.scale_sq])


@state_to_array.register
def _(state: ProductSphereState):
    return np.array([state.r1sq, state.r2sq])


@state_to_array.register
def _(state: HomogeneousState):
    return np.array([state.A, state.B, state.C])


@state_to_array.register
def _(state: WarpedSphereState):
    return np.concatenate([state.phi, state.psi])


@singledispatch
def state_from_array(template, y: np.ndarray):
    """Build a state of the same family and shape as ``template`` from ``y``."""
    raise TypeError(f"unsupported state type {type(template).__name__}")


@state_from_array.register
def _(template: SpaceFormState, y):
    return replace(template, scale_sq=float(y[0]))


@state_from_array.register
def _(template: ProductSphereState, y):
    return replace(template, r1sq=float(y[0]), r2sq=float(y[1]))


@state_from_array.register
def _(template: HomogeneousState, y):
    return replace(template, A=float(y[0]), B=float(y[1]), C=float(y[2]))


@state_from_array.register
def _(template: WarpedSphereState, y):
    m = template.M + 1
    psi = np.array(y[m:], dtype=float)
    psi[0] = psi[-1] = 0.0
    return WarpedSphereState(n_fiber=template.n_fiber, phi=np.array(y[:m], dtype=float), psi=psi)


# ---------------------------------------------------------------------------
# homogeneous (Milnor frame) helpers
# ---------------------------------------------------------------------------


def milnor_lambdas(state: HomogeneousState) -> np.ndarray:
    """Structure constants with respect to the orthonormal frame ``X_i / |X_i|``."""
    n1, n2, n3 = state.structure
    A, B, C = state.A, state.B, state.C
    return np.array([n1 * np.sqrt(A / (B * C)), n2 * np.sqrt(B / (A * C)), n3 * np.sqrt(C / (A * B))])


def milnor_ricci(state: HomogeneousState) -> np.ndarray:
    """Principal Ricci curvatures ``r_i = 2 mu_j mu_k`` (orthonormal frame)."""
    lam = milnor_lambdas(state)
    mu = 0.5 * lam.sum() - lam
    return 2.0 * np.array([mu[1] * mu[2], mu[0] * mu[2], mu[0] * mu[1]])


def milnor_sectional(state: HomogeneousState) -> dict[tuple[int, int], float]:
    r = milnor_ricci(state)
    return {
        (0, 1): 0.5 * (r[0] + r[1] - r[2]),
        (0, 2): 0.5 * (r[0] + r[2] - r[1]),
        (1, 2): 0.5 * (r[1] + r[2] - r[0]),
    }


def levi_civita_coefficients(c: np.ndarray) -> np.ndarray:
    """``Gamma[i, j, k] = <nabla_{e_i} e_j, e_k>`` from ``c[i, j, k] = <[e_i, e_j], e_k>`` (Koszul formula)."""
    c = np.asarray(c, dtype=float)
    return 0.5 * (c - np.einsum("jki->ijk", c) + np.einsum("kij->ijk", c))


def invariant_gradient_norm_sq(state: HomogeneousState, T: np.ndarray) -> float:
    """``|nabla T|^2`` for a left-invariant symmetric 2-tensor with orthonormal-frame components ``T``.

    The components are constant, so only the connection terms survive:
    ``(nabla_i T)_jk = -Gamma_ijm T_mk - Gamma_ikm T_jm``.
    """
    Gamma = levi_civita_coefficients(milnor_structure_tensor(state))
    dT = -np.einsum("ijm,mk->ijk", Gamma, T) - np.einsum("ikm,jm->ijk", Gamma, T)
    return float(np.sum(dT * dT))


def koszul_curvature(c: np.ndarray) -> np.ndarray:
    """Curvature of a left-invariant metric from orthonormal-frame structure constants.

    ``c[i, j, k] = <[e_i, e_j], e_k>``. Generic in dimension; used as an oracle.
    """
    c = np.asarray(c, dtype=float)
    Gamma = levi_civita_coefficients(c)
    # <R(e_i, e_j) e_l, e_k> with R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]
    term1 = np.einsum("jlm,imk->ijlk", Gamma, Gamma)
    term2 = np.einsum("ilm,jmk->ijlk", Gamma, Gamma)
    term3 = np.einsum("ijm,mlk->ijlk", c, Gamma)
    R_ijlk = term1 - term2 - term3
    return np.transpose(R_ijlk, (0, 1, 3, 2))


def milnor_structure_tensor(state: HomogeneousState) -> np.ndarray:
    lam = milnor_lambdas(state)
    c = np.zeros((3, 3, 3))
    for i, j, k in ((1, 2, 0), (2, 0, 1), (0, 1, 2)):
        c[i, j, k] = lam[k]
        c[j, i, k] = -lam[k]
    return c


# ---------------------------------------------------------------------------
# warped helpers
# ---------------------------------------------------------------------------


def _extend(state: WarpedSphereState) -> tuple[np.ndarray, np.ndarray]:
    """Two ghost nodes at each pole: psi odd, phi even under reflection."""
    psi, phi = state.psi, state.phi
    psi_e = np.concatenate([-psi[2:0:-1], psi, -psi[-2:-4:-1]])
    phi_e = np.concatenate([phi[2:0:-1], phi, phi[-2:-4:-1]])
    return psi_e, phi_e


def _d1(f_e: np.ndarray, h: float) -> np.ndarray:
    return (-f_e[4:] + 8.0 * f_e[3:-1] - 8.0 * f_e[1:-3] + f_e[:-4]) / (12.0 * h)


def _d2(f_e: np.ndarray, h: float) -> np.ndarray:
    return (-f_e[4:] + 16.0 * f_e[3:-1] - 30.0 * f_e[2:-2] + 16.0 * f_e[1:-3] - f_e[:-4]) / (12.0 * h * h)


def warped_derivatives(state: WarpedSphereState) -> tuple[np.ndarray, np.ndarray]:
    """Arclength derivatives ``(psi_s, psi_ss)`` at every node (fourth-order stencils)."""
    psi_e, phi_e = _extend(state)
    h = state.dx
    psi_x, psi_xx = _d1(psi_e, h), _d2(psi_e, h)
    phi_x = _d1(phi_e, h)
    phi = state.phi
    psi_s = psi_x / phi
    psi_ss = (psi_xx - psi_x * phi_x / phi) / phi**2
    return psi_s, psi_ss


def _interior_sectional(state: WarpedSphereState) -> tuple[np.ndarray, np.ndarray]:
    psi_s, psi_ss = warped_derivatives(state)
    psi = state.psi[1:-1]
    L = -psi_ss[1:-1] / psi
    K = (1.0 - psi_s[1:-1] ** 2) / psi**2
    return L, K


def pole_limits(state: WarpedSphereState) -> tuple[tuple[float, float], tuple[float, float]]:
    """Radial and spherical sectional curvatures at the two poles.

    Both sectional curvatures are even functions of arclength about a pole,
    so each limit is extrapolated from the first two interior nodes in x^2.
    Returns ``((L, K) at x=0, (L, K) at x=1)``.
    """
    psi_s, _ = warped_derivatives(state)
    for idx, side in ((0, "x=0"), (-1, "x=1")):
        if abs(abs(psi_s[idx]) - 1.0) > POLE_REGULARITY_TOL:
            raise InvalidState(f"pole regularity violated at {side}: |psi_s| = {abs(psi_s[idx]):.6g}")
    L, K = _interior_sectional(state)
    left = ((4.0 * L[0] - L[1]) / 3.0, (4.0 * K[0] - K[1]) / 3.0)
    right = ((4.0 * L[-1] - L[-2]) / 3.0, (4.0 * K[-1] - K[-2]) / 3.0)
    return left, right


def warped_sectional(state: WarpedSphereState) -> tuple[np.ndarray, np.ndarray]:
    """Radial (L) and spherical (K) sectional curvatures at all M + 1 nodes."""
    L_int, K_int = _interior_sectional(state)
    (L0, K0), (L1, K1) = pole_limits(state)
    L = np.concatenate([[L0], L_int, [L1]])
    K = np.concatenate([[K0], K_int, [K1]])
    return L, K


@lru_cache(maxsize=None)
def _warped_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    E00 = np.zeros((n, n))
    E00[0, 0] = 1.0
    P = np.eye(n) - E00
    radial = kulkarni_nomizu(E00, P)
    spherical = 0.5 * kulkarni_nomizu(P, P)
    radial.setflags(write=False)
    spherical.setflags(write=False)
    return radial, spherical


def warped_curvature_tensor(n_fiber: int, L, K) -> np.ndarray:
    """Orthonormal-frame curvature from the radial/spherical sectional curvatures."""
    radial, spherical = _warped_basis(n_fiber + 1)
    L = np.asarray(L, dtype=float)[..., None, None, None, None]
    K = np.asarray(K, dtype=float)[..., None, None, None, None]
    return L * radial + K * spherical


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


@singledispatch
def curvature_field(state) -> tuple[Metric, np.ndarray]:
    """Metric and curvature tensor at every sample point (leading batch axis)."""
    raise TypeError(f"unsupported state type {type(state).__name__}")


@curvature_field.register
def _(state: SpaceFormState):
    check_state(state)
    g = state.scale_sq * np.eye(state.n)
    Rm = 0.5 * state.kappa * kulkarni_nomizu(g, g)
    return Metric(value=g[None], inverse=(np.eye(state.n) / state.scale_sq)[None]), Rm[None]


@curvature_field.register
def _(state: ProductSphereState):
    check_state(state)
    n = state.n
    P1 = np.diag([1.0] * state.p + [0.0] * state.q)
    P2 = np.eye(n) - P1
    Rm = 0.5 / state.r1sq * kulkarni_nomizu(P1, P1) + 0.5 / state.r2sq * kulkarni_nomizu(P2, P2)
    return Metric.identity(n), Rm[None]


@curvature_field.register
def _(state: HomogeneousState):
    check_state(state)
    Rm = np.zeros((3, 3, 3, 3))
    for (i, j), K in milnor_sectional(state).items():
        Rm += K * _plane(3, i, j)
    return Metric.identity(3), Rm[None]


@curvature_field.register
def _(state: WarpedSphereState):
    check_state(state)
    L, K = warped_sectional(state)
    return Metric.identity(state.n), warped_curvature_tensor(state.n_fiber, L, K)


def curvature_at(state, location: int | None = None) -> tuple[Metric, np.ndarray]:
    """Metric and curvature tensor at one point.

    ``location`` is an interior grid index for warped states and is ignored
    for the homogeneous families. Poles are rejected; use ``pole_limits``.
    """
    if isinstance(state, WarpedSphereState):
        if location is None or not (1 <= location <= state.M - 1):
            raise InvalidLocation(f"warped states need an interior grid index in [1, {state.M - 1}], got {location}")
        check_state(state)
        L, K = _interior_sectional(state)
        return Metric.identity(state.n), warped_curvature_tensor(state.n_fiber, L[location - 1], K[location - 1])
    g, Rm = curvature_field(state)
    gv = g.value[0] if g.value.ndim == 3 else g.value
    gi = g.inverse[0] if g.inverse.ndim == 3 else g.inverse
    return Metric(value=gv, inverse=gi), Rm[0]


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


@singledispatch
def flow_vector_field(state) -> np.ndarray:
    """Time derivative of ``state_to_array(state)`` under Ricci flow."""
    raise TypeError(f"unsupported state type {type(state).__name__}")


@flow_vector_field.register
def _(state: SpaceFormState):
    check_state(state)
    return np.array([-2.0 * (state.n - 1)])


@flow_vector_field.register
def _(state: ProductSphereState):
    check_state(state)
    return np.array([-2.0 * (state.p - 1), -2.0 * (state.q - 1)])


@flow_vector_field.register
def _(state: HomogeneousState):
    check_state(state)
    r = milnor_ricci(state)
    return -2.0 * np.array([state.A, state.B, state.C]) * r


def _gauge_potential(state: WarpedSphereState, L: np.ndarray, K: np.ndarray) -> np.ndarray:
    """``E = eta / psi`` for the tangential field ``eta d/ds`` that keeps ``phi/psi`` fixed.

    Holding ``phi/psi`` fixed in time forces ``(eta/psi)_x = (k-1)(L-K) phi/psi``.
    The free constant is split evenly between the poles, which keeps
    reflection-symmetric data symmetric.
    """
    k = state.n_fiber
    G = np.zeros(state.M + 1)
    G[1:-1] = (k - 1) * (L[1:-1] - K[1:-1]) * state.phi[1:-1] / state.psi[1:-1]
    I = cumulative_simpson(G, dx=state.dx, initial=0.0)
    return I - 0.5 * I[-1]


def _pole_extrapolate(f: np.ndarray) -> np.ndarray:
    """Overwrite pole entries of an even function from the first two interior nodes."""
    f[0] = (4.0 * f[1] - f[2]) / 3.0
    f[-1] = (4.0 * f[-2] - f[-3]) / 3.0
    return f


def _warped_log_rate(state: WarpedSphereState):
    psi_s, _ = warped_derivatives(state)
    L, K = warped_sectional(state)
    E = _gauge_potential(state, L, K)
    v_t = _pole_extrapolate(-L - (state.n_fiber - 1) * K + E * psi_s)
    return v_t, psi_s, L, K, E


@flow_vector_field.register
def _(state: WarpedSphereState):
    """Ricci flow plus a tangential diffeomorphism that holds ``phi/psi`` fixed.

    Both functions then share one logarithmic rate ``v_t``, which is a
    parabolic equation for the conformal factor. In the conformal gauge
    ``phi = pi psi / sin(pi x)`` the arclength spacing near a neck scales
    with the neck radius, so a pinching neck stays resolved on a fixed grid.
    The pole rate is extrapolated (``v_t`` is even about each pole).
    """
    check_state(state)
    v_t = _warped_log_rate(state)[0]
    return np.concatenate([state.phi * v_t, state.psi * v_t])


@singledispatch
def metric_rate(state, deriv: np.ndarray) -> np.ndarray:
    """``dg/dt`` induced by ``deriv``, in the frame used by ``curvature_field``.

    For warped states the Lie derivative of the gauge field is removed, so
    the result is the Ricci-flow part of the metric velocity.
    """
    raise TypeError(f"unsupported state type {type(state).__name__}")


@metric_rate.register
def _(state: SpaceFormState, deriv):
    return (deriv[0] * np.eye(state.n))[None]


@metric_rate.register
def _(state: ProductSphereState, deriv):
    return np.diag([deriv[0] / state.r1sq] * state.p + [deriv[1] / state.r2sq] * state.q)[None]


@metric_rate.register
def _(state: HomogeneousState, deriv):
    return np.diag(np.asarray(deriv) / np.array([state.A, state.B, state.C]))[None]


@metric_rate.register
def _(state: WarpedSphereState, deriv):
    m = state.M + 1
    phi_t, psi_t = np.asarray(deriv[:m]), np.asarray(deriv[m:])
    _, psi_s, L, K, E = _warped_log_rate(state)
    k = state.n_fiber
    inner = slice(1, -1)
    # Lie derivative of g along eta d/ds: 2 eta_s radially, 2 eta psi_s / psi on the fiber
    radial = np.empty(m)
    radial[inner] = 2.0 * phi_t[inner] / state.phi[inner] - 2.0 * (
        E[inner] * psi_s[inner] + (k - 1) * (L[inner] - K[inner])
    )
    fiber = np.empty(m)
    fiber[inner] = 2.0 * psi_t[inner] / state.psi[inner] - 2.0 * E[inner] * psi_s[inner]
    _pole_extrapolate(radial)
    _pole_extrapolate(fiber)

    out = np.zeros((m, state.n, state.n))
    out[:, 0, 0] = radial
    idx = np.arange(1, state.n)
    out[:, idx, idx] = fiber[:, None]
    return out


# ---------------------------------------------------------------------------
# independent finite-difference oracle
# ---------------------------------------------------------------------------


def coordinate_curvature_oracle(metric_chart: Callable, point, h: float) -> np.ndarray:
    """Lowered curvature tensor from a coordinate expression of the metric.

    Christoffel symbols come from central differences of ``metric_chart``;
    the Riemann tensor from central differences of the Christoffel symbols.
    Second-order accurate in ``h``. Sign convention: ``Rm_{ijij}`` is the
    sectional curvature of the (i, j) coordinate plane times ``|e_i ^ e_j|^2``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x0 = np.asarray(point, dtype=float)
    n = x0.size
    eye = np.eye(n)

    def metric(x):
        g = np.asarray(metric_chart(x), dtype=float)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateMetric(f"metric chart is degenerate at {x}") from exc
        return g

    def christoffel(x):
        # dg[m, i, j] = d_m g_ij
        dg = np.array([(metric(x + h * eye[m]) - metric(x - h * eye[m])) / (2 * h) for m in range(n)])
        gi = np.linalg.inv(metric(x))
        # lowered[i, j, l] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        lowered = 0.5 * (dg + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg))
        return np.einsum("kl,ijl->kij", gi, lowered)

    G = christoffel(x0)
    # dG[m, k, i, j] = d_m Gamma^k_ij
    dG = np.array([(christoffel(x0 + h * eye[m]) - christoffel(x0 - h * eye[m])) / (2 * h) for m in range(n)])
    # R^r_{s mu nu} = d_mu G^r_{nu s} - d_nu G^r_{mu s} + G^r_{mu l} G^l_{nu s} - G^r_{nu l} G^l_{mu s}
    Rup = (
        np.einsum("mrns->rsmn", dG)
        - np.einsum("nrms->rsmn", dG)
        + np.einsum("rml,lns->rsmn", G, G)
        - np.einsum("rnl,lms->rsmn", G, G)
    )
    return np.einsum("ar,rsmn->asmn", metric(x0), Rup)


def stereographic_sphere_metric(radius_sq: float = 1.0):
    """Round sphere of the given squared radius in a stereographic chart."""

    def chart(y):
        y = np.asarray(y, dtype=float)
        return 4.0 * radius_sq / (1.0 + y @ y) ** 2 * np.eye(y.size)

    return chart
