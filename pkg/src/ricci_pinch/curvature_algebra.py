"""Dense algebra of algebraic curvature tensors at a point.

Tensors are plain numpy arrays with every index lowered: symmetric
2-tensors have shape ``(..., n, n)`` and curvature tensors have shape
``(..., n, n, n, n)``. Leading axes are batch axes, so a whole grid of
points (or a batch of random samples) is processed in one call. Indices
are raised only inside contractions, using the cached inverse carried
by :class:`Metric`.

Norms are full metric contractions with no combinatorial prefactor,
``|A|^2 = A_{ijkl} A^{ijkl}``. This is the convention under which
``|F| = sqrt(n-2)/2 |V|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMetric, InvalidArgument, UnsupportedDimension

MAX_DIM = 8


@dataclass(frozen=True)
class Metric:
    """Positive-definite metric with its inverse, possibly batched."""

    value: np.ndarray
    inverse: np.ndarray = field(repr=False)
    orthonormal: bool = field(default=False, repr=False, compare=False)

    @classmethod
    def from_matrix(cls, value) -> "Metric":
        value = np.asarray(value, dtype=float)
        if value.ndim < 2 or value.shape[-1] != value.shape[-2]:
            raise InvalidArgument(f"metric must be square, got shape {value.shape}")
        if not np.allclose(value, np.swapaxes(value, -1, -2), rtol=1e-12, atol=1e-14):
            raise DegenerateMetric("metric is not symmetric")
        try:
            np.linalg.cholesky(value)
        except np.linalg.LinAlgError as exc:
            raise DegenerateMetric("metric is not positive definite") from exc
        eye = np.eye(value.shape[-1])
        return cls(value=value, inverse=np.linalg.inv(value), orthonormal=bool(np.all(value == eye)))

    @classmethod
    def identity(cls, n: int) -> "Metric":
        eye = np.eye(n)
        return cls(value=eye, inverse=eye.copy(), orthonormal=True)

    @property
    def n(self) -> int:
        return self.value.shape[-1]


def as_metric(g) -> Metric:
    return g if isinstance(g, Metric) else Metric.from_matrix(g)


def _dim(t: np.ndarray, rank: int) -> int:
    t = np.asarray(t)
    if t.ndim < rank or len(set(t.shape[-rank:])) != 1:
        raise InvalidArgument(f"expected a rank-{rank} tensor with equal index ranges, got shape {t.shape}")
    return t.shape[-1]


def _check_same_dim(*pairs) -> int:
    dims = {_dim(t, rank) for t, rank in pairs}
    if len(dims) != 1:
        raise InvalidArgument(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def kulkarni_nomizu(h, k) -> np.ndarray:
    """Kulkarni-Nomizu product of two symmetric 2-tensors.

    ``(h ⊼ k)_{ijkl} = h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il``
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    _check_same_dim((h, 2), (k, 2))
    # S_ijkl = h_ik k_jl + h_jl k_ik; the two subtracted terms are S with k and l swapped
    S = h[..., :, None, :, None] * k[..., None, :, None, :] + k[..., :, None, :, None] * h[..., None, :, None, :]
    return S - np.swapaxes(S, -1, -2)


def raise_all(A: np.ndarray, g) -> np.ndarray:
    """Raise every index of a lowered rank-4 tensor."""
    g = as_metric(g)
    if g.orthonormal:
        return np.asarray(A, dtype=float)
    gi = g.inverse[..., None, None, :, :]
    out = np.asarray(A, dtype=float)
    # contract the last index, then rotate it to the front; four passes restore the order
    for _ in range(4):
        out = np.moveaxis(out @ gi, -1, -4)
    return out


def riemann_inner_product(A, B, g) -> np.ndarray | float:
    """Full contraction ``A_{ijkl} B_{pqrs} g^{ip} g^{jq} g^{kr} g^{ls}``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    g = as_metric(g)
    _check_same_dim((A, 4), (B, 4), (g.value, 2))
    return np.einsum("...ijkl,...ijkl->...", raise_all(A, g), B)


def riemann_norm(A, g):
    return np.sqrt(np.maximum(riemann_inner_product(A, A, g), 0.0))


def sym_inner_product(h, k, g):
    g = as_metric(g)
    gi = g.inverse
    _check_same_dim((h, 2), (k, 2), (g.value, 2))
    return np.einsum("...ij,...ip,...jq,...pq->...", h, gi, gi, k)


def sym_norm(h, g):
    return np.sqrt(np.maximum(sym_inner_product(h, h, g), 0.0))


def trace(h, g):
    g = as_metric(g)
    _check_same_dim((h, 2), (g.value, 2))
    return np.einsum("...ij,...ij->...", g.inverse, h)


def ricci_from_riemann(Rm, g) -> np.ndarray:
    """``Rc_jl = g^{ik} Rm_{ijkl}``."""
    Rm = np.asarray(Rm, dtype=float)
    g = as_metric(g)
    _check_same_dim((Rm, 4), (g.value, 2))
    return np.einsum("...ik,...ijkl->...jl", g.inverse, Rm)


@dataclass(frozen=True)
class CurvatureDecomposition:
    """Irreducible pieces ``Rm = U + V + W`` and their norms."""

    R: np.ndarray
    Ric: np.ndarray
    F: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    normU: np.ndarray
    normV: np.ndarray
    normW: np.ndarray
    normF: np.ndarray
    normRm: np.ndarray


def decompose(Rm, g) -> CurvatureDecomposition:
    """Split a curvature tensor into scalar, trace-free Ricci and Weyl parts.

    ``U = R/(2n(n-1)) g⊼g`` and ``V = F⊼g/(n-2)``; the Weyl part is what is
    left over, so its trace-freeness is a checkable output. In dimension 3
    every algebraic curvature tensor is ``U + V``; the Weyl part is returned
    as exact zeros instead of rounding noise, and ``U + V`` reproduces a
    valid input.
    """
    Rm = np.asarray(Rm, dtype=float)
    g = as_metric(g)
    n = _check_same_dim((Rm, 4), (g.value, 2))
    if n < 3:
        raise UnsupportedDimension(f"decomposition needs n >= 3, got n = {n}")
    if n > MAX_DIM:
        raise UnsupportedDimension(f"dimensions above {MAX_DIM} are not supported, got n = {n}")

    gv = np.broadcast_to(g.value, Rm.shape[:-4] + (n, n))
    Ric = ricci_from_riemann(Rm, g)
    R = trace(Ric, g)
    F = Ric - (R / n)[..., None, None] * gv
    U = (R / (2.0 * n * (n - 1)))[..., None, None, None, None] * kulkarni_nomizu(gv, gv)
    V = kulkarni_nomizu(F, gv) / (n - 2)
    W = np.zeros_like(Rm) if n == 3 else Rm - U - V
    return CurvatureDecomposition(
        R=R,
        Ric=Ric,
        F=F,
        U=U,
        V=V,
        W=W,
        normU=riemann_norm(U, g),
        normV=riemann_norm(V, g),
        normW=riemann_norm(W, g),
        normF=sym_norm(F, g),
        normRm=riemann_norm(Rm, g),
    )


def tr_F_cubed(F, g):
    """``tr F^3 = F_i^j F_j^k F_k^i`` using the mixed form ``g^{-1} F``."""
    F = np.asarray(F, dtype=float)
    g = as_metric(g)
    _check_same_dim((F, 2), (g.value, 2))
    M = g.inverse @ F
    return np.einsum("...ij,...jk,...ki->...", M, M, M)


def weyl_quadratic(W, F, g):
    """``W(F, F) = W_{ijkl} F^{il} F^{jk}``."""
    W = np.asarray(W, dtype=float)
    F = np.asarray(F, dtype=float)
    g = as_metric(g)
    _check_same_dim((W, 4), (F, 2), (g.value, 2))
    gi = g.inverse
    Fup = gi @ F @ gi
    return np.einsum("...ijkl,...il,...jk->...", W, Fup, Fup)


def cubic_bound_constant(n: int) -> float:
    """Sharp constant in ``|tr F^3| <= k_n |F|^3`` for trace-free ``F``."""
    return (n - 2) / np.sqrt(n * (n - 1))


def change_basis(Rm, g, P):
    """Express ``(g, Rm)`` in the basis given by the columns of ``P``."""
    P = np.asarray(P, dtype=float)
    g = as_metric(g).value
    g2 = np.einsum("ai,bj,...ab->...ij", P, P, g)
    Rm2 = np.einsum("ai,bj,ck,dl,...abcd->...ijkl", P, P, P, P, Rm, optimize=True)
    return g2, Rm2
