"""Random tensors and small oracles shared by the test modules."""

import numpy as np

from ricci_pinch import curvature_algebra as ca


def random_metric(rng, n, batch=()):
    A = rng.normal(size=batch + (n, n))
    return np.einsum("...ij,...kj->...ik", A, A) + n * np.eye(n)


def random_symmetric(rng, n, batch=()):
    A = rng.normal(size=batch + (n, n))
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def random_curvature(rng, n, batch=(), terms=3, weyl_scale=1.0):
    """Sums of Kulkarni-Nomizu products of random symmetric tensors, plus extra Weyl."""
    Rm = sum(ca.kulkarni_nomizu(random_symmetric(rng, n, batch), random_symmetric(rng, n, batch)) for _ in range(terms))
    if weyl_scale and n >= 4:
        extra = sum(ca.kulkarni_nomizu(random_symmetric(rng, n, batch), random_symmetric(rng, n, batch)) for _ in range(2))
        W = ca.decompose(extra, ca.Metric.identity(n)).W
        Rm = Rm + weyl_scale * W
    return Rm


def random_weyl(rng, n, batch=()):
    return ca.decompose(random_curvature(rng, n, batch, weyl_scale=0.0), ca.Metric.identity(n)).W


def random_trace_free(rng, n, batch=()):
    h = random_symmetric(rng, n, batch)
    return h - (np.trace(h, axis1=-2, axis2=-1) / n)[..., None, None] * np.eye(n)


def sphere_block(n):
    """Curvature of the unit round S^n in an orthonormal frame, built index by index."""
    Rm = np.zeros((n,) * 4)
    for i in range(n):
        for j in range(n):
            if i != j:
                Rm[i, j, i, j] = 1.0
                Rm[i, j, j, i] = -1.0
    return Rm


def product_curvature(p, q, r1sq, r2sq):
    """Block-diagonal curvature of S^p(r1) x S^q(r2), assembled from two sphere blocks."""
    n = p + q
    Rm = np.zeros((n,) * 4)
    Rm[:p, :p, :p, :p] = sphere_block(p) / r1sq
    Rm[p:, p:, p:, p:] = sphere_block(q) / r2sq
    return Rm
