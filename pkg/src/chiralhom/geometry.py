"""Small linear-algebra helpers on the unit sphere."""
from __future__ import annotations

import numpy as np


def chi(s) -> np.ndarray:
    """Matrix with rows ``e_i x s``; works on stacks (..., 3) -> (..., 3, 3)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape[:-1] + (3, 3))
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    # e1 x s = (0, -s3, s2), e2 x s = (s3, 0, -s1), e3 x s = (-s2, s1, 0)
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def tangent_basis(s) -> np.ndarray:
    """Two orthonormal vectors spanning the tangent plane of the sphere at ``s``."""
    s = np.asarray(s, dtype=float)
    trial = np.eye(3)[int(np.argmin(np.abs(s)))]
    t1 = trial - (trial @ s) * s
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(s, t1)
    return np.stack([t1, t2])


def check_tangent(s, A, tol=1e-10):
    s = np.asarray(s, dtype=float)
    A = np.asarray(A, dtype=float)
    if abs(np.linalg.norm(s) - 1.0) > 1e-10:
        raise ValueError("s must be a unit vector")
    if np.abs(A @ s).max() > tol:
        raise ValueError(f"rows of A are not tangent at s (max |A s| = {np.abs(A @ s).max():.3e})")


def project_tangent(m, g) -> np.ndarray:
    """Remove the component of ``g`` along ``m`` (cellwise, ``|m| = 1``)."""
    m = np.asarray(m, dtype=float)
    g = np.asarray(g, dtype=float)
    return g - np.sum(g * m, axis=-1, keepdims=True) * m


def random_unit_vectors(rng, shape) -> np.ndarray:
    v = rng.standard_normal(tuple(shape) + (3,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
