"""Whole-space stray field of a cellwise-constant magnetization.

The field of a uniformly magnetized cubic cell is known in closed form: it is
the field of two oppositely charged plates per magnetization component.  The
field of a grid magnetization is the discrete convolution of that cell kernel
with ``M m``; it is evaluated by FFT on a zero-padded box so that the periodic
wrap-around of the FFT never couples two cells of the domain (free space).
The kernel is symmetric in its two indices and even in the offset, so the
discrete field operator is self-adjoint and ``-h_d . (M m)`` is a positive
quadratic form.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

FOUR_PI = 4.0 * np.pi


def _log_plus(u, v, w, r):
    # ln(u + r) with r = |(u, v, w)|, stable when u < 0
    return np.where(u >= 0, np.log(np.maximum(u + r, 1e-300)), np.log((v * v + w * w) / (r - u)))


def plate_field(x, y, z, ax, ay):
    """Field of a unit positive surface charge on ``[-ax/2, ax/2] x [-ay/2, ay/2] x {0}``.

    Requires ``z != 0`` (points off the plate plane).
    """
    hx = np.zeros(np.broadcast(x, y, z).shape)
    hy = np.zeros_like(hx)
    hz = np.zeros_like(hx)
    for i, sx in enumerate((-0.5, 0.5)):
        for j, sy in enumerate((-0.5, 0.5)):
            xi = x - sx * ax
            yj = y - sy * ay
            r = np.sqrt(xi * xi + yj * yj + z * z)
            sgn = (-1.0) ** (i + j)
            hz += sgn * np.arctan(xi * yj / (z * r))
            hx += sgn * _log_plus(yj, xi, z, r)
            hy += sgn * _log_plus(xi, yj, z, r)
    return -hx / FOUR_PI, -hy / FOUR_PI, hz / FOUR_PI


# plate in-plane axes (u, v) and normal w for a magnetization along axis j
_PERM = {0: (1, 2, 0), 1: (2, 0, 1), 2: (0, 1, 2)}


def cell_tensor(offsets, h: float) -> np.ndarray:
    """Field at ``offsets`` (..., 3) of a unit cube cell of side ``h`` magnetized along each axis.

    Returns ``K[..., i, j]``: component ``i`` of the field for magnetization ``e_j``.
    """
    R = np.moveaxis(np.asarray(offsets, dtype=float), -1, 0)
    K = np.zeros(R.shape[1:] + (3, 3))
    for j in range(3):
        u, v, w = _PERM[j]
        for sign, shift in ((1.0, 0.5 * h), (-1.0, -0.5 * h)):
            # charge +1 on the face at +h/2, -1 at -h/2
            fu, fv, fw = plate_field(R[u], R[v], R[w] - shift, h, h)
            K[..., u, j] += sign * fu
            K[..., v, j] += sign * fv
            K[..., w, j] += sign * fw
    return 0.5 * (K + np.swapaxes(K, -1, -2))


def padded_shape(dims, padding: int = 2) -> tuple[int, ...]:
    if padding < 2:
        raise ValueError(f"padding factor must be >= 2 for a free-space field, got {padding}")
    # a dimension of one cell only couples to itself
    return tuple(1 if n == 1 else int(padding) * int(n) for n in dims)


@lru_cache(maxsize=16)
def _kernel_hat(dims: tuple[int, int, int], h: float, padding: int) -> np.ndarray:
    shape = padded_shape(dims, padding)
    axes = [np.fft.fftfreq(n, 1.0 / n) * h for n in shape]
    R = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    K = cell_tensor(R, h)
    Khat = np.fft.rfftn(K, s=shape, axes=(0, 1, 2))
    Khat.setflags(write=False)
    return Khat


def _as_msat(msat, dims) -> np.ndarray:
    msat = np.asarray(msat, dtype=float)
    if msat.ndim == 0:
        return np.full(dims, float(msat))
    if msat.shape != tuple(dims):
        raise ValueError(f"msat shape {msat.shape} does not match grid {tuple(dims)}")
    return msat


def stray_field(m, msat, h: float, padding: int = 2) -> np.ndarray:
    """Stray field ``h_d`` on the grid generated by ``msat * m`` extended by zero."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 4 or m.shape[-1] != 3:
        raise ValueError("m must have shape (nx, ny, nz, 3)")
    dims = m.shape[:3]
    shape = padded_shape(dims, padding)
    M = _as_msat(msat, dims)[..., None] * m
    if not np.all(np.isfinite(M)):
        raise ValueError("non-finite magnetization")
    if not h > 0:
        raise ValueError("cell size must be positive")
    Khat = _kernel_hat(tuple(int(n) for n in dims), float(h), int(padding))
    Mhat = np.fft.rfftn(M, s=shape, axes=(0, 1, 2))
    Hhat = np.einsum("...ij,...j->...i", Khat, Mhat)
    H = np.fft.irfftn(Hhat, s=shape, axes=(0, 1, 2))
    return np.ascontiguousarray(H[: dims[0], : dims[1], : dims[2]])


def direct_sum_field(m, msat, h: float) -> np.ndarray:
    """Stray field by explicit pairwise summation over all cells (O(N^2), small grids only)."""
    m = np.asarray(m, dtype=float)
    dims = m.shape[:3]
    M = (_as_msat(msat, dims)[..., None] * m).reshape(-1, 3)
    idx = np.stack(np.meshgrid(*[np.arange(n) for n in dims], indexing="ij"), axis=-1).reshape(-1, 3)
    out = np.zeros_like(M)
    for p in range(len(idx)):
        K = cell_tensor((idx[p] - idx) * h, h)
        out[p] = np.einsum("kij,kj->i", K, M)
    return out.reshape(m.shape)


def uniform_average_tensor(dims, h: float) -> np.ndarray:
    """Volume-averaged field tensor of a uniformly magnetized box of ``dims`` cells.

    Direct pairwise sum regrouped by offset: each offset ``d`` occurs
    ``prod(n_k - |d_k|)`` times, so the cost is O(prod(2 n_k - 1)) kernel calls.
    """
    rng = [np.arange(-(n - 1), n) for n in dims]
    D = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1)
    mult = np.prod([n - np.abs(D[..., k]) for k, n in enumerate(dims)], axis=0).astype(float)
    K = cell_tensor(D * h, h)
    return np.tensordot(mult, K, axes=mult.ndim) / float(np.prod(dims))


def stray_energy(m, msat, h: float, mu0: float = 1.0, padding: int = 2, field=None) -> float:
    """``-mu0/2 sum h_d . (M m) h^3``."""
    if field is None:
        field = stray_field(m, msat, h, padding)
    M = _as_msat(msat, np.shape(m)[:3])
    return float(-0.5 * mu0 * np.sum(field * (M[..., None] * m)) * h**3)
