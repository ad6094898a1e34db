"""Unit-vector fields on a box grid, finite differences and file formats.

Gradients use the convention ``(grad m)[i, j] = d_i m_j``.  Each cell is split
into two halves per direction; a half cell takes the difference quotient of
the face it touches, and a boundary cell's outer half copies its only face
(free boundary).  ``lo[..., i, :]`` and ``hi[..., i, :]`` are the half-cell
gradients along direction ``i``; their mean is the cell gradient.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NORM_TOL = 1e-12
GRID_MAGIC = b"MAGGRID1"


class MagnetizationError(ValueError):
    pass


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0) or not np.all(np.isfinite(n)):
        raise MagnetizationError("cannot normalize zero or non-finite vectors")
    return v / n


@dataclass(frozen=True)
class Magnetization:
    """Cellwise unit vectors ``m`` of shape (nx, ny, nz, 3) on cubic cells of side ``h``."""

    m: np.ndarray
    h: float

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.ndim != 4 or m.shape[-1] != 3 or min(m.shape[:3]) < 1:
            raise MagnetizationError(f"m must have shape (nx, ny, nz, 3), got {m.shape}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise MagnetizationError("cell size must be positive and finite")
        dev = np.abs(np.linalg.norm(m, axis=-1) - 1.0)
        if not np.all(np.isfinite(dev)) or dev.max() > NORM_TOL:
            raise MagnetizationError(f"|m| deviates from 1 by {np.nanmax(dev):.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_vectors(cls, v, h: float) -> "Magnetization":
        """Normalize arbitrary nonzero vectors."""
        return cls(normalize(v), h)

    @classmethod
    def uniform(cls, dims, h: float, direction=(0.0, 0.0, 1.0)) -> "Magnetization":
        d = normalize(direction)
        return cls(np.broadcast_to(d, tuple(dims) + (3,)).copy(), h)

    @classmethod
    def random(cls, dims, h: float, seed) -> "Magnetization":
        """iid uniform directions on the sphere."""
        rng = np.random.default_rng(seed)
        return cls.from_vectors(rng.standard_normal(tuple(dims) + (3,)), h)

    @classmethod
    def helix(cls, dims, h: float, q: float, theta0: float = 0.0) -> "Magnetization":
        """``(cos(theta0 + q x3), sin(theta0 + q x3), 0)`` at cell centres."""
        dims = tuple(dims)
        x3 = (np.arange(dims[2]) + 0.5) * h
        t = theta0 + q * x3
        col = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1)
        return cls(np.broadcast_to(col, dims + (3,)).copy(), h)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.m.shape[:3])

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=float) * self.h

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def cell_centers(self) -> np.ndarray:
        axes = [(np.arange(n) + 0.5) * self.h for n in self.dims]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def with_values(self, m) -> "Magnetization":
        return Magnetization(m, self.h)

    def rotated_about_e3(self, alpha: float) -> "Magnetization":
        c, s = np.cos(alpha), np.sin(alpha)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return Magnetization.from_vectors(self.m @ R.T, self.h)

    # ------------------------------------------------------------------ io

    def save(self, path) -> None:
        write_grid(path, self.m, self.h)

    @classmethod
    def load(cls, path) -> "Magnetization":
        m, h = read_grid(path)
        return cls(m, h)

    def to_csv(self, path) -> None:
        if self.dims[:2] != (1, 1):
            raise MagnetizationError("CSV export is for 1D columns (nx = ny = 1)")
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x3", "m1", "m2", "m3"])
            for k in range(self.dims[2]):
                v = self.m[0, 0, k]
                w.writerow([repr((k + 0.5) * self.h)] + [repr(float(c)) for c in v])

    @classmethod
    def from_csv(cls, path) -> "Magnetization":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if len(rows) < 1:
            raise MagnetizationError("empty CSV")
        x3 = np.array([float(r["x3"]) for r in rows])
        m = np.array([[float(r["m1"]), float(r["m2"]), float(r["m3"])] for r in rows])
        h = 2.0 * x3[0] if len(x3) == 1 else float(x3[1] - x3[0])
        return cls(m.reshape(1, 1, -1, 3), h)


def write_grid(path, m, h: float) -> None:
    """Binary grid: magic, three little-endian int64 dims, float64 h, then C-order float64 triples."""
    m = np.ascontiguousarray(m, dtype="<f8")
    if m.ndim != 4 or m.shape[-1] != 3:
        raise MagnetizationError("grid payload must have shape (nx, ny, nz, 3)")
    with Path(path).open("wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<3qd", *m.shape[:3], float(h)))
        fh.write(m.tobytes(order="C"))


def read_grid(path) -> tuple[np.ndarray, float]:
    data = Path(path).read_bytes()
    head = len(GRID_MAGIC) + struct.calcsize("<3qd")
    if len(data) < head or data[: len(GRID_MAGIC)] != GRID_MAGIC:
        raise MagnetizationError(f"{path}: not a magnetization grid file")
    nx, ny, nz, h = struct.unpack("<3qd", data[len(GRID_MAGIC) : head])
    expected = head + 8 * 3 * nx * ny * nz
    if len(data) != expected:
        raise MagnetizationError(f"{path}: payload size {len(data) - head} does not match dims")
    m = np.frombuffer(data, dtype="<f8", offset=head).reshape(nx, ny, nz, 3).astype(float)
    return m, h


# --------------------------------------------------------------------------- finite differences


def face_diff(m, axis: int, h: float) -> np.ndarray:
    """Difference quotients on the interior faces normal to ``axis``."""
    return np.diff(m, axis=axis) / h


def face_diff_T(g, axis: int, h: float, n: int) -> np.ndarray:
    """Adjoint of :func:`face_diff` (maps face values back to ``n`` cells)."""
    shape = list(g.shape)
    shape[axis] = 1
    z = np.zeros(shape)
    return (np.concatenate([z, g], axis=axis) - np.concatenate([g, z], axis=axis)) / h


def _take(a, axis, sl):
    idx = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def half_gradients(m, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper half-cell gradients, each of shape dims + (3, 3)."""
    m = np.asarray(m, dtype=float)
    dims = m.shape[:3]
    lo = np.zeros(dims + (3, 3))
    hi = np.zeros(dims + (3, 3))
    for i in range(3):
        if dims[i] < 2:
            continue
        G = face_diff(m, i, h)
        lo[..., i, :] = np.concatenate([_take(G, i, slice(0, 1)), G], axis=i)
        hi[..., i, :] = np.concatenate([G, _take(G, i, slice(-1, None))], axis=i)
    return lo, hi


def half_gradients_T(d_lo, d_hi, h: float) -> np.ndarray:
    """Adjoint of :func:`half_gradients`: cotangents of (lo, hi) to a cotangent of m."""
    dims = d_lo.shape[:3]
    out = np.zeros(dims + (3,))
    for i in range(3):
        n = dims[i]
        if n < 2:
            continue
        dl = d_lo[..., i, :]
        dh = d_hi[..., i, :]
        # lo[k] = G[k-1] (k >= 1), lo[0] = G[0];  hi[k] = G[k] (k <= n-2), hi[n-1] = G[n-2]
        dG = _take(dl, i, slice(1, None)) + _take(dh, i, slice(0, n - 1))
        first = [slice(None)] * dG.ndim
        first[i] = slice(0, 1)
        last = [slice(None)] * dG.ndim
        last[i] = slice(n - 2, n - 1)
        dG[tuple(first)] += _take(dl, i, slice(0, 1))
        dG[tuple(last)] += _take(dh, i, slice(n - 1, n))
        out += face_diff_T(dG, i, h, n)
    return out


def cell_gradient(m, h: float) -> np.ndarray:
    lo, hi = half_gradients(m, h)
    return 0.5 * (lo + hi)


def curl(m, h: float) -> np.ndarray:
    """Cellwise curl from the cell gradient: ``curl_k = eps_kij d_i m_j``."""
    g = cell_gradient(m, h)
    return np.stack(
        [g[..., 1, 2] - g[..., 2, 1], g[..., 2, 0] - g[..., 0, 2], g[..., 0, 1] - g[..., 1, 0]],
        axis=-1,
    )
