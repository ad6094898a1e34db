"""Random coefficient fields: phase laws, laminates, checkerboards, moments.

Two stationary generators are provided:

* an equilibrium renewal laminate along ``e3`` (layers of iid phases with
  fixed or exponential widths; the layer covering the origin is drawn
  length-biased and the origin placed uniformly inside it), and
* an iid cubic lattice with a uniform random offset (3D checkerboard).

All generators are pure functions of their inputs and a seed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

QUANTITIES = ("a", "inv_a", "kappa", "kappa_over_a", "kappa2_over_a", "msat", "msat2")
WIDTH_LAWS = ("fixed", "exponential")


class MicrostructureError(ValueError):
    """Invalid phase data, laminate specification or evaluation request."""


@dataclass(frozen=True)
class Bounds:
    """Uniform bounds on the coefficients: c_ex <= a <= C_ex, |kappa| <= C_dmi, 0 <= m_sat <= C_sat."""

    c_ex: float = 1e-12
    C_ex: float = math.inf
    C_dmi: float = math.inf
    C_sat: float = math.inf

    def __post_init__(self):
        if not (self.c_ex > 0):
            raise MicrostructureError(f"c_ex must be positive, got {self.c_ex}")
        if not (self.C_ex >= self.c_ex):
            raise MicrostructureError("C_ex must be >= c_ex")
        if not (self.C_dmi >= 0 and self.C_sat >= 0):
            raise MicrostructureError("C_dmi and C_sat must be nonnegative")


@dataclass(frozen=True)
class Phase:
    a: float
    kappa: float = 0.0
    m_sat: float = 0.0
    k1: float = 0.0
    easy_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    bounds: Bounds = field(default_factory=Bounds)

    def __post_init__(self):
        object.__setattr__(self, "easy_axis", tuple(float(c) for c in self.easy_axis))
        b = self.bounds
        vals = (self.a, self.kappa, self.m_sat, self.k1, *self.easy_axis)
        if not all(math.isfinite(v) for v in vals):
            raise MicrostructureError(f"non-finite phase parameter in {vals}")
        if not (b.c_ex <= self.a <= b.C_ex):
            raise MicrostructureError(f"exchange a={self.a} outside [{b.c_ex}, {b.C_ex}]")
        if abs(self.kappa) > b.C_dmi:
            raise MicrostructureError(f"|kappa|={abs(self.kappa)} exceeds C_dmi={b.C_dmi}")
        if not (0.0 <= self.m_sat <= b.C_sat):
            raise MicrostructureError(f"m_sat={self.m_sat} outside [0, {b.C_sat}]")
        if self.k1 < 0:
            raise MicrostructureError(f"k1 must be nonnegative, got {self.k1}")
        if len(self.easy_axis) != 3 or abs(math.sqrt(sum(c * c for c in self.easy_axis)) - 1.0) > 1e-12:
            raise MicrostructureError(f"easy_axis must be a unit 3-vector, got {self.easy_axis}")

    def quantity(self, name: str) -> float:
        return _quantity(name, self.a, self.kappa, self.m_sat)


def _quantity(name, a, kappa, msat):
    if name == "a":
        return a
    if name == "inv_a":
        return 1.0 / a
    if name == "kappa":
        return kappa
    if name == "kappa_over_a":
        return kappa / a
    if name == "kappa2_over_a":
        return kappa * kappa / a
    if name == "msat":
        return msat
    if name == "msat2":
        return msat * msat
    raise MicrostructureError(f"unknown quantity {name!r}; expected one of {QUANTITIES}")


@dataclass(frozen=True)
class PhaseTable:
    """The law of the random coefficients: a finite set of phases with probabilities."""

    phases: tuple[Phase, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if len(self.phases) == 0:
            raise MicrostructureError("phase table is empty")
        if len(self.phases) != len(self.probabilities):
            raise MicrostructureError("phases and probabilities differ in length")
        if any(not (p >= 0) for p in self.probabilities):
            raise MicrostructureError("probabilities must be nonnegative")
        total = math.fsum(self.probabilities)
        if abs(total - 1.0) > 1e-12:
            raise MicrostructureError(f"probabilities sum to {total!r}, not 1")

    def __len__(self):
        return len(self.phases)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)

    def values(self, name: str) -> np.ndarray:
        """Per-phase values of a tracked quantity."""
        return np.array([ph.quantity(name) for ph in self.phases])

    def column(self, attr: str) -> np.ndarray:
        return np.array([getattr(ph, attr) for ph in self.phases], dtype=float)

    def axis_tensors(self) -> np.ndarray:
        """Per-phase ``k1 * e (x) e`` as an array of shape (n_phases, 3, 3)."""
        e = np.array([ph.easy_axis for ph in self.phases])
        return self.column("k1")[:, None, None] * np.einsum("pi,pj->pij", e, e)

    def reweighted(self, weights: Sequence[float]) -> "PhaseTable":
        """Same phases under probabilities proportional to ``p_i * w_i``."""
        q = self.p * np.asarray(weights, dtype=float)
        q = q / q.sum()
        q[-1] = 1.0 - math.fsum(q[:-1])
        return PhaseTable(self.phases, tuple(q))


@dataclass(frozen=True)
class Moments:
    """Exact expectations of the coefficient random variables under a phase law."""

    mean_a: float
    mean_inv_a: float
    mean_kappa: float
    mean_kappa_over_a: float
    mean_kappa2_over_a: float
    mean_msat: float
    mean_msat2: float
    mean_k1: float
    mean_k1_axis: np.ndarray  # E[k1 e (x) e]

    @property
    def harmonic_a(self) -> float:
        return 1.0 / self.mean_inv_a

    def get(self, name: str) -> float:
        return {
            "a": self.mean_a,
            "inv_a": self.mean_inv_a,
            "kappa": self.mean_kappa,
            "kappa_over_a": self.mean_kappa_over_a,
            "kappa2_over_a": self.mean_kappa2_over_a,
            "msat": self.mean_msat,
            "msat2": self.mean_msat2,
        }[name]

    def anisotropy(self, s) -> np.ndarray:
        """Expected uniaxial density E[k1 (1 - (s.e)^2)] at direction(s) ``s`` (..., 3)."""
        s = np.asarray(s, dtype=float)
        return self.mean_k1 - np.einsum("...i,ij,...j->...", s, self.mean_k1_axis, s)

    def to_dict(self) -> dict:
        d = {q: self.get(q) for q in QUANTITIES}
        d["harmonic_a"] = self.harmonic_a
        d["k1"] = self.mean_k1
        d["k1_axis"] = self.mean_k1_axis.tolist()
        return d


def weighted_moments(weights, a, kappa, msat, k1, k1_axis) -> Moments:
    """Moments of per-sample coefficient arrays under normalized ``weights``."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    a = np.asarray(a, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    msat = np.asarray(msat, dtype=float)
    return Moments(
        mean_a=float(w @ a),
        mean_inv_a=float(w @ (1.0 / a)),
        mean_kappa=float(w @ kappa),
        mean_kappa_over_a=float(w @ (kappa / a)),
        mean_kappa2_over_a=float(w @ (kappa * kappa / a)),
        mean_msat=float(w @ msat),
        mean_msat2=float(w @ (msat * msat)),
        mean_k1=float(w @ np.asarray(k1, dtype=float)),
        mean_k1_axis=np.einsum("s,sij->ij", w, np.asarray(k1_axis, dtype=float)),
    )


def moments(table: PhaseTable) -> Moments:
    """Expectations under the phase law itself (per-layer / Palm convention)."""
    return weighted_moments(
        table.p,
        table.column("a"),
        table.column("kappa"),
        table.column("m_sat"),
        table.column("k1"),
        table.axis_tensors(),
    )


def variance(table: PhaseTable, name: str) -> float:
    v = table.values(name)
    mean = table.p @ v
    return float(table.p @ (v - mean) ** 2)


# --------------------------------------------------------------------------- laminates


@dataclass(frozen=True)
class LaminateSpec:
    table: PhaseTable
    widths: tuple[float, ...]
    width_law: str = "fixed"
    correlation: str = "independent"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if len(self.widths) != len(self.table):
            raise MicrostructureError("need one layer width per phase")
        if not all(math.isfinite(w) and w > 0 for w in self.widths):
            raise MicrostructureError(f"layer widths must be positive and finite, got {self.widths}")
        if self.width_law not in WIDTH_LAWS:
            raise MicrostructureError(f"width_law must be one of {WIDTH_LAWS}")
        if self.correlation != "independent":
            raise MicrostructureError("only independent-per-layer correlation is supported")

    @property
    def mean_width(self) -> float:
        return float(self.table.p @ np.asarray(self.widths))

    @property
    def min_width(self) -> float:
        return min(w for w, p in zip(self.widths, self.table.probabilities) if p > 0)

    def point_probabilities(self) -> np.ndarray:
        """Length-biased law of the phase found at a fixed location."""
        q = self.table.p * np.asarray(self.widths)
        return q / q.sum()

    def spatial_table(self) -> PhaseTable:
        """Phase law seen by spatial (Birkhoff) averages; equals the table for equal widths."""
        return self.table.reweighted(self.widths)


@dataclass(frozen=True)
class LaminateRealization:
    """One sampled layer sequence along e3, in unscaled (microscopic) coordinates."""

    breakpoints: np.ndarray
    phase_index: np.ndarray
    table: PhaseTable
    seed: int | None = None
    offset: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        idx = np.asarray(self.phase_index, dtype=np.int64)
        if b.ndim != 1 or idx.ndim != 1 or len(b) != len(idx) + 1 or len(idx) == 0:
            raise MicrostructureError("need len(breakpoints) == len(phase_index) + 1 >= 2")
        if np.any(np.diff(b) <= 0):
            raise MicrostructureError("breakpoints must be strictly increasing")
        if idx.min() < 0 or idx.max() >= len(self.table):
            raise MicrostructureError("phase index out of range")
        b.setflags(write=False)
        idx.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "phase_index", idx)

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def stop(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_layers(self) -> int:
        return len(self.phase_index)

    def locate(self, y) -> np.ndarray:
        """Layer index of microscopic coordinate(s) ``y`` (left-closed, right-open)."""
        y = np.asarray(y, dtype=float)
        if np.any(y < self.start) or np.any(y >= self.stop) or not np.all(np.isfinite(y)):
            raise MicrostructureError(f"coordinate outside realization window [{self.start}, {self.stop})")
        return np.searchsorted(self.breakpoints, y, side="right") - 1

    def cumulative(self, values_per_phase, y) -> np.ndarray:
        """Exact integral of a piecewise-constant per-phase quantity from ``start`` to ``y``."""
        v = np.asarray(values_per_phase, dtype=float)[self.phase_index]
        F = np.concatenate([[0.0], np.cumsum(v * np.diff(self.breakpoints))])
        y = np.asarray(y, dtype=float)
        if np.any(y < self.start - 1e-12 * max(1.0, abs(self.start))) or np.any(
            y > self.stop + 1e-12 * max(1.0, abs(self.stop))
        ):
            raise MicrostructureError("integration bound outside realization window")
        return np.interp(y, self.breakpoints, F)

    def cell_averages(self, values_per_phase, edges) -> np.ndarray:
        """Exact averages of a per-phase quantity over consecutive intervals ``edges``."""
        edges = np.asarray(edges, dtype=float)
        F = self.cumulative(values_per_phase, edges)
        return np.diff(F) / np.diff(edges)

    def merged(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints and phases with adjacent same-phase layers fused."""
        idx = self.phase_index
        keep = np.concatenate([[True], idx[1:] != idx[:-1]])
        b = np.concatenate([self.breakpoints[:-1][keep], [self.stop]])
        return b, idx[keep]

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["breakpoint", "phase_index", "a", "kappa", "m_sat"])
            for x, i in zip(self.breakpoints[:-1], self.phase_index):
                ph = self.table.phases[i]
                w.writerow([repr(float(x)), int(i), repr(ph.a), repr(ph.kappa), repr(ph.m_sat)])
            w.writerow([repr(self.stop), -1, "", "", ""])


def _draw_widths(rng, law, means):
    if law == "fixed":
        return np.asarray(means, dtype=float).copy()
    return rng.exponential(means)


def sample_laminate(spec: LaminateSpec, seed: int, window: float) -> LaminateRealization:
    """Sample an equilibrium renewal laminate covering ``[0, window]``."""
    if not (window > 0 and math.isfinite(window)):
        raise MicrostructureError(f"window must be positive and finite, got {window}")
    rng = np.random.default_rng(seed)
    table = spec.table
    widths = np.asarray(spec.widths)

    # layer covering the origin: phase ~ p_i w_i, width length-biased, origin uniform inside
    first = int(rng.choice(len(table), p=spec.point_probabilities()))
    if spec.width_law == "fixed":
        length = widths[first]
    else:
        length = rng.gamma(2.0, widths[first])
    u = rng.random()
    left = -u * length
    phases = [np.array([first])]
    lengths = [np.array([length])]
    reach = left + length
    batch = max(16, int(1.2 * window / spec.mean_width) + 16)
    while reach <= window:
        idx = rng.choice(len(table), size=batch, p=table.p)
        w = _draw_widths(rng, spec.width_law, widths[idx])
        phases.append(idx)
        lengths.append(w)
        reach += w.sum()
    idx = np.concatenate(phases)
    lens = np.concatenate(lengths)
    b = left + np.concatenate([[0.0], np.cumsum(lens)])
    # trim layers that start beyond the window
    n = int(np.searchsorted(b, window, side="right"))
    n = max(n, 1)
    return LaminateRealization(b[: n + 1], idx[:n], table, seed=seed, offset=float(u * length))


def eval_laminate(r: LaminateRealization, x3: float, eps: float) -> Phase:
    """Phase of the layer containing ``x3 / eps``."""
    if not eps > 0:
        raise MicrostructureError("eps must be positive")
    k = int(r.locate(x3 / eps))
    return r.table.phases[int(r.phase_index[k])]


def birkhoff_average(r: LaminateRealization, quantity: str, t: float) -> float:
    """Exact spatial average of ``quantity`` over ``[0, t]`` of the realization."""
    if not t > 0:
        raise MicrostructureError("averaging window must be positive")
    if t > r.stop or r.start > 0:
        raise MicrostructureError(f"window [0, {t}] not contained in [{r.start}, {r.stop}]")
    vals = r.table.values(quantity)
    F = r.cumulative(vals, [0.0, t])
    return float((F[1] - F[0]) / t)


def alternating_laminate(table: PhaseTable, widths, n_periods: int, start: float = 0.0) -> LaminateRealization:
    """Deterministic periodic laminate cycling through all phases in table order."""
    widths = np.asarray(widths, dtype=float)
    idx = np.tile(np.arange(len(table)), n_periods)
    b = start + np.concatenate([[0.0], np.cumsum(widths[idx])])
    return LaminateRealization(b, idx, table, seed=None, offset=-start)


# --------------------------------------------------------------------------- grid fields


@dataclass(frozen=True)
class GridField:
    """Per-cell coefficients on a periodic lattice of cubic cells of size ``h``."""

    a: np.ndarray
    kappa: np.ndarray
    msat: np.ndarray
    k1: np.ndarray
    easy_axis: np.ndarray
    h: float
    phase_index: np.ndarray | None = None
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 3 or min(a.shape) < 1:
            raise MicrostructureError("grid coefficients must be 3D arrays with every dimension >= 1")
        for name in ("kappa", "msat", "k1"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != a.shape:
                raise MicrostructureError(f"{name} shape {arr.shape} != {a.shape}")
            object.__setattr__(self, name, arr)
        axis = np.asarray(self.easy_axis, dtype=float)
        if axis.shape != a.shape + (3,):
            raise MicrostructureError("easy_axis must have shape dims + (3,)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "easy_axis", axis)
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))
        if not self.h > 0:
            raise MicrostructureError("cell size must be positive")
        if not (np.all(a > 0) and np.all(self.msat >= 0) and np.all(self.k1 >= 0)):
            raise MicrostructureError("grid coefficients violate a > 0, m_sat >= 0, k1 >= 0")
        if np.abs(np.linalg.norm(axis, axis=-1) - 1).max() > 1e-12:
            raise MicrostructureError("easy axes must be unit vectors")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.a.shape)

    @property
    def k1_axis(self) -> np.ndarray:
        e = self.easy_axis
        return self.k1[..., None, None] * e[..., :, None] * e[..., None, :]

    @classmethod
    def from_phase_indices(cls, table: PhaseTable, idx, h: float, **kw) -> "GridField":
        idx = np.asarray(idx, dtype=np.int64)
        if idx.ndim != 3:
            raise MicrostructureError("phase index array must be 3D")
        axis = np.array([ph.easy_axis for ph in table.phases])
        return cls(
            a=table.column("a")[idx],
            kappa=table.column("kappa")[idx],
            msat=table.column("m_sat")[idx],
            k1=table.column("k1")[idx],
            easy_axis=axis[idx],
            h=h,
            phase_index=idx,
            **kw,
        )

    def lookup(self, points) -> np.ndarray:
        """Flat cell indices containing microscopic ``points`` (..., 3), periodically extended."""
        pts = np.asarray(points, dtype=float)
        ijk = np.floor((pts - self.offset) / self.h).astype(np.int64) % np.asarray(self.dims)
        return np.ravel_multi_index(np.moveaxis(ijk, -1, 0), self.dims)

    def weights_moments(self) -> Moments:
        n = self.a.size
        return weighted_moments(
            np.full(n, 1.0 / n),
            self.a.ravel(),
            self.kappa.ravel(),
            self.msat.ravel(),
            self.k1.ravel(),
            self.k1_axis.reshape(n, 3, 3),
        )


def sample_checkerboard(table: PhaseTable, cell_size: float, dims, seed: int) -> GridField:
    """iid phases on a cubic lattice shifted by a uniform random offset."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise MicrostructureError(f"dims must be three integers >= 1, got {dims}")
    if not cell_size > 0:
        raise MicrostructureError("cell_size must be positive")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(table), size=dims, p=table.p)
    offset = rng.random(3) * cell_size
    return GridField.from_phase_indices(table, idx, cell_size, offset=offset, seed=seed)


def laminate_grid(table: PhaseTable, layer_phases, cells_per_layer: int, h: float, nxy=(1, 1)) -> GridField:
    """Grid-aligned laminate RVE: layers normal to e3, each ``cells_per_layer`` cells thick."""
    col = np.repeat(np.asarray(layer_phases, dtype=np.int64), cells_per_layer)
    idx = np.broadcast_to(col, (nxy[0], nxy[1], len(col))).copy()
    return GridField.from_phase_indices(table, idx, h)
