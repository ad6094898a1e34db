"""Projected gradient descent on sphere-valued grids and helix fitting."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solveh_banded

from .geometry import project_tangent
from .magnetization import Magnetization, normalize

__all__ = [
    "ColumnPreconditioner",
    "HelixFit",
    "HelixFitError",
    "MinimizeOptions",
    "MinimizeTrace",
    "fit_helix",
    "gradient",
    "minimize_sphere",
    "project_tangent",
]


@dataclass(frozen=True)
class MinimizeOptions:
    max_iters: int = 20000
    grad_tol: float = 1e-6
    step: float = 1e-2
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_halvings: int = 60
    bb: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (self.max_iters >= 0 and self.grad_tol > 0 and self.step > 0):
            raise ValueError("max_iters, grad_tol and step must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("Armijo constant must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.max_halvings < 1:
            raise ValueError("max_halvings must be positive")


@dataclass
class MinimizeTrace:
    energies: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    final: Magnetization | None = None
    converged: bool = False
    line_search_failed: bool = False

    @property
    def iterations(self) -> int:
        return len(self.energies) - 1

    @property
    def energy(self) -> float:
        return self.energies[-1]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "energy", "grad_norm", "step"])
            for k, (e, g, s) in enumerate(zip(self.energies, self.grad_norms, self.steps)):
                w.writerow([k, repr(e), repr(g), repr(s)])

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "energy": self.energy,
            "grad_norm": self.grad_norms[-1],
            "converged": self.converged,
            "line_search_failed": self.line_search_failed,
        }


def gradient(m, energy, terms=None) -> np.ndarray:
    """Derivative of the selected energy terms per unit cell volume."""
    return energy.gradient(m, terms)


def _as_closure(energy):
    if hasattr(energy, "value_and_gradient"):
        return energy.value_and_gradient, energy.value, getattr(energy, "vol", 1.0)
    if callable(energy):
        return energy, lambda m: energy(m)[0], 1.0
    raise TypeError("energy must be a DiscreteEnergy or a callable m -> (E, grad)")


def _sup_norm(v) -> float:
    return float(np.sqrt(np.max(np.sum(v * v, axis=-1))))


class ColumnPreconditioner:
    """Tangent-frame Sobolev preconditioner for column grids.

    Tangent vectors are expressed in a per-cell orthonormal frame ``(t1, t2)``
    with ``t1`` the projection of a reference axis; the frame coefficients are
    smoothed with ``(L + sigma I)^-1``, ``L`` the tridiagonal exchange operator
    of ``energy``.  Working in a frame (rather than on Cartesian components)
    keeps rotating textures such as helices from being averaged out.
    """

    def __init__(self, energy, sigma: float = 1.0):
        if energy.dims[:2] != (1, 1):
            raise ValueError("the column preconditioner needs nx = ny = 1")
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        n = energy.dims[2]
        ex = energy.with_terms(("exchange",))
        diag = np.zeros(n)
        off = np.zeros(max(n - 1, 0))
        # bands of the tridiagonal operator from three interleaved probes
        for c in range(3):
            v = np.zeros((1, 1, n, 3))
            v[0, 0, c::3, 0] = 1.0
            Lv = ex.gradient(v)[0, 0, :, 0]
            diag[c::3] = Lv[c::3]
            k = np.arange(c, n, 3)
            k = k[k >= 1] - 1
            off[k] = Lv[k]
        self.n = n
        self.diag = diag + sigma
        self.off = off
        self.ab = np.zeros((2, n))
        self.ab[0, 1:] = off
        self.ab[1] = self.diag

    def frame(self, m) -> np.ndarray:
        """Orthonormal tangent frames, shape (n, 2, 3)."""
        m = np.asarray(m, dtype=float).reshape(self.n, 3)
        # reference axis: the direction the field points along least
        w, V = np.linalg.eigh(m.T @ m)
        ref = V[:, 0]
        t1 = ref - (m @ ref)[:, None] * m
        norm = np.linalg.norm(t1, axis=1)
        bad = norm < 0.3
        if np.any(bad):
            alt = V[:, 1] - (m[bad] @ V[:, 1])[:, None] * m[bad]
            t1[bad] = alt
            norm[bad] = np.linalg.norm(alt, axis=1)
        t1 /= norm[:, None]
        t2 = np.cross(m, t1)
        return np.stack([t1, t2], axis=1)

    def _band_solve(self, c):
        return solveh_banded(self.ab, c)

    def _band_apply(self, c):
        out = self.diag[:, None] * c
        out[:-1] += self.off[:, None] * c[1:]
        out[1:] += self.off[:, None] * c[:-1]
        return out

    def solve(self, g, m) -> np.ndarray:
        F = self.frame(m)
        c = np.einsum("nkj,nj->nk", F, np.asarray(g, dtype=float).reshape(self.n, 3))
        return np.einsum("nkj,nk->nj", F, self._band_solve(c)).reshape(np.shape(g))

    def apply(self, v, m) -> np.ndarray:
        F = self.frame(m)
        c = np.einsum("nkj,nj->nk", F, np.asarray(v, dtype=float).reshape(self.n, 3))
        return np.einsum("nkj,nk->nj", F, self._band_apply(c)).reshape(np.shape(v))


def minimize_sphere(
    energy, m0: Magnetization, opts: MinimizeOptions | None = None, preconditioner=None
) -> MinimizeTrace:
    """Minimize ``energy`` over unit-vector grids starting at ``m0``.

    Each step moves along the negative tangential gradient (optionally mapped
    through a symmetric positive definite ``preconditioner``) and renormalizes;
    the step is a Barzilai-Borwein guess reduced by Armijo backtracking on the
    true energy, so accepted energies never increase.
    """
    opts = opts or MinimizeOptions()
    vg, val, vol = _as_closure(energy)
    P = preconditioner
    m = np.array(m0.m, dtype=float)
    E, g = vg(m)
    pg = project_tangent(m, g)
    gn = _sup_norm(pg)
    trace = MinimizeTrace([E], [gn], [0.0])
    tau = opts.step
    prev = None
    while gn > opts.grad_tol and trace.iterations < opts.max_iters:
        d = pg if P is None else P.solve(pg, m)
        if opts.bb and prev is not None:
            s = m - prev[0]
            y = pg - prev[1]
            sy = float(np.sum(s * y))
            if sy > 0 and math.isfinite(sy):
                tau = float(np.sum(s * (s if P is None else P.apply(s, m)))) / sy
            else:
                tau = 2.0 * tau
        # first-order decrease of the retracted step is tau * <P_tan g, d>
        slope = vol * float(np.sum(pg * d))
        for _ in range(opts.max_halvings):
            trial = normalize(m - tau * d)
            E_trial = val(trial)
            if E_trial <= E - opts.armijo_c * tau * slope:
                break
            tau *= opts.backtrack
        else:
            trace.line_search_failed = True
            break
        prev = (m, pg)
        m = trial
        E, g = vg(m)
        pg = project_tangent(m, g)
        gn = _sup_norm(pg)
        trace.energies.append(E)
        trace.grad_norms.append(gn)
        trace.steps.append(tau)
    trace.converged = gn <= opts.grad_tol
    trace.final = Magnetization(m, m0.h)
    return trace


# --------------------------------------------------------------------------- helix fitting


class HelixFitError(ValueError):
    pass


@dataclass(frozen=True)
class HelixFit:
    theta0: float
    q: float
    rms_residual: float
    max_out_of_plane: float

    def to_dict(self) -> dict:
        return {
            "theta0": self.theta0,
            "q": self.q,
            "rms_residual": self.rms_residual,
            "max_out_of_plane": self.max_out_of_plane,
        }


def fit_helix(mag: Magnetization) -> HelixFit:
    """Least-squares fit of the unwrapped in-plane angle to ``theta0 + q x3``."""
    if mag.dims[:2] != (1, 1):
        raise HelixFitError("helix fitting needs a column grid (nx = ny = 1)")
    col = mag.m[0, 0]
    inplane = np.hypot(col[:, 0], col[:, 1])
    if np.any(inplane < 0.5):
        k = int(np.argmin(inplane))
        raise HelixFitError(f"in-plane magnitude {inplane[k]:.3f} < 0.5 at cell {k}: phase undefined")
    x3 = (np.arange(len(col)) + 0.5) * mag.h
    theta = np.unwrap(np.arctan2(col[:, 1], col[:, 0]))
    if len(col) == 1:
        q, c = 0.0, float(theta[0])
    else:
        q, c = np.polyfit(x3, theta, 1)
    res = theta - (q * x3 + c)
    return HelixFit(
        theta0=float(np.mod(c, 2 * np.pi)),
        q=float(q),
        rms_residual=float(np.sqrt(np.mean(res * res))),
        max_out_of_plane=float(np.max(np.abs(col[:, 2]))),
    )
