"""Corrector problems and the effective (homogenized) model.

The three corrector problems share the form ``div(c grad(phi_j) + r e_j) = 0``
with ``(c, r) = (a, a)``, ``(a, kappa)`` and ``(1, m_sat)``.  Correctors are
stored as gradient matrices ``theta[i, j] = d_i phi_j`` (rows are derivative
directions, column ``j`` is the gradient of ``phi_j``).

On a periodic RVE the problem is discretized with cell-centred finite volumes
and harmonic face coefficients.  Eliminating the face potential from flux
continuity shows that the scheme is the exact minimizer of the energy of a
field that is constant on each half cell; the half-cell gradients are
reconstructed from the face fluxes and every expectation below is taken over
half cells.  With this bookkeeping the mean-zero property holds exactly, the
two assemblies of the exchange tensor agree to solver tolerance, and
grid-aligned laminates reproduce the closed-form correctors cell by cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import check_tangent, chi, tangent_basis
from .microstructure import GridField, Moments, PhaseTable, moments, weighted_moments

PROBLEMS = ("a", "kappa", "m")


class CorrectorError(RuntimeError):
    """Raised when a corrector solve fails (e.g. CG does not converge)."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _coefficients(grid: GridField, which: str):
    if which == "a":
        return grid.a, grid.a
    if which == "kappa":
        return grid.a, grid.kappa
    if which == "m":
        return np.ones_like(grid.a), grid.msat
    raise ValueError(f"unknown corrector problem {which!r}; expected one of {PROBLEMS}")


def _fwd(u, axis, h):
    return (np.roll(u, -1, axis=axis) - u) / h


def _fwd_T(g, axis, h):
    return (np.roll(g, 1, axis=axis) - g) / h


@dataclass
class RVESolution:
    """Corrector for one problem on an RVE.

    ``theta`` holds cell values (mean of the two half-cell gradients);
    ``theta_lo``/``theta_hi`` hold the half-cell gradients, row ``i`` taken
    from the lower/upper half of the cell in direction ``i``.
    """

    which: str
    theta: np.ndarray
    theta_lo: np.ndarray
    theta_hi: np.ndarray
    iterations: list[int]
    residuals: list[float]
    tol: float


def _pcg(apply_A, b, diag, tol, max_iter):
    """Jacobi-preconditioned CG for a consistent singular SPD system (constants in the kernel)."""
    b = b - b.mean()
    bnorm = math.sqrt(float(np.sum(b * b)))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0, 0.0
    r = b.copy()
    z = r / diag
    z -= z.mean()
    p = z.copy()
    rz = float(np.sum(r * z))
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        alpha = rz / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        res = math.sqrt(float(np.sum(r * r))) / bnorm
        if res <= tol:
            return x - x.mean(), it, res
        z = r / diag
        z -= z.mean()
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CorrectorError(
        f"CG did not converge in {max_iter} iterations (relative residual {res:.3e} > {tol:.1e})",
        residual=res,
        iterations=max_iter,
    )


def default_max_iter(grid: GridField) -> int:
    return int(10 * round(grid.a.size ** (1.0 / 3.0)) * 100)


def solve_corrector_rve(grid: GridField, which: str, tol: float = 1e-10, max_iter: int | None = None) -> RVESolution:
    """Solve one corrector problem on the periodic RVE ``grid``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = default_max_iter(grid)
    c, r = _coefficients(grid, which)
    h = grid.h
    dims = grid.dims
    # harmonic face coefficients and face-averaged r/c, face k sits between cells k and k+1 (periodic)
    cf = [2.0 / (1.0 / c + 1.0 / np.roll(c, -1, axis=i)) for i in range(3)]
    rc = r / c
    beta = [0.5 * (rc + np.roll(rc, -1, axis=i)) for i in range(3)]
    diag = sum((cf[i] + np.roll(cf[i], 1, axis=i)) / h**2 for i in range(3))
    diag = np.where(diag > 0, diag, 1.0)

    def apply_A(u):
        return sum(_fwd_T(cf[i] * _fwd(u, i, h), i, h) for i in range(3))

    theta_lo = np.zeros(dims + (3, 3))
    theta_hi = np.zeros(dims + (3, 3))
    iters, resid = [], []
    for j in range(3):
        b = -_fwd_T(cf[j] * beta[j], j, h)
        phi, it, res = _pcg(apply_A, b, diag, tol, max_iter)
        iters.append(it)
        resid.append(res)
        for i in range(3):
            flux = cf[i] * (_fwd(phi, i, h) + (beta[i] if i == j else 0.0))
            src = rc if i == j else 0.0
            theta_hi[..., i, j] = flux / c - src
            theta_lo[..., i, j] = np.roll(flux, 1, axis=i) / c - src
    theta = 0.5 * (theta_lo + theta_hi)
    return RVESolution(which, theta, theta_lo, theta_hi, iters, resid, tol)


@dataclass
class CorrectorSet:
    """Correctors as weighted samples (phases of a law, or half cells of an RVE).

    Each sample carries its coefficients and the three 3x3 corrector matrices;
    every expectation is ``sum(weights * sample_value)``.
    """

    weights: np.ndarray
    a: np.ndarray
    kappa: np.ndarray
    msat: np.ndarray
    k1: np.ndarray
    k1_axis: np.ndarray
    theta_a: np.ndarray
    theta_kappa: np.ndarray
    theta_m: np.ndarray
    kind: str = "laminate"
    metadata: dict = field(default_factory=dict)
    cells: dict | None = None  # cell-valued corrector fields for RVE sets

    def moments(self) -> Moments:
        return weighted_moments(self.weights, self.a, self.kappa, self.msat, self.k1, self.k1_axis)

    def expect(self, values) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))

    def mean_theta(self) -> dict[str, np.ndarray]:
        return {
            "a": self.expect(self.theta_a),
            "kappa": self.expect(self.theta_kappa),
            "m": self.expect(self.theta_m),
        }

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "metadata": self.metadata,
            "mean_theta": {k: v.tolist() for k, v in self.mean_theta().items()},
        }
        if self.kind == "laminate":
            d["per_phase"] = {
                "weights": self.weights.tolist(),
                "theta_a": self.theta_a.tolist(),
                "theta_kappa": self.theta_kappa.tolist(),
                "theta_m": self.theta_m.tolist(),
            }
        return d


def laminate_correctors(mo: Moments, table: PhaseTable) -> CorrectorSet:
    """Closed-form laminate correctors (layers normal to e3), one sample per phase."""
    a = table.column("a")
    kappa = table.column("kappa")
    msat = table.column("m_sat")
    n = len(table)
    H = mo.harmonic_a
    ta = np.zeros((n, 3, 3))
    tk = np.zeros((n, 3, 3))
    tm = np.zeros((n, 3, 3))
    ta[:, 2, 2] = H / a - 1.0
    tk[:, 2, 2] = mo.mean_kappa_over_a * H / a - kappa / a
    tm[:, 2, 2] = mo.mean_msat - msat
    return CorrectorSet(
        weights=table.p,
        a=a,
        kappa=kappa,
        msat=msat,
        k1=table.column("k1"),
        k1_axis=table.axis_tensors(),
        theta_a=ta,
        theta_kappa=tk,
        theta_m=tm,
        kind="laminate",
    )


def rve_correctors(grid: GridField, tol: float = 1e-10, max_iter: int | None = None) -> CorrectorSet:
    """Solve all three corrector problems on ``grid`` and pack them as half-cell samples."""
    sols = {w: solve_corrector_rve(grid, w, tol, max_iter) for w in PROBLEMS}
    n = grid.a.size

    def halves(arr):
        return np.concatenate([arr.reshape(n, *arr.shape[3:])] * 2)

    def thetas(sol):
        return np.concatenate([sol.theta_lo.reshape(n, 3, 3), sol.theta_hi.reshape(n, 3, 3)])

    meta = {
        "dims": list(grid.dims),
        "h": grid.h,
        "tol": tol,
        "seed": grid.seed,
        "iterations": {w: s.iterations for w, s in sols.items()},
        "residuals": {w: s.residuals for w, s in sols.items()},
    }
    return CorrectorSet(
        weights=np.full(2 * n, 0.5 / n),
        a=halves(grid.a),
        kappa=halves(grid.kappa),
        msat=halves(grid.msat),
        k1=halves(grid.k1),
        k1_axis=halves(grid.k1_axis),
        theta_a=thetas(sols["a"]),
        theta_kappa=thetas(sols["kappa"]),
        theta_m=thetas(sols["m"]),
        kind="rve",
        metadata=meta,
        cells={w: s.theta for w, s in sols.items()},
    )


@dataclass
class EffectiveModel:
    a_ex: np.ndarray
    k_dmi: np.ndarray
    d_kappa: np.ndarray
    d_m: np.ndarray
    m_mean: float
    mean_k1: float
    mean_k1_axis: np.ndarray
    mu0: float
    h_applied: np.ndarray
    moments: Moments
    a_ex_direct: np.ndarray | None = None

    def anisotropy(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.mean_k1 - np.einsum("...i,ij,...j->...", s, self.mean_k1_axis, s)

    def to_dict(self) -> dict:
        return {
            "a_ex": self.a_ex.tolist(),
            "a_ex_direct": None if self.a_ex_direct is None else self.a_ex_direct.tolist(),
            "k_dmi": self.k_dmi.tolist(),
            "d_kappa": self.d_kappa.tolist(),
            "d_m": self.d_m.tolist(),
            "m_mean": self.m_mean,
            "anisotropy": {"mean_k1": self.mean_k1, "mean_k1_axis": self.mean_k1_axis.tolist()},
            "mu0": self.mu0,
            "h_applied": self.h_applied.tolist(),
            "moments": self.moments.to_dict(),
        }


def assemble_effective(cs: CorrectorSet, mu0: float = 1.0, h_applied=(0.0, 0.0, 0.0)) -> EffectiveModel:
    """Assemble the effective tensors from correctors and coefficients."""
    w = cs.weights
    a, kappa = cs.a, cs.kappa
    I = np.eye(3)
    ta, tk, tm = cs.theta_a, cs.theta_kappa, cs.theta_m
    ThetaT_a_Theta = np.einsum("s,s,sji,sjk->ik", w, a, ta, ta)
    a_ex = float(w @ a) * I - ThetaT_a_Theta
    F = I + ta
    a_ex_direct = np.einsum("s,s,sji,sjk->ik", w, a, F, F)
    k_dmi = float(w @ kappa) * I - np.einsum("s,s,sji,sjk->ik", w, a, ta, tk)
    d_kappa = np.einsum("s,s,sji,sjk->ik", w, a, tk, tk)
    d_m = np.einsum("s,sji,sjk->ik", w, tm, tm)
    mo = cs.moments()
    return EffectiveModel(
        a_ex=0.5 * (a_ex + a_ex.T),
        k_dmi=k_dmi,
        d_kappa=0.5 * (d_kappa + d_kappa.T),
        d_m=0.5 * (d_m + d_m.T),
        m_mean=mo.mean_msat,
        mean_k1=mo.mean_k1,
        mean_k1_axis=mo.mean_k1_axis,
        mu0=float(mu0),
        h_applied=np.asarray(h_applied, dtype=float),
        moments=mo,
        a_ex_direct=a_ex_direct,
    )


def effective_from_table(table: PhaseTable, mu0: float = 1.0, h_applied=(0.0, 0.0, 0.0)) -> EffectiveModel:
    """Laminate effective model straight from a phase law."""
    return assemble_effective(laminate_correctors(moments(table), table), mu0, h_applied)


# --------------------------------------------------------------------------- brute force oracle


def laminate_period(table: PhaseTable, n_cells: int):
    """Weighted cells of one laminate period representing the phase law exactly."""
    counts = [max(1, int(round(p * n_cells))) if p > 0 else 0 for p in table.probabilities]
    idx = np.concatenate([np.full(c, i) for i, c in enumerate(counts)]).astype(int)
    w = np.array([table.probabilities[i] / counts[i] for i in idx])
    return idx, w


def thom_bruteforce(s, A, table: PhaseTable, n_cells: int = 16) -> float:
    """Minimize the cell energy over discrete 1D-periodic tangent potential fields.

    The unknowns are row 3 of ``Xi`` in each cell of one laminate period,
    tangent to the sphere at ``s`` and of zero weighted mean; the quadratic
    program is solved exactly through its KKT system.
    """
    s = np.asarray(s, dtype=float)
    A = np.asarray(A, dtype=float)
    check_tangent(s, A)
    idx, w = laminate_period(table, n_cells)
    a = table.column("a")[idx]
    kappa = table.column("kappa")[idx]
    assert np.all(a > 0)
    T = tangent_basis(s)  # (2, 3)
    X = chi(s)
    n = len(idx)
    # cell energy  w_k [ a_k/2 |A + e3 (x) T^T y_k|^2 - kappa_k X:(A + e3 (x) T^T y_k) ]
    # gradient in y_k: w_k [ a_k (T A_3 + y_k) - kappa_k T X_3 ]
    nv = 2 * n
    K = np.zeros((nv + 2, nv + 2))
    rhs = np.zeros(nv + 2)
    for k in range(n):
        sl = slice(2 * k, 2 * k + 2)
        K[sl, sl] = w[k] * a[k] * np.eye(2)
        rhs[sl] = -w[k] * (a[k] * (T @ A[2]) - kappa[k] * (T @ X[2]))
        K[sl, nv:] = w[k] * np.eye(2)
        K[nv:, sl] = w[k] * np.eye(2)
    sol = np.linalg.solve(K, rhs)
    y = sol[:nv].reshape(n, 2)
    total = 0.0
    for k in range(n):
        M = A.copy()
        M[2] += y[k] @ T
        total += w[k] * (0.5 * a[k] * np.sum(M * M) - kappa[k] * np.sum(X * M))
    return float(total)
