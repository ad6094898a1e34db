"""Discrete heterogeneous and homogenized micromagnetic energies.

Both energies are evaluated by one engine, :class:`DiscreteEnergy`, whose
exchange and DMI parts act on half-cell gradients (see ``magnetization``):

* exchange ``1/2 h^3 sum_p [ sum_i A_ii (|lo_i|^2 + |hi_i|^2)/2 + sum_{i!=j} A_ij gbar_i . gbar_j ]``
* DMI ``-h^3 sum_p sum_{i,l} K_il gbar_i . (e_l x m_p)``

with ``A = a(x/eps) I, K = kappa(x/eps) I`` for the heterogeneous energy and
the effective tensors for the homogenized one.  The exchange part equals the
mean over the eight half-cell combinations of the cell quadratic form, so the
homogenized exchange and DMI are exactly the integral of the cell density.
Gradients are exact derivatives of these formulas, divided by the cell
volume (so they approximate the variational derivative).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .correctors import CorrectorSet, EffectiveModel
from .demag import stray_field
from .geometry import check_tangent, chi
from .magnetization import Magnetization, half_gradients, half_gradients_T
from .microstructure import GridField, LaminateRealization

__all__ = [
    "EPS_TERMS",
    "HOM_PARTS",
    "CellCoefficients",
    "DiscreteEnergy",
    "EnergyBreakdown",
    "EnergyError",
    "chi",
    "completed_square",
    "curl_dmi",
    "energy_eps",
    "energy_hom",
    "eps_coefficients",
    "eps_energy",
    "hom_energy",
    "integrate_thom",
    "thom_density",
    "thom_xi",
]

EPS_TERMS = ("exchange", "dmi", "stray", "anisotropy", "zeeman")
HOM_PARTS = (
    "exchange",
    "dmi",
    "dmi_corrector",
    "stray",
    "stray_corrector",
    "anisotropy",
    "zeeman",
)
RESOLUTION_FACTOR = 4.0


class EnergyError(ValueError):
    pass


@dataclass
class EnergyBreakdown:
    exchange: float
    dmi: float
    stray: float
    anisotropy: float
    zeeman: float
    model: str = "eps"
    grouping: str = "standard"
    metadata: dict = field(default_factory=dict)
    total: float | None = None
    regrouped: "EnergyBreakdown | None" = None

    def __post_init__(self):
        s = self.exchange + self.dmi + self.stray + self.anisotropy + self.zeeman
        if self.total is None:
            self.total = s
        elif abs(self.total - s) > 1e-12 * max(1.0, abs(s)):
            raise EnergyError(f"total {self.total} != sum of parts {s}")

    def parts(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in EPS_TERMS}

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "regrouped"}
        if self.regrouped is not None:
            d["regrouped"] = self.regrouped.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --------------------------------------------------------------------------- coefficients


@dataclass
class CellCoefficients:
    """Per-cell material coefficients of the heterogeneous energy."""

    a: np.ndarray
    kappa: np.ndarray
    msat: np.ndarray
    k1: np.ndarray
    k1_axis: np.ndarray  # dims + (3, 3), k1 e (x) e

    @classmethod
    def constant(cls, dims, a=1.0, kappa=0.0, msat=0.0, k1=0.0, easy_axis=(0.0, 0.0, 1.0)):
        dims = tuple(dims)
        e = np.asarray(easy_axis, dtype=float)
        return cls(
            np.full(dims, float(a)),
            np.full(dims, float(kappa)),
            np.full(dims, float(msat)),
            np.full(dims, float(k1)),
            np.broadcast_to(k1 * np.outer(e, e), dims + (3, 3)).copy(),
        )


def _laminate_cells(r: LaminateRealization, eps: float, dims, h: float) -> CellCoefficients:
    nz = dims[2]
    y = np.arange(nz + 1) * h / eps
    tol = 1e-12 * max(1.0, abs(y[-1]))
    if y[0] < r.start - tol or y[-1] > r.stop + tol:
        raise EnergyError(
            f"domain [0, {nz * h}] at eps={eps} needs the realization on [0, {y[-1]}], "
            f"realization covers [{r.start}, {r.stop}]"
        )
    y = np.clip(y, r.start, r.stop)
    first = int(np.searchsorted(r.breakpoints, y[0], side="right")) - 1
    last = int(np.searchsorted(r.breakpoints, y[-1], side="left"))
    w_min = float(np.diff(r.breakpoints[first : last + 1]).min())
    if h > eps * w_min / RESOLUTION_FACTOR * (1 + 1e-12):
        raise EnergyError(
            f"grid does not resolve the microstructure: h={h} > eps*w_min/{RESOLUTION_FACTOR:g}"
            f" = {eps * w_min / RESOLUTION_FACTOR}"
        )
    t = r.table

    def avg(values):
        return r.cell_averages(values, y)

    axis = t.axis_tensors()
    k1_axis = np.stack([avg(axis[:, i, j]) for i in range(3) for j in range(3)], axis=-1).reshape(nz, 3, 3)

    def bc(col):
        return np.broadcast_to(col, tuple(dims[:2]) + col.shape).copy()

    return CellCoefficients(
        bc(avg(t.column("a"))),
        bc(avg(t.column("kappa"))),
        bc(avg(t.column("m_sat"))),
        bc(avg(t.column("k1"))),
        bc(k1_axis),
    )


def _grid_cells(g: GridField, eps: float, dims, h: float) -> CellCoefficients:
    if h > eps * g.h / RESOLUTION_FACTOR * (1 + 1e-12):
        raise EnergyError(
            f"grid does not resolve the microstructure: h={h} > eps*cell/{RESOLUTION_FACTOR:g}"
            f" = {eps * g.h / RESOLUTION_FACTOR}"
        )
    axes = [(np.arange(n) + 0.5) * h / eps for n in dims]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    flat = g.lookup(pts)
    return CellCoefficients(
        g.a.ravel()[flat],
        g.kappa.ravel()[flat],
        g.msat.ravel()[flat],
        g.k1.ravel()[flat],
        g.k1_axis.reshape(-1, 3, 3)[flat],
    )


def eps_coefficients(source, eps: float, dims, h: float) -> CellCoefficients:
    """Coefficients ``c(x/eps)`` on the grid: exact cell averages for laminates, centre values for grids."""
    if not eps > 0:
        raise EnergyError("eps must be positive")
    dims = tuple(int(n) for n in dims)
    if isinstance(source, LaminateRealization):
        return _laminate_cells(source, eps, dims, h)
    if isinstance(source, GridField):
        return _grid_cells(source, eps, dims, h)
    raise TypeError(f"unsupported microstructure {type(source).__name__}")


# --------------------------------------------------------------------------- engine


class DiscreteEnergy:
    """Energy of a grid magnetization assembled from quadratic cell terms.

    ``parts`` maps term names to energies; ``gradient`` returns the derivative
    of the selected terms divided by ``h^3``.  Only the terms named in
    ``terms`` contribute.
    """

    def __init__(
        self,
        dims,
        h: float,
        *,
        ex_diag,
        ex_off=None,
        kappa=None,
        k_dmi=None,
        d_kappa=None,
        d_m=None,
        msat=0.0,
        aniso_const=0.0,
        aniso_q=None,
        mu0: float = 1.0,
        h_applied=(0.0, 0.0, 0.0),
        padding: int = 2,
        terms=None,
        kind: str = "eps",
        metadata: dict | None = None,
    ):
        self.dims = tuple(int(n) for n in dims)
        self.h = float(h)
        self.vol = self.h**3
        # ex_diag broadcastable to dims + (3,): per cell and direction
        self.ex_diag = np.asarray(ex_diag, dtype=float)
        self.ex_off = None if ex_off is None else np.asarray(ex_off, dtype=float) * (1.0 - np.eye(3))
        if self.ex_off is not None and not np.any(self.ex_off):
            self.ex_off = None
        self.kappa = None if kappa is None else np.asarray(kappa, dtype=float)
        self.k_dmi = None if k_dmi is None else np.asarray(k_dmi, dtype=float)
        self.d_kappa = None if d_kappa is None else np.asarray(d_kappa, dtype=float)
        self.d_m = None if d_m is None else np.asarray(d_m, dtype=float)
        self.msat = np.asarray(msat, dtype=float)
        self.aniso_const = np.asarray(aniso_const, dtype=float)
        self.aniso_q = None if aniso_q is None else np.asarray(aniso_q, dtype=float)
        if self.aniso_q is not None and not np.any(self.aniso_q):
            self.aniso_q = None
        if self.d_kappa is not None and not np.any(self.d_kappa):
            self.d_kappa = None
        if self.d_m is not None and not np.any(self.d_m):
            self.d_m = None
        self._k_dmi_T = None if self.k_dmi is None else np.ascontiguousarray(self.k_dmi.T)
        self.mu0 = float(mu0)
        self.h_applied = np.asarray(h_applied, dtype=float)
        self.padding = int(padding)
        self.kind = kind
        self.metadata = dict(metadata or {})
        names = EPS_TERMS if kind == "eps" else HOM_PARTS
        self.available = names
        self.terms = tuple(names if terms is None else terms)
        unknown = set(self.terms) - set(names)
        if unknown:
            raise EnergyError(f"unknown energy terms {sorted(unknown)}; available {names}")

    def with_terms(self, terms) -> "DiscreteEnergy":
        new = object.__new__(DiscreteEnergy)
        new.__dict__.update(self.__dict__)
        new.terms = tuple(terms)
        unknown = set(new.terms) - set(self.available)
        if unknown:
            raise EnergyError(f"unknown energy terms {sorted(unknown)}")
        return new

    # -------------------------------------------------------------- helpers

    def _check(self, m) -> np.ndarray:
        if isinstance(m, Magnetization):
            if abs(m.h - self.h) > 1e-12 * self.h:
                raise EnergyError(f"magnetization spacing {m.h} != energy spacing {self.h}")
            m = m.m
        m = np.asarray(m, dtype=float)
        if m.shape != self.dims + (3,):
            raise EnergyError(f"magnetization shape {m.shape} does not match grid {self.dims}")
        return m

    def _msat_cells(self) -> np.ndarray:
        return np.broadcast_to(self.msat, self.dims)

    def _dmi_B(self, gbar):
        # B[..., l, :] = sum_i K_il gbar_i
        if self.kappa is not None:
            return self.kappa[..., None, None] * gbar
        return self._k_dmi_T @ gbar

    def _needs_grad(self):
        return any(t in self.terms for t in ("exchange", "dmi"))

    # -------------------------------------------------------------- evaluation

    def _evaluate(self, m, want_grad: bool, terms=None):
        terms = self.terms if terms is None else tuple(terms)
        m = self._check(m)
        v = self.vol
        E = {}
        grads = {}
        need_fd = any(t in terms for t in ("exchange", "dmi"))
        if need_fd:
            lo, hi = half_gradients(m, self.h)
            gbar = 0.5 * (lo + hi)
        if "exchange" in terms:
            w = self.ex_diag[..., :, None]
            diag = 0.5 * np.sum(w * (lo * lo + hi * hi))
            off = 0.0
            if self.ex_off is not None:
                Ag = self.ex_off @ gbar
                off = np.sum(gbar * Ag)
            E["exchange"] = 0.5 * v * (diag + off)
            if want_grad:
                d_lo = 0.5 * v * w * lo
                d_hi = 0.5 * v * w * hi
                if self.ex_off is not None:
                    d_lo = d_lo + 0.5 * v * Ag
                    d_hi = d_hi + 0.5 * v * Ag
                grads["exchange"] = half_gradients_T(d_lo, d_hi, self.h)
        if "dmi" in terms and (self.kappa is not None or self.k_dmi is not None):
            X = chi(m)
            B = self._dmi_B(gbar)
            E["dmi"] = -v * np.sum(B * X)
            if want_grad:
                if self.kappa is not None:
                    dG = -v * self.kappa[..., None, None] * X
                else:
                    dG = -v * (self.k_dmi @ X)
                g = half_gradients_T(0.5 * dG, 0.5 * dG, self.h)
                # explicit dependence through chi(m): d/dm [B_l . (e_l x m)] = B_l x e_l
                g -= v * np.sum(np.cross(B, np.eye(3)), axis=-2)
                grads["dmi"] = g
        elif "dmi" in terms:
            E["dmi"] = 0.0
            grads["dmi"] = np.zeros_like(m)
        if "dmi_corrector" in terms and self.d_kappa is not None:
            D = self.d_kappa
            Dm = m @ D.T
            E["dmi_corrector"] = -0.5 * v * (np.trace(D) * np.sum(m * m) - np.sum(m * Dm))
            if want_grad:
                grads["dmi_corrector"] = -v * (np.trace(D) * m - Dm)
        if "stray_corrector" in terms and self.d_m is not None:
            Dm = m @ self.d_m.T
            E["stray_corrector"] = 0.5 * self.mu0 * v * np.sum(m * Dm)
            if want_grad:
                grads["stray_corrector"] = self.mu0 * v * Dm
        if "stray" in terms:
            M = self._msat_cells()
            if np.any(M):
                hd = stray_field(m, M, self.h, self.padding)
                E["stray"] = -0.5 * self.mu0 * v * np.sum(hd * (M[..., None] * m))
                if want_grad:
                    grads["stray"] = -self.mu0 * v * M[..., None] * hd
            else:
                E["stray"] = 0.0
                grads["stray"] = np.zeros_like(m)
        if "anisotropy" in terms:
            c0 = float(np.sum(np.broadcast_to(self.aniso_const, self.dims)))
            if self.aniso_q is not None:
                Qm = (self.aniso_q @ m[..., None])[..., 0]
                E["anisotropy"] = v * (c0 - np.sum(m * Qm))
                if want_grad:
                    grads["anisotropy"] = -2.0 * v * Qm
            else:
                E["anisotropy"] = v * c0
                grads["anisotropy"] = np.zeros_like(m)
        if "zeeman" in terms:
            Mh = self._msat_cells()[..., None] * self.h_applied
            E["zeeman"] = -self.mu0 * v * np.sum(Mh * m)
            if want_grad:
                grads["zeeman"] = -self.mu0 * v * np.broadcast_to(Mh, m.shape)
        for t in terms:
            E.setdefault(t, 0.0)
            if want_grad:
                grads.setdefault(t, np.zeros_like(m))
        E = {k: float(val) for k, val in E.items()}
        if want_grad:
            grads = {k: g / v for k, g in grads.items()}
            bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
            if bad:
                cell = np.argwhere(~np.isfinite(grads[bad[0]]))[0][:3]
                raise FloatingPointError(f"non-finite gradient in term {bad[0]} at cell {tuple(cell)}")
        return E, grads

    def parts(self, m, terms=None) -> dict[str, float]:
        return self._evaluate(m, False, terms)[0]

    def value(self, m) -> float:
        return float(sum(self.parts(m).values()))

    def gradient(self, m, terms=None) -> np.ndarray:
        _, g = self._evaluate(m, True, terms)
        return sum(g.values())

    def gradient_parts(self, m, terms=None) -> dict[str, np.ndarray]:
        return self._evaluate(m, True, terms)[1]

    def value_and_gradient(self, m):
        E, g = self._evaluate(m, True)
        return float(sum(E.values())), sum(g.values())

    # -------------------------------------------------------------- groupings

    def breakdown(self, m) -> EnergyBreakdown:
        P = self._evaluate(m, False, self.available)[0]
        meta = dict(self.metadata)
        if self.kind == "eps":
            return EnergyBreakdown(**{k: P[k] for k in EPS_TERMS}, model="eps", metadata=meta)
        hom = EnergyBreakdown(
            exchange=P["exchange"],
            dmi=P["dmi"] + P["dmi_corrector"],
            stray=P["stray"] + P["stray_corrector"],
            anisotropy=P["anisotropy"],
            zeeman=P["zeeman"],
            model="hom",
            grouping="hom",
            metadata=meta,
        )
        eff = EnergyBreakdown(
            exchange=P["exchange"],
            dmi=P["dmi"],
            stray=P["stray"],
            anisotropy=P["anisotropy"] + P["dmi_corrector"] + P["stray_corrector"],
            zeeman=P["zeeman"],
            model="hom",
            grouping="eff",
            metadata=meta,
        )
        hom.regrouped = eff
        return hom


def eps_energy(
    source,
    eps: float,
    dims,
    h: float,
    mu0: float = 1.0,
    h_applied=(0.0, 0.0, 0.0),
    padding: int = 2,
    terms=None,
    coefficients: CellCoefficients | None = None,
) -> DiscreteEnergy:
    """Heterogeneous energy ``F_eps`` on a grid of ``dims`` cells of size ``h``."""
    c = coefficients if coefficients is not None else eps_coefficients(source, eps, dims, h)
    meta = {"eps": eps, "h": h, "dims": list(dims)}
    if source is not None:
        meta["microstructure"] = type(source).__name__
        meta["seed"] = getattr(source, "seed", None)
    return DiscreteEnergy(
        dims,
        h,
        ex_diag=c.a[..., None],
        kappa=c.kappa,
        msat=c.msat,
        aniso_const=c.k1,
        aniso_q=c.k1_axis,
        mu0=mu0,
        h_applied=h_applied,
        padding=padding,
        terms=terms,
        kind="eps",
        metadata=meta,
    )


def hom_energy(model: EffectiveModel, dims, h: float, padding: int = 2, terms=None) -> DiscreteEnergy:
    """Homogenized energy ``F_hom`` built from the effective tensors."""
    A = np.asarray(model.a_ex, dtype=float)
    return DiscreteEnergy(
        dims,
        h,
        ex_diag=np.diag(A).copy(),
        ex_off=A,
        k_dmi=model.k_dmi,
        d_kappa=model.d_kappa,
        d_m=model.d_m,
        msat=model.m_mean,
        aniso_const=model.mean_k1,
        aniso_q=model.mean_k1_axis,
        mu0=model.mu0,
        h_applied=model.h_applied,
        padding=padding,
        terms=terms,
        kind="hom",
        metadata={"h": h, "dims": list(dims)},
    )


def energy_eps(m: Magnetization, source, eps: float, mu0: float = 1.0, h_applied=(0.0, 0.0, 0.0), padding: int = 2):
    """All five terms of the heterogeneous energy."""
    return eps_energy(source, eps, m.dims, m.h, mu0, h_applied, padding).breakdown(m)


def energy_hom(m: Magnetization, model: EffectiveModel, padding: int = 2) -> EnergyBreakdown:
    """Homogenized energy; ``.regrouped`` carries the effective-term grouping."""
    return hom_energy(model, m.dims, m.h, padding).breakdown(m)


# --------------------------------------------------------------------------- cross-checks


def curl_dmi(m: Magnetization, kappa) -> float:
    """``sum kappa m . curl m h^3`` with the cell-gradient curl."""
    from .magnetization import curl

    c = curl(m.m, m.h)
    k = np.broadcast_to(np.asarray(kappa, dtype=float), m.dims)
    return float(np.sum(k * np.sum(m.m * c, axis=-1)) * m.h**3)


def completed_square(m: Magnetization, coeffs: CellCoefficients) -> float:
    """``1/2 sum a |grad m - (kappa/a) chi(m)|^2 h^3 - sum (kappa^2/a)|m|^2 h^3`` over half cells."""
    lo, hi = half_gradients(m.m, m.h)
    r = (coeffs.kappa / coeffs.a)[..., None, None] * chi(m.m)
    sq = 0.5 * (np.sum((lo - r) ** 2, axis=(-2, -1)) + np.sum((hi - r) ** 2, axis=(-2, -1)))
    v = m.h**3
    return float(0.5 * v * np.sum(coeffs.a * sq) - v * np.sum(coeffs.kappa**2 / coeffs.a * np.sum(m.m**2, axis=-1)))


# --------------------------------------------------------------------------- cell density


def thom_density(s, A, model: EffectiveModel, strict: bool = True) -> float:
    """``1/2 A:(a_ex A) - A:(k_dmi chi(s)) - 1/2 chi(s):(d_kappa chi(s))``.

    With ``strict`` the rows of ``A`` must be tangent at ``s``; the discrete
    half-cell gradients are not, so integration uses ``strict=False``.
    """
    s = np.asarray(s, dtype=float)
    A = np.asarray(A, dtype=float)
    if strict:
        check_tangent(s, A)
    X = chi(s)
    return float(
        0.5 * np.sum(A * (model.a_ex @ A)) - np.sum(A * (model.k_dmi @ X)) - 0.5 * np.sum(X * (model.d_kappa @ X))
    )


def thom_xi(s, A, correctors: CorrectorSet) -> np.ndarray:
    """Pointwise minimizer ``Theta_a A - Theta_kappa chi(s)`` per sample (phase or half cell)."""
    s = np.asarray(s, dtype=float)
    A = np.asarray(A, dtype=float)
    check_tangent(s, A)
    return correctors.theta_a @ A - correctors.theta_kappa @ chi(s)


def integrate_thom(m: Magnetization, model: EffectiveModel) -> float:
    """Sum over cells of the mean cell density over the eight half-cell gradient combinations."""
    lo, hi = half_gradients(m.m, m.h)
    flat_m = m.m.reshape(-1, 3)
    lo = lo.reshape(-1, 3, 3)
    hi = hi.reshape(-1, 3, 3)
    total = 0.0
    for p in range(len(flat_m)):
        acc = 0.0
        for pick in itertools.product((0, 1), repeat=3):
            X = np.stack([(lo, hi)[pick[i]][p, i] for i in range(3)])
            acc += thom_density(flat_m[p], X, model, strict=False)
        total += acc / 8.0
    return total * m.h**3
