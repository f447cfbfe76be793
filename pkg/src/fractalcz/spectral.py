"""Generalized eigenbasis of (L, M) and the discrete heat kernel."""

from __future__ import annotations

import csv
import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.optimize as sopt

from .energy import EnergyLaplacian
from .fractal_model import IFSModel, ModelError

log = logging.getLogger(__name__)

BASIS_MAGIC = b"FCZBASIS"
BASIS_VERSION = 1


class NumericalError(RuntimeError):
    """A numerical routine could not reach its tolerance."""


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvalues and M-orthonormal eigenvectors (columns of ``vectors``).

    ``basis_id`` is a short stable identifier derived from model and level.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    mass: np.ndarray
    level: int
    model_name: str = ""
    resistance_dim: float = float("nan")

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def basis_id(self) -> str:
        return f"{self.model_name}-L{self.level}-n{self.size}"

    def orthonormality_error(self) -> float:
        G = self.vectors.T @ (self.mass[:, None] * self.vectors)
        return float(np.max(np.abs(G - np.eye(self.size))))

    def residual(self, stiffness: np.ndarray) -> float:
        """max |L phi - lambda M phi| relative to ||L||."""
        r = stiffness @ self.vectors - self.mass[:, None] * self.vectors * self.eigenvalues
        return float(np.max(np.abs(r)) / max(np.max(np.abs(stiffness)), 1.0))

    def coefficients(self, u: np.ndarray) -> np.ndarray:
        """Coefficients <u, phi_n> in L^2(m)."""
        return self.vectors.T @ (self.mass[:, None] * u if u.ndim > 1 else self.mass * u)

    def synthesize(self, weights: np.ndarray, rows: np.ndarray | slice = slice(None)) -> np.ndarray:
        """Kernel matrix sum_n w_n phi_n(x) phi_n(y) for x in ``rows``."""
        P = self.vectors
        return (P[rows] * weights) @ P.T

    # -- serialization ---------------------------------------------------
    def save(self, path: str | Path, tolerances: dict | None = None) -> None:
        """Binary columnar file: magic, header length, JSON header, float64 columns."""
        header = {
            "version": BASIS_VERSION,
            "model": self.model_name,
            "level": self.level,
            "count": self.size,
            "resistance_dim": self.resistance_dim,
            "dtype": "<f8",
            "columns": ["eigenvalues", "mass", "vectors(column-major)"],
            "tolerances": tolerances or {"orthonormality": 1e-10, "residual": 1e-8},
        }
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(BASIS_MAGIC)
            fh.write(struct.pack("<Q", len(hb)))
            fh.write(hb)
            fh.write(self.eigenvalues.astype("<f8").tobytes())
            fh.write(self.mass.astype("<f8").tobytes())
            fh.write(np.asfortranarray(self.vectors).astype("<f8").tobytes(order="F"))

    @classmethod
    def load(cls, path: str | Path) -> "SpectralBasis":
        raw = Path(path).read_bytes()
        if not raw.startswith(BASIS_MAGIC):
            raise ValueError("not a basis file")
        off = len(BASIS_MAGIC)
        (hl,) = struct.unpack("<Q", raw[off : off + 8])
        off += 8
        header = json.loads(raw[off : off + hl])
        off += hl
        n = header["count"]
        data = np.frombuffer(raw[off:], dtype="<f8")
        if data.size != 2 * n + n * n:
            raise ValueError("truncated basis file")
        return cls(
            eigenvalues=data[:n].copy(),
            mass=data[n : 2 * n].copy(),
            vectors=data[2 * n :].reshape((n, n), order="F").copy(),
            level=header["level"],
            model_name=header["model"],
            resistance_dim=header["resistance_dim"],
        )

    def write_eigenvalues_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "eigenvalue"])
            for i, lam in enumerate(self.eigenvalues):
                w.writerow([i, f"{lam:.17g}"])


def eigenbasis(el: EnergyLaplacian) -> SpectralBasis:
    """Full dense decomposition of the pencil (L, M) via M^{-1/2} L M^{-1/2}."""
    m = el.mass
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        raise ModelError("mass matrix must be strictly positive")
    s = 1.0 / np.sqrt(m)
    A = el.stiffness * s[:, None] * s[None, :]
    w, v = np.linalg.eigh(0.5 * (A + A.T))
    w = np.clip(w, 0.0, None)
    w[0] = 0.0
    phi = v * s[:, None]
    phi[:, 0] = 1.0 / math.sqrt(m.sum())
    # sign: largest-magnitude entry positive
    idx = np.argmax(np.abs(phi), axis=0)
    sgn = np.sign(phi[idx, np.arange(phi.shape[1])])
    sgn[sgn == 0] = 1.0
    phi *= sgn
    model = el.graph.model
    return SpectralBasis(
        eigenvalues=w,
        vectors=phi,
        mass=m.copy(),
        level=el.level,
        model_name=model.name,
        resistance_dim=model.resistance_dim,
    )


# ---------------------------------------------------------------------------
# independent oracles


def interval_eigenvalues(level: int) -> np.ndarray:
    """Closed-form generalized eigenvalues of the level-m interval graph.

    With n = 2^m cells, lambda_k = 4 n^2 sin^2(k pi / 2n), k = 0..n.
    """
    n = 2**level
    k = np.arange(n + 1)
    return 4.0 * n * n * np.sin(k * np.pi / (2 * n)) ** 2


def gasket_decimation_spectrum(level: int) -> np.ndarray:
    """Gasket eigenvalues from the spectral decimation recursion.

    Normalized graph eigenvalues (of ``I - D^{-1}A`` scaled by 4) start from
    {0, 6, 6} on V_0. Each step sends 6 to 3 and every other value to both
    preimages of ``x(5 - x)`` (the larger only for nonzero values), then adds
    5 with multiplicity (3^k - 1)/2 and 6 with multiplicity (3^{k+1} + 3)/2.
    The generalized eigenvalues are ``1.5 * 5^m * x``.
    """
    if level < 0:
        raise ModelError("level must be nonnegative")
    vals = [0.0, 6.0, 6.0]
    for k in range(level):
        nxt: list[float] = []
        for lam in vals:
            if lam == 6.0:
                nxt.append(3.0)
                continue
            disc = math.sqrt(max(25.0 - 4.0 * lam, 0.0))
            nxt.append((5.0 - disc) / 2.0)
            if lam != 0.0:
                nxt.append((5.0 + disc) / 2.0)
        nxt += [5.0] * ((3**k - 1) // 2)
        nxt += [6.0] * ((3 ** (k + 1) + 3) // 2)
        vals = nxt
    return np.sort(1.5 * 5.0**level * np.array(vals))


def oracle_spectrum(model: IFSModel, level: int) -> np.ndarray:
    if model.name == "interval":
        return interval_eigenvalues(level)
    if model.name == "gasket":
        return gasket_decimation_spectrum(level)
    raise ModelError(f"no spectral oracle for {model.name}")


def match_spectra(computed: np.ndarray, reference: np.ndarray) -> float:
    """Max relative gap between sorted spectra (absolute below 1)."""
    a, b = np.sort(computed), np.sort(reference)
    if a.shape != b.shape:
        raise ValueError("spectra have different sizes")
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))


# ---------------------------------------------------------------------------
# heat kernel


@dataclass(frozen=True)
class HeatKernelSlice:
    time: float
    derivative_order: int
    values: np.ndarray


def heat_weights(eigenvalues: np.ndarray, t: float, k: int = 0) -> np.ndarray:
    return (-eigenvalues) ** k * np.exp(-eigenvalues * t)


def heat_kernel(basis: SpectralBasis, t: float, k: int = 0, rows: np.ndarray | slice = slice(None)) -> HeatKernelSlice:
    """sum_n (-lambda_n)^k e^{-lambda_n t} phi_n(x) phi_n(y)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if k < 0:
        raise ValueError("derivative order must be nonnegative")
    vals = basis.synthesize(heat_weights(basis.eigenvalues, t, k), rows)
    if isinstance(rows, slice) and rows == slice(None):
        vals = 0.5 * (vals + vals.T)
    return HeatKernelSlice(time=float(t), derivative_order=k, values=vals)


def scaling_window(basis: SpectralBasis, model: IFSModel) -> tuple[float, float]:
    """[10 t_min, 0.1 t_max] with t_min = (finest cell size)^{d+1}, t_max = 1/lambda_1."""
    t_min = (model.r**basis.level) ** model.walk_exponent
    lam1 = basis.eigenvalues[1]
    return 10.0 * t_min, 0.1 / lam1


@dataclass(frozen=True)
class HeatFit:
    """Fitted envelope ``h_t(x,y) ~ t^{-beta} exp(-c (R^{d+1}/t)^gamma)``.

    ``c`` is the central fit; the two-sided bound uses ``c_exp_upper`` in the
    upper envelope and ``c_exp_lower`` in the lower one, with prefactors
    ``c_upper`` and ``c_lower``.
    """

    beta: float
    gamma: float
    c: float
    c_exp_upper: float
    c_exp_lower: float
    c_upper: float
    c_lower: float
    upper_by_t: np.ndarray
    lower_by_t: np.ndarray
    times: np.ndarray
    beta_residual: float
    gamma_residual: float

    @property
    def upper_drift(self) -> float:
        return float(self.upper_by_t.max() / self.upper_by_t.min())

    @property
    def lower_drift(self) -> float:
        return float(self.lower_by_t.max() / self.lower_by_t.min())


def heat_envelope_fit(
    basis: SpectralBasis,
    R: np.ndarray,
    times: np.ndarray,
    pairs: np.ndarray,
    diagonal_points: np.ndarray,
    d: float,
    u_range: tuple[float, float] = (0.5, 20.0),
) -> HeatFit:
    """Fit the sub-Gaussian heat envelope.

    ``beta`` comes from log h_t(x,x) against log t over ``diagonal_points``;
    ``gamma`` and ``c`` from a least-squares fit of
    ``log(t^beta h_t) = a - c u^gamma`` with ``u = R^{d+1}/t`` restricted to
    ``u_range``. Per-time constants are the extreme values of
    ``t^beta h_t exp(c u^gamma)`` over all pairs with u in the range.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 3 or times.max() / times.min() < 3:
        raise NumericalError("time grid too narrow for a regression")
    pairs = np.asarray(pairs, dtype=int)
    diagonal_points = np.asarray(diagonal_points, dtype=int)
    rows = np.unique(np.concatenate([pairs[:, 0], diagonal_points]))
    rpos = {int(r): i for i, r in enumerate(rows)}
    P = basis.vectors
    Prow = P[rows]

    diag_logs = []
    offdiag = []
    for t in times:
        w = np.exp(-basis.eigenvalues * t)
        H = (Prow * w) @ P.T
        diag_logs.append(np.log([H[rpos[int(x)], x] for x in diagonal_points]))
        offdiag.append(np.array([H[rpos[int(x)], y] for x, y in pairs]))
    diag_logs = np.array(diag_logs)  # (T, n_diag)
    offdiag = np.array(offdiag)  # (T, n_pairs)

    lt = np.log(times)
    mean_log = diag_logs.mean(axis=1)
    coef = np.polyfit(lt, mean_log, 1)
    beta = -coef[0]
    beta_res = float(np.sqrt(np.mean((np.polyval(coef, lt) - mean_log) ** 2)))

    Rp = R[pairs[:, 0], pairs[:, 1]]
    u = (Rp[None, :] ** (d + 1.0)) / times[:, None]
    y = np.log(np.maximum(offdiag, 1e-300)) + beta * lt[:, None]
    sel = (u >= u_range[0]) & (u <= u_range[1]) & (offdiag > 0)
    if sel.sum() < 10:
        raise NumericalError("too few off-diagonal samples in the fitting range")
    uu, yy = u[sel], y[sel]

    def resid(p):
        a, logc, g = p
        return a - np.exp(logc) * uu**g - yy

    fit = sopt.least_squares(resid, x0=[0.0, math.log(0.5), 1.0], bounds=([-50, -20, 0.05], [50, 10, 5]))
    a, logc, gamma = fit.x
    c = math.exp(logc)
    gres = float(np.sqrt(np.mean(fit.fun**2)))

    # separate exponent constants for the two sides, gamma held fixed:
    # c_upper/c_lower come from the max/min of y over log-spaced u bins
    ug = uu**gamma
    edges = np.quantile(ug, np.linspace(0.0, 1.0, 9))
    bins = np.clip(np.searchsorted(edges, ug, side="right") - 1, 0, 7)
    hi_pts, lo_pts = [], []
    for k in range(8):
        sk = bins == k
        if sk.sum() >= 3:
            j_hi, j_lo = np.argmax(yy[sk]), np.argmin(yy[sk])
            hi_pts.append((ug[sk][j_hi], yy[sk][j_hi]))
            lo_pts.append((ug[sk][j_lo], yy[sk][j_lo]))
    hi_pts, lo_pts = np.array(hi_pts), np.array(lo_pts)
    c_up = max(-np.polyfit(hi_pts[:, 0], hi_pts[:, 1], 1)[0], 0.0)
    c_lo = max(-np.polyfit(lo_pts[:, 0], lo_pts[:, 1], 1)[0], c_up)

    # per-time constants, on-diagonal points included (u = 0)
    useu = np.where(sel, u, 0.0) ** gamma
    up_ratio = np.where(sel, y + c_up * useu, np.nan)
    lo_ratio = np.where(sel, y + c_lo * useu, np.nan)
    dratio = diag_logs + beta * lt[:, None]
    upper = np.exp(np.fmax(np.nanmax(up_ratio, axis=1), dratio.max(axis=1)))
    lower = np.exp(np.fmin(np.nanmin(lo_ratio, axis=1), dratio.min(axis=1)))
    return HeatFit(
        beta=float(beta),
        gamma=float(gamma),
        c=c,
        c_exp_upper=float(c_up),
        c_exp_lower=float(c_lo),
        c_upper=float(upper.max()),
        c_lower=float(lower.min()),
        upper_by_t=upper,
        lower_by_t=lower,
        times=times,
        beta_residual=beta_res,
        gamma_residual=gres,
    )
