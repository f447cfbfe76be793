"""Complex Gamma function and a Gauss-Legendre engine for Mellin-Laplace integrals.

The engine computes, for a vector of rates ``b``,

    I(b) = int_0^inf e^{-b t} m(t) t^{s-1} dt

(or the same with ``e^{-bt} - e^{-t}`` in place of ``e^{-bt}``) after the
substitution ``t = e^u``. The oscillating factor ``t^{i Im s}`` becomes a pure
frequency in ``u``, so fixed-width panels with a 16-point rule give spectral
accuracy. The piece ``[0, T]`` is integrated from the power series of the
exponential, which keeps small ``Re s`` cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.special as sps

from .spectral import NumericalError


class GammaPoleError(ValueError):
    """Gamma evaluated at a nonpositive integer."""


def complex_gamma(z: complex | np.ndarray) -> complex | np.ndarray:
    """Gamma on the complex plane, raising at the poles.

    Thin wrapper over ``scipy.special.gamma`` (Lanczos-type approximation with
    reflection); the wrapper adds the pole check.
    """
    za = np.asarray(z, dtype=complex)
    re, im = za.real, za.imag
    pole = (im == 0) & (re <= 0) & (re == np.round(re))
    if np.any(pole):
        raise GammaPoleError(f"Gamma has a pole at {za[pole].ravel()[0].real:g}")
    out = sps.gamma(za)
    return complex(out) if np.ndim(z) == 0 else out


def riesz_constant(alpha: float) -> complex:
    """C_alpha = 1 / Gamma(1 - i alpha)."""
    return 1.0 / complex_gamma(1.0 - 1j * alpha)


@dataclass(frozen=True)
class QuadratureConfig:
    """Panel layout for the log-time Gauss-Legendre rule."""

    rel_tol: float = 1e-9
    panel_rule: int = 16
    max_panel_width: float = 0.5
    max_panels: int = 4000
    series_terms: int = 40

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.panel_rule < 2:
            raise ValueError("need at least two nodes per panel")

    def oscillation_cap(self, freq: float) -> float:
        """Largest admissible panel width for the frequency ``freq`` in log-time."""
        if freq == 0:
            return self.max_panel_width
        return min(self.max_panel_width, math.pi / (4.0 * abs(freq)))


def _upper_time(b_min: float, re_s: float, tol: float) -> float:
    """Time beyond which e^{-b t} t^{Re s} is negligible relative to the integral."""
    L = math.log(1.0 / tol) + 8.0
    # relative to the scale Gamma(Re s) b^{-Re s}, tail ~ (b t)^{Re s} e^{-b t}
    bt = L
    for _ in range(30):
        bt = L + max(re_s - 1.0, 0.0) * math.log(max(bt, 1.0))
    return bt / b_min


def _nodes(u_lo: float, u_hi: float, width: float, cfg: QuadratureConfig) -> tuple[np.ndarray, np.ndarray]:
    n_pan = max(1, math.ceil((u_hi - u_lo) / width))
    if n_pan > cfg.max_panels:
        raise NumericalError(f"quadrature needs {n_pan} panels, budget is {cfg.max_panels}")
    x, w = np.polynomial.legendre.leggauss(cfg.panel_rule)
    edges = np.linspace(u_lo, u_hi, n_pan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    return u, wu


def _series_head(b: np.ndarray, s: complex, T: float, terms: int, subtract_unit: bool) -> np.ndarray:
    """int_0^T (e^{-bt} [- e^{-t}]) t^{s-1} dt from the exponential series."""
    out = np.zeros(b.shape, dtype=complex)
    pb = np.ones(b.shape)  # (-b)^k / k!
    p1 = 1.0
    logT = math.log(T)
    for k in range(terms):
        if k > 0:
            pb = pb * (-b) / k
            p1 = p1 * (-1.0) / k
        coef = pb - p1 if subtract_unit else pb
        if k == 0 and subtract_unit:
            continue
        out += coef * np.exp((s + k) * logT) / (s + k)
    return out


def mellin_exp(
    b: np.ndarray,
    s: complex,
    cfg: QuadratureConfig | None = None,
    *,
    subtract_unit: bool = False,
    m: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """int_0^inf (e^{-b t} [- e^{-t}]) m(t) t^{s-1} dt for each positive rate ``b``.

    Needs ``Re s > 0``, or ``Re s > -1`` with ``subtract_unit``. ``m`` is a
    bounded function of time; it is frozen at ``m(T)`` only on a head
    ``[0, T]`` short enough to carry a ``rel_tol`` share of the integral.
    """
    cfg = cfg or QuadratureConfig()
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(b <= 0):
        raise ValueError("rates must be positive")
    s = complex(s)
    if s.real <= (-1.0 if subtract_unit else 0.0):
        raise ValueError("integral diverges at t = 0 for this exponent")
    b_all = np.append(b, 1.0) if subtract_unit else b
    b_max, b_min = float(b_all.max()), float(b_all.min())
    T = 0.5 / b_max
    if m is not None:
        # the head share scales like (T b)^{Re s}; stop at 60 e-folds below
        shrink = cfg.rel_tol ** (1.0 / max(s.real + (1.0 if subtract_unit else 0.0), 1e-3))
        T *= max(shrink, math.exp(-60.0))
    t_hi = max(_upper_time(b_min, s.real, cfg.rel_tol), 2.0 * T)
    width = cfg.oscillation_cap(s.imag)
    u, wu = _nodes(math.log(T), math.log(t_hi), width, cfg)
    t = np.exp(u)
    ts = np.exp(s * u) * wu  # t^s du  (dt/t = du)
    if m is not None:
        ts = ts * m(t)
    out = _series_head(b, s, T, cfg.series_terms, subtract_unit)
    if m is not None:
        out = out * m(np.array([T]))[0]
    # chunk over nodes to bound memory
    for lo in range(0, len(t), 256):
        tt = t[lo : lo + 256]
        E = np.exp(-np.outer(b, tt))
        if subtract_unit:
            E = E - np.exp(-tt)[None, :]
        out += E @ ts[lo : lo + 256]
    return out


def scalar_power_by_quadrature(lam: float, alpha: float, cfg: QuadratureConfig | None = None) -> complex:
    """C_alpha * lam * int_0^inf e^{-lam t} t^{-i alpha} dt, which equals lam^{i alpha}."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    val = mellin_exp(np.array([lam]), 1.0 - 1j * alpha, cfg)[0]
    return complex(riesz_constant(alpha) * lam * val)
