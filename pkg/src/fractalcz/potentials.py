"""Kernels of Riesz, Bessel and Laplace-transform-type operators.

Every family is built from the eigenbasis as ``K = Phi diag(q) Phi^T`` where
``q`` is the scalar multiplier. The ``spectral`` route evaluates ``q`` in
closed form; the ``quadrature`` route integrates the heat-kernel
representation mode by mode with :func:`mellin_exp`. The kernel acts by
``(T u)(x) = sum_y K(x, y) u(y) m(y)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .quadrature import QuadratureConfig, complex_gamma, mellin_exp, riesz_constant
from .spectral import SpectralBasis

log = logging.getLogger(__name__)

FAMILIES = ("riesz_imaginary", "bessel", "bessel_imaginary", "laplace_type", "lsm")
ROUTES = ("spectral", "quadrature", "difference")


class KernelError(ValueError):
    """Invalid kernel request."""


@dataclass(frozen=True)
class KernelField:
    """Complex kernel matrix over V_m x V_m plus its provenance."""

    family: str
    parameter: object
    route: str
    values: np.ndarray
    basis_id: str
    mass: np.ndarray = field(repr=False)
    multipliers: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def operator_matrix(self) -> np.ndarray:
        """Matrix of u -> T u, i.e. K diag(m)."""
        return self.values * self.mass[None, :]

    def hermitian_error(self) -> float:
        K = self.values
        scale = max(float(np.max(np.abs(K))), 1e-300)
        return float(np.max(np.abs(K - K.conj().T)) / scale)

    def metadata(self, **extra) -> dict:
        p = self.parameter
        if isinstance(p, complex):
            p = {"re": p.real, "im": p.imag}
        elif isinstance(p, MultiplierSpec):
            p = p.describe()
        elif isinstance(p, tuple):
            p = [x.describe() if isinstance(x, MultiplierSpec) else x for x in p]
        meta = {
            "schema": "fractalcz.kernel/1",
            "family": self.family,
            "parameter": p,
            "route": self.route,
            "basis_id": self.basis_id,
            "shape": list(self.values.shape),
        }
        meta.update(extra)
        return meta

    def save(self, stem: str | Path, **extra) -> tuple[Path, Path]:
        """Write ``stem.npy`` (complex128) and ``stem.json`` sidecar."""
        stem = Path(stem)
        # append rather than replace: stems may contain dots (alpha=1.0)
        npy = stem.parent / f"{stem.name}.npy"
        side = stem.parent / f"{stem.name}.json"
        np.save(npy, self.values.astype(np.complex128))
        side.write_text(json.dumps(self.metadata(**extra), indent=1, sort_keys=True), encoding="utf-8")
        return npy, side

    def write_csv(self, path: str | Path, max_size: int = 400) -> None:
        if self.n > max_size:
            raise KernelError(f"CSV export is limited to {max_size} vertices")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("row,col,re,im\n")
            for i in range(self.n):
                for j in range(self.n):
                    v = self.values[i, j]
                    fh.write(f"{i},{j},{v.real:.17g},{v.imag:.17g}\n")


@dataclass(frozen=True)
class MultiplierSpec:
    """Bounded time multiplier m(t).

    ``power_imag``: ``m(t) = coef * t^{-i alpha}`` with real alpha (coef
    defaults to C_alpha, so the operator is (-Delta)^{i alpha});
    ``power_complex``: ``m(t) = coef * t^{-alpha}`` with ``Re alpha = 0``; ``bounded_function``: ``m(t) = func(t)`` with an
    optional closed-form ``p(lambda)``. ``rate`` multiplies every kind by
    ``e^{-rate t}``.
    """

    kind: str
    alpha: complex = 0.0
    coef: complex | None = None
    rate: float = 0.0
    func: Callable[[np.ndarray], np.ndarray] | None = None
    p_closed: Callable[[np.ndarray], np.ndarray] | None = None
    bound: float = 1.0
    name: str = ""
    # value of ``func`` when it is constant
    func_value: complex | None = None

    def __post_init__(self):
        if self.kind not in ("power_imag", "power_complex", "bounded_function"):
            raise KernelError(f"unknown multiplier kind {self.kind!r}")
        if self.kind == "bounded_function" and self.func is None:
            raise KernelError("bounded_function needs func")
        if self.kind == "power_imag" and complex(self.alpha).imag != 0:
            raise KernelError("power_imag takes a real alpha")
        if self.kind == "power_complex" and complex(self.alpha).real != 0:
            raise KernelError("t^{-alpha} is bounded only for Re alpha = 0")
        if not math.isfinite(self.bound):
            raise KernelError("multiplier must be bounded")
        if self.rate < 0:
            raise KernelError("rate must be nonnegative")

    @classmethod
    def constant(cls, value: float = 1.0) -> "MultiplierSpec":
        return cls(
            kind="bounded_function",
            func=lambda t: np.full(np.shape(t), value, dtype=complex),
            func_value=value,
            p_closed=lambda lam: np.where(lam > 0, value, 0.0).astype(complex),
            bound=abs(value),
            name=f"const({value:g})",
        )

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "MultiplierSpec":
        """m(t) = e^{-rate t}, p(lambda) = lambda / (lambda + rate)."""
        return cls(
            kind="bounded_function",
            func=lambda t: np.ones(np.shape(t), dtype=complex),
            func_value=1.0,
            rate=rate,
            p_closed=lambda lam: (lam / (lam + rate)).astype(complex),
            bound=1.0,
            name=f"exp(-{rate:g}t)",
        )

    @classmethod
    def imaginary_power(cls, alpha: float) -> "MultiplierSpec":
        c = riesz_constant(alpha)
        return cls(kind="power_imag", alpha=alpha, coef=c, bound=abs(c), name=f"C*t^(-{alpha:g}i)")

    @property
    def _coef(self) -> complex:
        if self.coef is not None:
            return complex(self.coef)
        if self.kind == "power_imag":
            return riesz_constant(float(np.real(self.alpha)))
        return 1.0

    @property
    def constant_factor(self) -> complex | None:
        """c when m(t) = c t^{shift} e^{-rate t}, otherwise None."""
        if self.kind != "bounded_function":
            return self._coef
        return None if self.func_value is None else self._coef * complex(self.func_value)

    @property
    def exponent_shift(self) -> complex:
        """Power of t carried by m (so m(t) t^{s-1} = rest * t^{s + shift - 1})."""
        if self.kind == "power_imag":
            return -1j * complex(self.alpha).real
        if self.kind == "power_complex":
            return -complex(self.alpha)
        return 0.0

    def time_factor(self, t: np.ndarray) -> np.ndarray:
        """Part of m(t) not folded into the exponent or the rate."""
        if self.kind == "bounded_function":
            return self._coef * self.func(t)
        return np.full(np.shape(t), self._coef, dtype=complex)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.time_factor(t) * np.exp(self.exponent_shift * np.log(t)) * np.exp(-self.rate * t)

    def p(self, lam: np.ndarray) -> np.ndarray | None:
        """Closed-form p(lambda) = lambda int m(t) e^{-t lambda} dt, or None."""
        lam = np.asarray(lam, dtype=float)
        if self.kind == "bounded_function":
            return None if self.p_closed is None else self.p_closed(lam)
        s = 1.0 + self.exponent_shift
        b = lam + self.rate
        out = np.zeros(lam.shape, dtype=complex)
        pos = lam > 0
        out[pos] = self._coef * lam[pos] * complex_gamma(s) * b[pos] ** (-s)
        return out

    def describe(self) -> dict:
        a = complex(self.alpha)
        return {"kind": self.kind, "alpha": [a.real, a.imag], "rate": self.rate, "bound": self.bound, "name": self.name}


def _field(family, parameter, route, basis: SpectralBasis, q: np.ndarray, hermitian: bool = True) -> KernelField:
    P = basis.vectors
    K = (P * q) @ P.T
    if hermitian:
        # kernels of real-parameter families are complex symmetric; symmetrize round-off
        K = 0.5 * (K + K.T)
    if not np.all(np.isfinite(K)):
        raise FloatingPointError(f"{family} kernel has non-finite entries")
    return KernelField(
        family=family,
        parameter=parameter,
        route=route,
        values=K,
        basis_id=basis.basis_id,
        mass=basis.mass,
        multipliers=q,
    )


def _check_route(route: str, allowed: tuple[str, ...]) -> None:
    if route not in allowed:
        raise KernelError(f"route must be one of {allowed}, got {route!r}")


# ---------------------------------------------------------------------------
# multipliers per family


def riesz_multipliers(lam: np.ndarray, alpha: float, route: str = "spectral", cfg: QuadratureConfig | None = None) -> np.ndarray:
    q = np.zeros(lam.shape, dtype=complex)
    pos = lam > 0
    if route == "spectral":
        q[pos] = np.exp(1j * alpha * np.log(lam[pos]))
    else:
        q[pos] = riesz_constant(alpha) * lam[pos] * mellin_exp(lam[pos], 1.0 - 1j * alpha, cfg)
    return q


def riesz_imaginary_kernel(
    basis: SpectralBasis, alpha: float, route: str = "spectral", cfg: QuadratureConfig | None = None
) -> KernelField:
    """Kernel of (-Delta)^{i alpha}; the constant mode is annihilated."""
    _check_route(route, ("spectral", "quadrature"))
    alpha = float(alpha)
    q = riesz_multipliers(basis.eigenvalues, alpha, route, cfg)
    return _field("riesz_imaginary", alpha, route, basis, q)


def bessel_multipliers(lam: np.ndarray, alpha: complex, route: str = "spectral", cfg: QuadratureConfig | None = None) -> np.ndarray:
    alpha = complex(alpha)
    b = 1.0 + lam
    if route == "spectral":
        return np.exp(alpha * np.log(b))
    return mellin_exp(b, -alpha, cfg) / complex_gamma(-alpha)


def bessel_kernel(
    basis: SpectralBasis, alpha: complex, route: str = "spectral", cfg: QuadratureConfig | None = None
) -> KernelField:
    """Kernel of (I - Delta)^alpha for Re alpha < 0."""
    _check_route(route, ("spectral", "quadrature"))
    alpha = complex(alpha)
    if alpha.real >= 0:
        raise KernelError("bessel_kernel needs Re alpha < 0; use bessel_group_extension")
    q = bessel_multipliers(basis.eigenvalues, alpha, route, cfg)
    return _field("bessel", alpha, route, basis, q, hermitian=alpha.imag == 0)


def group_order(alpha: complex) -> int:
    """The k with -1 <= Re alpha - k < 0."""
    return math.floor(complex(alpha).real) + 1


def bessel_group_extension(basis: SpectralBasis, alpha: complex, k: int, stiffness: np.ndarray) -> KernelField:
    """(I - Delta)^k applied to the kernel of (I - Delta)^{alpha - k}.

    ``stiffness`` is the L of the basis' graph; ``I - Delta = M^{-1}(M + L)``.
    """
    alpha = complex(alpha)
    beta = alpha - k
    if not (-1.0 <= beta.real < 0.0) or k < 0:
        raise KernelError(f"k={k} does not put Re(alpha - k) in [-1, 0)")
    base = bessel_kernel(basis, beta)
    K = base.values
    A = np.eye(len(basis.mass)) + stiffness / basis.mass[:, None]
    for _ in range(k):
        K = A @ K
    return KernelField(
        family="bessel",
        parameter=alpha,
        route="group",
        values=K,
        basis_id=basis.basis_id,
        mass=basis.mass,
        multipliers=base.multipliers * (1.0 + basis.eigenvalues) ** k,
    )


def bessel_imaginary_multipliers(lam: np.ndarray, alpha: float, route: str = "spectral", cfg: QuadratureConfig | None = None) -> np.ndarray:
    b = 1.0 + lam
    if route == "spectral":
        return np.exp(1j * alpha * np.log(b))
    if route == "quadrature":
        # C_alpha int (1+lam) e^{-(1+lam)t} t^{-i alpha} dt
        return riesz_constant(alpha) * b * mellin_exp(b, 1.0 - 1j * alpha, cfg)
    # -i alpha C_alpha int (e^{-(1+lam)t} - e^{-t}) t^{-i alpha - 1} dt = (1+lam)^{i alpha} - 1
    return -1j * alpha * riesz_constant(alpha) * mellin_exp(b, -1j * alpha, cfg, subtract_unit=True)


def bessel_imaginary_kernel(
    basis: SpectralBasis, alpha: float, route: str = "spectral", cfg: QuadratureConfig | None = None
) -> KernelField:
    """Kernel of (I - Delta)^{i alpha}.

    ``route="difference"`` integrates the time form with the unit subtracted;
    it returns the kernel minus that of the identity, so it agrees with the
    other routes off the diagonal.
    """
    _check_route(route, ROUTES)
    alpha = float(alpha)
    if alpha == 0.0:
        q = np.ones(basis.size, dtype=complex) if route != "difference" else np.zeros(basis.size, dtype=complex)
        return _field("bessel_imaginary", alpha, route, basis, q)
    q = bessel_imaginary_multipliers(basis.eigenvalues, alpha, route, cfg)
    return _field("bessel_imaginary", alpha, route, basis, q)


def laplace_multipliers(lam: np.ndarray, mult: MultiplierSpec, route: str = "quadrature", cfg: QuadratureConfig | None = None) -> np.ndarray:
    if route == "spectral":
        p = mult.p(lam)
        if p is None:
            raise KernelError("multiplier has no closed form; use the quadrature route")
        return p
    q = np.zeros(lam.shape, dtype=complex)
    pos = lam > 0
    s = 1.0 + mult.exponent_shift
    b = lam[pos] + mult.rate
    q[pos] = lam[pos] * mellin_exp(b, s, cfg, m=mult.time_factor)
    return q


def laplace_type_kernel(
    basis: SpectralBasis, mult: MultiplierSpec, route: str = "quadrature", cfg: QuadratureConfig | None = None
) -> KernelField:
    """K_p = int (-Delta_1 h_t) m(t) dt with multiplier p(lambda) = lambda int m e^{-t lambda} dt."""
    _check_route(route, ("spectral", "quadrature"))
    q = laplace_multipliers(basis.eigenvalues, mult, route, cfg)
    return _field("laplace_type", mult, route, basis, q)


def lsm_multipliers(
    lam: np.ndarray,
    sigma: float,
    mult: MultiplierSpec,
    route: str = "spectral",
    cfg: QuadratureConfig | None = None,
    subtract: bool = False,
) -> np.ndarray:
    """int m(t) t^{sigma} e^{-(1+lam) t} dt / t per mode (unit-subtracted if ``subtract``)."""
    b = 1.0 + lam + mult.rate
    s = sigma + mult.exponent_shift
    if route == "spectral":
        c = mult.constant_factor
        if c is None:
            raise KernelError("multiplier has no closed form; use the quadrature route")
        if not subtract:
            return c * complex_gamma(s) * np.exp(-s * np.log(b))
        b1 = 1.0 + mult.rate
        if abs(s) < 1e-14:
            return -c * (np.log(b) - math.log(b1))
        return c * complex_gamma(s) * (np.exp(-s * np.log(b)) - b1 ** (-s))
    if not subtract:
        return mellin_exp(b, s, cfg, m=mult.time_factor)
    if mult.rate != 0:
        raise KernelError("unit subtraction is implemented for rate 0")
    return mellin_exp(b, s, cfg, subtract_unit=True, m=mult.time_factor)


def lsm_kernel(
    basis: SpectralBasis,
    s: float,
    mult: MultiplierSpec | None = None,
    route: str = "spectral",
    cfg: QuadratureConfig | None = None,
    d: float | None = None,
) -> KernelField:
    """L_{s,m}(x, y) = int m(t) t^{s/(d+1)} h_t(x, y) e^{-t} dt / t.

    For ``s <= 0`` the per-mode integrals diverge; the unit-subtracted form is
    used instead, which is exact off the diagonal. The diagonal is then set to
    NaN and flagged through ``parameter``.
    """
    _check_route(route, ("spectral", "quadrature"))
    mult = mult or MultiplierSpec.constant(1.0)
    d = basis.resistance_dim if d is None else d
    sigma = s / (d + 1.0)
    if sigma <= -1.0:
        raise KernelError("s must exceed -(d+1)")
    subtract = sigma <= 0
    if subtract:
        log.warning("lsm kernel with s <= 0 diverges on the diagonal; diagonal set to NaN")
    q = lsm_multipliers(basis.eigenvalues, sigma, mult, route, cfg, subtract=subtract)
    P = basis.vectors
    K = (P * q) @ P.T
    K = 0.5 * (K + K.T)
    if subtract:
        np.fill_diagonal(K, np.nan)
    return KernelField(
        family="lsm",
        parameter=(float(s), mult),
        route=route,
        values=K,
        basis_id=basis.basis_id,
        mass=basis.mass,
        multipliers=q,
    )


def lsm_value(basis: SpectralBasis, s: float, x: int, y: int, mult: MultiplierSpec | None = None, route: str = "spectral") -> complex:
    """Single entry of :func:`lsm_kernel`."""
    if s <= 0 and x == y:
        raise KernelError("L_{s,m} diverges on the diagonal for s <= 0")
    mult = mult or MultiplierSpec.constant(1.0)
    sigma = s / (basis.resistance_dim + 1.0)
    q = lsm_multipliers(basis.eigenvalues, sigma, mult, route, subtract=sigma <= 0)
    return complex(np.sum(basis.vectors[x] * q * basis.vectors[y]))


# ---------------------------------------------------------------------------
# operations on kernels


def apply_kernel(kf: KernelField, u: np.ndarray) -> np.ndarray:
    """(T u)(x) = sum_y K(x, y) u(y) m(y)."""
    u = np.asarray(u)
    if u.shape[0] != kf.n:
        raise KernelError(f"function has {u.shape[0]} values, kernel expects {kf.n}")
    mu = u * kf.mass if u.ndim == 1 else u * kf.mass[:, None]
    return kf.values @ mu


def compose(k1: KernelField, k2: KernelField) -> np.ndarray:
    """Kernel of T1 T2: K1 diag(m) K2."""
    if k1.basis_id != k2.basis_id:
        raise KernelError("kernels built on different bases")
    return (k1.values * k1.mass[None, :]) @ k2.values


def direct_resolvent_kernel(stiffness: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Kernel of (I - Delta)^{-1} by solving (M + L) u = M delta_y, column by column."""
    A = np.diag(mass) + stiffness
    # T u = K M u, and T = (M + L)^{-1} M, so K = (M + L)^{-1}
    return np.linalg.solve(A, np.eye(len(mass)))


def apply_to_eigenfunctions(kf: KernelField, basis: SpectralBasis) -> np.ndarray:
    """Diagonal of Phi^T M K M Phi, the multiplier seen by each eigenfunction."""
    P = basis.vectors
    MP = basis.mass[:, None] * P
    return np.einsum("in,in->n", MP, kf.values @ MP)
