"""Orchestration: per-level cache, verification jobs and the report bundle.

BLAS runs single-threaded; parallelism is over whole jobs only. Every job
draws from its own seeded generator, so a report does not depend on the
number of worker threads or on job completion order.
"""

from __future__ import annotations

import logging
import math
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig
from .energy import (
    EnergyLaplacian,
    assemble,
    cell_dirichlet,
    green_identity_residual,
    green_series,
    green_series_partial,
    resistance_matrix,
)
from .estimates import (
    SEED_OFFSETS,
    BoundReport,
    CheckReport,
    FitError,
    HolderConfig,
    LevelData,
    _round,
    hilbert_schmidt_norm,
    hilbert_schmidt_threshold,
    int_exp_window,
    laplacian_in_second,
    lp_norm_estimate,
    verify_heat_envelope,
    verify_hilbert_schmidt,
    verify_holder,
    verify_int_exp,
    verify_l1_rows,
    verify_laplacian_bound,
    verify_lp_norms,
    verify_lsm_regime,
    verify_size_bound,
)
from .fractal_model import ApproxGraph, IFSModel, ModelError, build_graph, build_model, words
from .potentials import (
    KernelError,
    KernelField,
    bessel_imaginary_kernel,
    bessel_kernel,
    compose,
    direct_resolvent_kernel,
    lsm_kernel,
    riesz_imaginary_kernel,
)
from .products import (
    ProductBasis,
    ProductError,
    ProductMetric,
    orthonormality_spot_check,
    product_heat_kernel,
    product_kernel,
    sample_pairs,
    tensor_heat_sum,
    verify_product_bounds,
    verify_product_holder,
)
from .report import REPORT_SCHEMA
from .quadrature import GammaPoleError, scalar_power_by_quadrature
from .spectral import (
    NumericalError,
    SpectralBasis,
    eigenbasis,
    heat_envelope_fit,
    heat_kernel,
    match_spectra,
    oracle_spectrum,
    scaling_window,
)

log = logging.getLogger(__name__)


# errors that mean "the numerics broke", reported with exit code 3
NUMERICAL_ERRORS = (
    NumericalError,
    FitError,
    GammaPoleError,
    KernelError,
    ProductError,
    FloatingPointError,
    np.linalg.LinAlgError,
    sla.LinAlgError,
)

GATE_IDS = ("spectrum", "resistance", "green", "quadrature", "bessel_algebra")
VERIFY_IDS = GATE_IDS + (
    "size",
    "laplacian_smooth",
    "holder",
    "heat_envelope",
    "int_exp",
    "lsm_regimes",
    "l1_rows",
    "hilbert_schmidt",
    "lp_norms",
)
PRODUCT_IDS = ("product_heat", "product_size", "product_smooth", "product_holder")

# estimates run by ``verify --all`` per model; the interval is a calibration model
ALL_BY_MODEL = {
    "gasket": VERIFY_IDS,
    "interval": ("spectrum", "resistance", "green", "heat_envelope", "holder"),
}

FAMILY_NAMES = {"riesz": "riesz_imaginary", "bessel": "bessel", "bessel_imaginary": "bessel_imaginary"}


# ---------------------------------------------------------------------------
# per-level cache


@dataclass(frozen=True)
class LevelBundle:
    graph: ApproxGraph
    el: EnergyLaplacian
    basis: SpectralBasis
    R: np.ndarray

    @property
    def level(self) -> int:
        return self.graph.level


class Workspace:
    """Lazily built graph, Laplacian, eigenbasis and resistance matrix per level.

    Safe to share between worker threads; each level is built once.
    """

    def __init__(self, model: IFSModel | str, vertex_cap: int | None = None):
        self.model = build_model(model) if isinstance(model, str) else model
        self.vertex_cap = vertex_cap
        self._bundles: dict[int, LevelBundle] = {}
        self._locks: dict[int, threading.Lock] = {}
        self._guard = threading.Lock()
        self._memo: dict = {}

    def memo(self, key, fn: Callable):
        """Compute ``fn()`` once per key (shared derived results such as the heat fit)."""
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._memo:
                self._memo[key] = fn()
            return self._memo[key]

    def __call__(self, level: int) -> LevelBundle:
        with self._guard:
            lock = self._locks.setdefault(level, threading.Lock())
        with lock:
            if level not in self._bundles:
                kw = {} if self.vertex_cap is None else {"vertex_cap": self.vertex_cap}
                g = build_graph(self.model, level, **kw)
                el = assemble(g)
                self._bundles[level] = LevelBundle(g, el, eigenbasis(el), resistance_matrix(el))
                log.info("built %s level %d (%d vertices)", self.model.name, level, g.n_vertices)
            return self._bundles[level]


def make_kernel(family: str, alpha, basis: SpectralBasis, route: str = "spectral") -> KernelField:
    if family == "riesz":
        return riesz_imaginary_kernel(basis, float(alpha), route)
    if family == "bessel":
        return bessel_kernel(basis, complex(alpha), route)
    if family == "bessel_imaginary":
        return bessel_imaginary_kernel(basis, float(alpha), route)
    raise KernelError(f"unknown family {family!r}")


def _alpha_label(a) -> str:
    z = complex(a)
    return f"{z.real:g}" if z.imag == 0 else f"{z.real:g}{z.imag:+g}j"


def _rng(cfg: RunConfig, estimate: str, label: str) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, SEED_OFFSETS.get(estimate, 0), zlib.crc32(label.encode())])


def _rel(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.linalg.norm(A - B) / max(np.linalg.norm(B), 1e-300))


Entry = tuple[str, "BoundReport | CheckReport"]


# ---------------------------------------------------------------------------
# gate jobs


def job_spectrum(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    """Eigensolver against the independent oracle, plus M-orthonormality."""
    out: list[Entry] = []
    levels = (3, 4, 5) if ws.model.name == "gasket" else (cfg.top_level,)
    for lev in levels:
        b = ws(lev).basis
        gap = match_spectra(b.eigenvalues, oracle_spectrum(ws.model, lev))
        thr = 1e-8 if ws.model.name == "gasket" else 1e-10
        out.append((f"spectrum oracle L{lev}", CheckReport("spectrum", gap, thr, {"level": lev, "size": b.size})))
        out.append((f"orthonormality L{lev}", CheckReport("spectrum", b.orthonormality_error(), 1e-10, {"level": lev})))
    if ws.model.name == "interval":
        lam1 = float(ws(cfg.top_level).basis.eigenvalues[1])
        out.append(
            (
                f"lambda_1 vs pi^2 L{cfg.top_level}",
                CheckReport("spectrum", abs(lam1 - math.pi**2) / math.pi**2, 1e-3, {"lambda_1": lam1}),
            )
        )
    return out


def job_resistance(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    """Resistance is consistent under refinement; boundary pair matches series-parallel."""
    out: list[Entry] = []
    top = 4 if ws.model.name == "gasket" else min(cfg.top_level - 1, 6)
    for m in range(1, top + 1):
        R0 = resistance_matrix(assemble(build_graph(ws.model, m)))
        g1 = build_graph(ws.model, m + 1)
        R1 = resistance_matrix(assemble(g1))
        idx = np.array([g1.index_of(k) for k in build_graph(ws.model, m).keys])
        err = float(np.max(np.abs(R1[np.ix_(idx, idx)] - R0)))
        out.append((f"resistance L{m} vs L{m + 1}", CheckReport("resistance", err, 1e-10, {"level": m})))
    R0 = resistance_matrix(assemble(build_graph(ws.model, 0)))
    exact = 2.0 / 3.0 if ws.model.name == "gasket" else 1.0
    out.append(("resistance boundary pair", CheckReport("resistance", abs(R0[0, 1] - exact), 1e-12, {"exact": exact})))
    return out


def job_green(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    """Green identity on every cell with interior points; series against the solve route."""
    out: list[Entry] = []
    rng = _rng(cfg, "green", "identity")
    top = 4 if ws.model.name == "gasket" else 5
    for lev in range(1, top + 1):
        el = assemble(build_graph(ws.model, lev))
        worst = 0.0
        for length in range(lev):
            for w in words(ws.model, length):
                cd = cell_dirichlet(el, w)
                for _ in range(100):
                    f = rng.standard_normal(el.n)
                    worst = max(worst, green_identity_residual(el, w, f, cd))
        out.append((f"green identity L{lev}", CheckReport("green", worst, 1e-12, {"level": lev, "functions_per_cell": 100})))
        gs = green_series(el)
        G = cell_dirichlet(el, ()).green
        inner = np.arange(ws.model.boundary_size, el.n)
        S = np.array([[green_series_partial(gs, lev - 1, y, z) for z in inner] for y in inner]) if inner.size else G
        err = float(np.max(np.abs(S - G))) if inner.size else 0.0
        out.append((f"green series L{lev}", CheckReport("green", err, 1e-8, {"level": lev, "constant": gs.constant})))
    return out


def job_quadrature(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    """Scalar quadrature against closed-form powers; route agreement at level 4."""
    out: list[Entry] = []
    b = ws(4).basis
    lam = np.unique(np.round(b.eigenvalues[1:], 10))
    probe = np.geomspace(lam.min(), lam.max(), 12)
    for a in (0.5, 1.0, 2.0, 5.0):
        err = max(abs(scalar_power_by_quadrature(x, a) - np.exp(1j * a * math.log(x))) for x in probe)
        out.append((f"scalar power alpha={a:g}", CheckReport("quadrature", err, 1e-9, {"lambda_range": [probe[0], probe[-1]]})))
    cases = [("riesz", a) for a in (0.5, 1.0, 2.0, 5.0)]
    cases += [("bessel", a) for a in (-0.5, -1.0, complex(-0.2, 1.0))]
    cases += [("bessel_imaginary", a) for a in (0.5, 1.0, 2.0, 5.0)]
    for fam, a in cases:
        err = _rel(make_kernel(fam, a, b, "quadrature").values, make_kernel(fam, a, b).values)
        out.append((f"route agreement {fam} alpha={_alpha_label(a)} L4", CheckReport("quadrature", err, 1e-6)))
    return out


def job_bessel_algebra(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    """Group law and resolvent at the pooled levels."""
    out: list[Entry] = []
    for lev in cfg.levels:
        lb = ws(lev)
        K1 = bessel_kernel(lb.basis, -1.0).values
        half = bessel_kernel(lb.basis, -0.5)
        out.append((f"group law L{lev}", CheckReport("bessel_algebra", _rel(compose(half, half), K1), 1e-8)))
        direct = direct_resolvent_kernel(lb.el.stiffness, lb.el.mass)
        out.append((f"resolvent L{lev}", CheckReport("bessel_algebra", _rel(K1, direct), 1e-8)))
    return out


# ---------------------------------------------------------------------------
# estimate jobs


def _cz_operators(cfg: RunConfig) -> list[tuple[str, object]]:
    return [(fam, a) for fam, vals in cfg.operators.items() if fam != "bessel" for a in vals]


def job_scale(ws: Workspace, cfg: RunConfig, fam: str, a, want: tuple[str, ...]) -> list[Entry]:
    """Size and Laplacian bounds of one kernel over the pooled levels."""
    d = ws.model.resistance_dim
    data, laps = [], []
    for lev in cfg.levels:
        lb = ws(lev)
        K = make_kernel(fam, a, lb.basis).values
        data.append(LevelData(lev, K, lb.R, ws.model.r))
        if "laplacian_smooth" in want:
            laps.append(laplacian_in_second(K, lb.el.stiffness, lb.el.mass))
    tag = f"{fam} alpha={_alpha_label(a)}"
    out: list[Entry] = []
    if "size" in want:
        out.append((f"size {tag}", verify_size_bound(data, d, cfg.rel_tol, cfg.drift_cap)))
    if "laplacian_smooth" in want:
        out.append((f"laplacian_smooth {tag}", verify_laplacian_bound(data, laps, d, cfg.rel_tol, cfg.drift_cap)))
    return out


def holder_config(ws: Workspace, cfg: RunConfig) -> HolderConfig:
    try:
        return HolderConfig.for_model(ws.model, cfg.holder_c, cfg.holder_budget)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def job_holder(ws: Workspace, cfg: RunConfig, fam: str, a) -> list[Entry]:
    hc = holder_config(ws, cfg)
    levels = (cfg.top_level - 1, cfg.top_level)
    data, edges = [], {}
    for lev in levels:
        lb = ws(lev)
        data.append(LevelData(lev, make_kernel(fam, a, lb.basis).values, lb.R, ws.model.r))
        edges[lev] = lb.graph.edges
    rep = verify_holder(data, edges, hc, ws.model.resistance_dim, seed=cfg.seed, drift_cap=cfg.drift_cap)
    return [(f"holder {fam} alpha={_alpha_label(a)}", rep)]


def fit_heat(ws: Workspace, cfg: RunConfig):
    """Heat envelope fit at the top level over the scaling window (memoized)."""
    return ws.memo(("heat", cfg.top_level, cfg.seed), lambda: _fit_heat(ws, cfg))


def _fit_heat(ws: Workspace, cfg: RunConfig):
    lb = ws(cfg.top_level)
    m, R = ws.model, lb.R
    lo, hi = scaling_window(lb.basis, m)
    times = np.geomspace(lo, hi, 13)
    rng = _rng(cfg, "heat_envelope", "points")
    # diagonal points and pair sources kept away from the boundary
    Rb = R[:, : m.boundary_size].min(axis=1)
    cand = np.flatnonzero(Rb >= 0.2 * Rb.max())
    dp = rng.choice(cand, min(20, cand.size), replace=False)
    xs = rng.choice(cand, min(40, cand.size), replace=False)
    n = lb.graph.n_vertices
    pairs = np.array([(x, y) for x in xs for y in rng.choice(n, min(60, n), replace=False) if x != y])
    return heat_envelope_fit(lb.basis, R, times, pairs, dp, m.resistance_dim)


def job_heat(ws: Workspace, cfg: RunConfig, want: tuple[str, ...]) -> list[Entry]:
    m = ws.model
    fit = fit_heat(ws, cfg)
    out: list[Entry] = []
    if "heat_envelope" in want:
        if m.name == "interval":
            rep = verify_heat_envelope(fit, cfg.top_level, m.resistance_dim, beta_tol=0.03, gamma_target=1.0, gamma_tol=0.1, drift_cap=cfg.drift_cap)
        else:
            rep = verify_heat_envelope(fit, cfg.top_level, m.resistance_dim, beta_tol=0.05, drift_cap=cfg.drift_cap)
        out.append((f"heat_envelope L{cfg.top_level}", rep))
    if "int_exp" in want:
        lb = ws(cfg.top_level)
        lo, hi = int_exp_window(m, cfg.top_level, lb.R)
        rng = _rng(cfg, "int_exp", "centers")
        centers = rng.choice(lb.graph.n_vertices, 8, replace=False)
        rep = verify_int_exp(m, cfg.top_level, lb.R, lb.graph.vertex_measure, fit.gamma, fit.c, np.geomspace(lo, hi, 16), centers)
        out.append((f"int_exp L{cfg.top_level}", rep))
    return out


def job_lsm(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    d = ws.model.resistance_dim
    out: list[Entry] = []
    for s in (d + 1.0, d, 0.5 * d, 1.0):
        data = []
        for lev in cfg.levels:
            lb = ws(lev)
            data.append(LevelData(lev, lsm_kernel(lb.basis, s, d=d).values, lb.R, ws.model.r))
        out.append((f"lsm_regimes s={s:.6g}", verify_lsm_regime(data, s, d, cfg.rel_tol, cfg.drift_cap)))
    return out


def _bessel_alphas(cfg: RunConfig) -> tuple:
    return tuple(cfg.operators.get("bessel", ())) or (-0.5, complex(-0.5, 1.0))


def job_l1_rows(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    out: list[Entry] = []
    for a in _bessel_alphas(cfg):
        kernels = {lev: bessel_kernel(ws(lev).basis, a) for lev in cfg.levels}
        out.append((f"l1_rows bessel alpha={_alpha_label(a)}", verify_l1_rows(kernels, drift_cap=min(cfg.drift_cap, 2.0))))
    return out


def job_hilbert_schmidt(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    d = ws.model.resistance_dim
    thr = hilbert_schmidt_threshold(d)
    out: list[Entry] = []
    for shift in (-0.15, -0.05, 0.05, 0.15):
        a = thr + shift
        norms = {lev: hilbert_schmidt_norm(bessel_kernel(ws(lev).basis, a)) for lev in cfg.levels}
        out.append((f"hilbert_schmidt bessel alpha={a:.6g}", verify_hilbert_schmidt(norms, a, d, cfg.drift_cap)))
    return out


def job_lp(ws: Workspace, cfg: RunConfig) -> list[Entry]:
    out: list[Entry] = []
    families = [("riesz", 1.0), ("bessel", -0.5), ("bessel_imaginary", 1.0)]
    for fam, a in families:
        tag = f"{fam} alpha={_alpha_label(a)}"
        kernels = {lev: make_kernel(fam, a, ws(lev).basis) for lev in cfg.levels}
        exact = 1.0  # sup |multiplier|; (1+lambda)^{Re alpha} peaks at lambda = 0
        worst = max(abs(lp_norm_estimate(kf, 2.0) - exact) for kf in kernels.values())
        out.append((f"lp p=2 {tag}", CheckReport("lp_norms", worst, 1e-10, {"exact": exact})))
        for p in cfg.lp_exponents:
            norms = {lev: lp_norm_estimate(kf, p, seed=cfg.seed, basis=ws(lev).basis) for lev, kf in kernels.items()}
            out.append((f"lp p={p:g} {tag}", verify_lp_norms(norms, p, drift_cap=min(cfg.drift_cap, 2.0))))
    return out


# ---------------------------------------------------------------------------
# job plans


Job = tuple[str, Callable[[], list[Entry]]]


def verify_jobs(ws: Workspace, cfg: RunConfig, selected: tuple[str, ...]) -> list[Job]:
    unknown = set(selected) - set(VERIFY_IDS)
    if unknown:
        raise ConfigError(f"unknown estimates {sorted(unknown)}; choose from {', '.join(VERIFY_IDS)}")
    jobs: list[Job] = []
    sel = set(selected)
    gates = {
        "spectrum": job_spectrum,
        "resistance": job_resistance,
        "green": job_green,
        "quadrature": job_quadrature,
        "bessel_algebra": job_bessel_algebra,
    }
    for gid, fn in gates.items():
        if gid in sel:
            jobs.append((gid, lambda fn=fn: fn(ws, cfg)))
    if "heat_envelope" in sel or "int_exp" in sel:
        want = tuple(x for x in ("heat_envelope", "int_exp") if x in sel)
        jobs.append(("heat", lambda: job_heat(ws, cfg, want)))
    scale = tuple(x for x in ("size", "laplacian_smooth") if x in sel)
    for fam, a in _cz_operators(cfg):
        if scale:
            jobs.append((f"scale {fam} {a}", lambda fam=fam, a=a: job_scale(ws, cfg, fam, a, scale)))
        if "holder" in sel:
            jobs.append((f"holder {fam} {a}", lambda fam=fam, a=a: job_holder(ws, cfg, fam, a)))
    extra = {"lsm_regimes": job_lsm, "l1_rows": job_l1_rows, "hilbert_schmidt": job_hilbert_schmidt, "lp_norms": job_lp}
    for eid, fn in extra.items():
        if eid in sel:
            jobs.append((eid, lambda fn=fn: fn(ws, cfg)))
    return jobs


def product_jobs(ws: Workspace, cfg: RunConfig) -> list[Job]:
    """Two-fold product suite for the configured family."""
    fam = FAMILY_NAMES[cfg.product_family]
    a = cfg.product_alpha
    d = ws.model.resistance_dim
    tag = f"{fam} alpha={_alpha_label(a)}"

    def gamma() -> float:
        return cfg.product_gamma if cfg.product_gamma is not None else fit_heat(ws, cfg).gamma

    def heat() -> list[Entry]:
        lev = cfg.levels[0]
        b = ws(lev).basis
        pb = ProductBasis(b)
        rng = _rng(cfg, "product_heat", "pairs")
        x = rng.integers(0, b.size, (50, 2))
        y = rng.integers(0, b.size, (50, 2))
        worst = 0.0
        for t in (1e-3, 1e-2, 1e-1):
            hs = [heat_kernel(b, t)] * 2
            worst = max(worst, float(np.max(np.abs(product_heat_kernel(hs, x, y) - tensor_heat_sum(pb, t, x, y)))))
        orth = orthonormality_spot_check(pb, 200, rng)
        return [
            (f"product heat L{lev}", CheckReport("product_heat", worst, 1e-10)),
            (f"product orthonormality L{lev}", CheckReport("product_heat", orth, 1e-10)),
        ]

    def bounds() -> list[Entry]:
        g = gamma()
        samples = {}
        for lev in cfg.levels:
            lb = ws(lev)
            rng = _rng(cfg, "product_size", f"L{lev}")
            x, y = sample_pairs(lb.R, cfg.product_samples, 2, rng)
            ks = product_kernel(ProductBasis(lb.basis), fam, a, x, y, with_laplacian=True)
            samples[lev] = (ks, ProductMetric(lb.R, g, d))
        size, smooth = verify_product_bounds(samples, d, 2, ws.model.r, cfg.rel_tol, cfg.drift_cap)
        return [(f"product_size {tag}", size), (f"product_smooth {tag}", smooth)]

    def holder() -> list[Entry]:
        g = gamma()
        hc = holder_config(ws, cfg)
        levels = (cfg.top_level - 1, cfg.top_level)
        bases = {lev: ProductBasis(ws(lev).basis) for lev in levels}
        metrics = {lev: ProductMetric(ws(lev).R, g, d) for lev in levels}
        edges = {lev: ws(lev).graph.edges for lev in levels}
        rep = verify_product_holder(bases, metrics, edges, fam, a, hc.c, d, hc.pair_budget, cfg.seed, drift_cap=cfg.drift_cap)
        return [(f"product_holder {tag}", rep)]

    return [("product_heat", heat), ("product_bounds", bounds), ("product_holder", holder)]


# ---------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    bundle: dict
    exit_code: int


def run_jobs(jobs: list[Job], threads: int) -> list[dict]:
    """Run jobs on a pool of ``threads`` workers with single-threaded BLAS.

    Entries come back in job order whatever the completion order.
    """

    def guarded(job: Job) -> list[dict]:
        name, fn = job
        try:
            return [{"label": label, "kind": "bound" if isinstance(rep, BoundReport) else "check", **rep.to_dict()} for label, rep in fn()]
        except ConfigError:
            raise
        except NUMERICAL_ERRORS + (ModelError,) as exc:
            log.error("job %s failed: %s", name, exc)
            return [{"label": name, "kind": "error", "passed": False, "error": f"{type(exc).__name__}: {exc}"}]

    with threadpool_limits(limits=1):
        if threads <= 1 or len(jobs) <= 1:
            results = [guarded(j) for j in jobs]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(guarded, jobs))
    return [e for group in results for e in group]


def make_bundle(command: str, cfg: RunConfig, entries: list[dict]) -> RunResult:
    errors = [e for e in entries if e["kind"] == "error"]
    passed = bool(entries) and all(e["passed"] for e in entries)
    bundle = {
        "schema": REPORT_SCHEMA,
        "command": command,
        "config": cfg.to_dict(),
        "entries": entries,
        "passed": passed,
        "counts": {
            "total": len(entries),
            "passed": sum(1 for e in entries if e["passed"]),
            "errors": len(errors),
        },
    }
    code = 3 if errors else (0 if passed else 1)
    return RunResult(_round(bundle), code)


def run_verify(cfg: RunConfig, run_all: bool = False) -> RunResult:
    """Run the selected estimates (or the full suite of the model)."""
    selected = tuple(cfg.estimates)
    if run_all or not selected:
        selected = ALL_BY_MODEL[cfg.model]
    ws = Workspace(cfg.model, cfg.vertex_cap)
    entries = run_jobs(verify_jobs(ws, cfg, selected), cfg.thread_count)
    return make_bundle("verify", cfg, entries)


def run_products(cfg: RunConfig) -> RunResult:
    ws = Workspace(cfg.model, cfg.vertex_cap)
    entries = run_jobs(product_jobs(ws, cfg), cfg.thread_count)
    return make_bundle("product", cfg, entries)
