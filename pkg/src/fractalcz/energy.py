"""Energy form, harmonic extension, effective resistance and Dirichlet Green functions.

The discrete Laplacian is ``Delta = -M^{-1} L`` where ``L`` is the weighted
graph Laplacian and ``M`` the diagonal of lumped vertex measures, so the
Green-Gauss identity ``u^T L v = -sum (Delta u) v m`` holds exactly.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .fractal_model import ApproxGraph, IFSModel, ModelError, build_graph, words

log = logging.getLogger(__name__)


class DegenerateInput(UserWarning):
    """Emitted when an evaluation hits a documented degenerate case."""


@dataclass(frozen=True)
class EnergyLaplacian:
    """Stiffness ``L`` (so that ``E(u, v) = u^T L v``) and lumped mass."""

    graph: ApproxGraph
    stiffness: np.ndarray
    mass: np.ndarray

    @property
    def level(self) -> int:
        return self.graph.level

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]

    def energy(self, u: np.ndarray, v: np.ndarray | None = None) -> float:
        v = u if v is None else v
        return float(np.real(np.conj(u) @ self.stiffness @ v))

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Apply ``Delta = -M^{-1} L`` along the first axis of ``u``."""
        lu = self.stiffness @ u
        if lu.ndim == 1:
            return -lu / self.mass
        return -lu / self.mass[:, None]

    def laplacian_matrix(self) -> np.ndarray:
        return -self.stiffness / self.mass[:, None]


def assemble(graph: ApproxGraph) -> EnergyLaplacian:
    """Assemble the dense stiffness matrix from the edge list."""
    n = graph.n_vertices
    if graph.edges.size and (graph.edges.min() < 0 or graph.edges.max() >= n):
        raise ModelError("edge refers to a missing vertex")
    if np.any(graph.vertex_measure <= 0):
        raise ModelError("vertex measures must be positive")
    p, q = graph.edges[:, 0], graph.edges[:, 1]
    c = graph.conductance
    L = np.zeros((n, n))
    np.add.at(L, (p, q), -c)
    np.add.at(L, (q, p), -c)
    np.add.at(L, (p, p), c)
    np.add.at(L, (q, q), c)
    return EnergyLaplacian(graph=graph, stiffness=L, mass=graph.vertex_measure.copy())


def _dirichlet_solve(L: np.ndarray, fixed: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Harmonic function with prescribed values on ``fixed`` (row/column elimination)."""
    n = L.shape[0]
    free = np.setdiff1d(np.arange(n), fixed)
    u = np.zeros(n, dtype=np.result_type(values, float))
    u[fixed] = values
    if free.size:
        rhs = -L[np.ix_(free, fixed)] @ np.asarray(values)
        u[free] = sla.solve(L[np.ix_(free, free)], rhs, assume_a="pos")
    return u


def harmonic_extension(
    model: IFSModel, boundary_values: Sequence[float], to_level: int, el: EnergyLaplacian | None = None
) -> np.ndarray:
    """Energy-minimizing extension of data on V_0 to V_``to_level``.

    Values are returned in the nested vertex numbering of ``build_graph``.
    """
    b = np.asarray(boundary_values, dtype=float)
    if b.shape != (model.boundary_size,):
        raise ModelError(f"need {model.boundary_size} boundary values")
    if el is None or el.level != to_level or el.graph.model != model:
        el = assemble(build_graph(model, to_level))
    return _dirichlet_solve(el.stiffness, np.arange(model.boundary_size), b)


def effective_resistance(el: EnergyLaplacian, x: int, y: int) -> float:
    """R(x, y) = 1 / min{E(u): u(x) = 0, u(y) = 1}, by one linear solve."""
    if x == y:
        warnings.warn("effective_resistance called with x == y; returning 0", DegenerateInput, stacklevel=2)
        return 0.0
    u = _dirichlet_solve(el.stiffness, np.array([x, y]), np.array([0.0, 1.0]))
    return 1.0 / el.energy(u)


def resistance_matrix(el: EnergyLaplacian) -> np.ndarray:
    """All pairwise resistances from the inverse of L grounded at vertex 0."""
    n = el.n
    G = np.zeros((n, n))
    if n > 1:
        G[1:, 1:] = sla.inv(el.stiffness[1:, 1:])
    g = np.diag(G)
    R = g[:, None] + g[None, :] - 2.0 * G
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 0.0)
    return np.maximum(R, 0.0)


# ---------------------------------------------------------------------------
# Dirichlet Green functions on cells


@dataclass(frozen=True)
class CellDirichlet:
    """Local data of a cell: its vertices, boundary, interior and Green matrix."""

    word: tuple
    vertices: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    green: np.ndarray  # over ``interior`` x ``interior``
    stiffness: np.ndarray  # cell-local stiffness over ``vertices``

    def local(self, v: np.ndarray) -> np.ndarray:
        pos = {int(g): i for i, g in enumerate(self.vertices)}
        return np.array([pos[int(g)] for g in np.atleast_1d(v)], dtype=int)


def cell_dirichlet(el: EnergyLaplacian, word: Sequence[int]) -> CellDirichlet:
    g = el.graph
    word = tuple(word)
    verts = g.cell_vertices(word)
    bnd = g.cell_boundary(word)
    pos = {int(v): i for i, v in enumerate(verts)}
    N = g.model.branch_count
    ncell = N ** (g.level - len(word))
    # cells are enumerated lexicographically, so the subtree is contiguous
    first = sum(a * N ** (g.level - 1 - j) for j, a in enumerate(word))
    mask = (g.edge_cell >= first) & (g.edge_cell < first + ncell)
    Lc = np.zeros((len(verts), len(verts)))
    p = np.array([pos[int(v)] for v in g.edges[mask, 0]], dtype=int)
    q = np.array([pos[int(v)] for v in g.edges[mask, 1]], dtype=int)
    c = g.conductance[mask]
    np.add.at(Lc, (p, q), -c)
    np.add.at(Lc, (q, p), -c)
    np.add.at(Lc, (p, p), c)
    np.add.at(Lc, (q, q), c)
    bset = set(int(b) for b in bnd)
    interior = np.array([v for v in verts if int(v) not in bset], dtype=int)
    li = np.array([pos[int(v)] for v in interior], dtype=int)
    G = sla.inv(Lc[np.ix_(li, li)]) if li.size else np.zeros((0, 0))
    return CellDirichlet(word=word, vertices=verts, boundary=bnd, interior=interior, green=0.5 * (G + G.T), stiffness=Lc)


def green_dirichlet(el: EnergyLaplacian, cell: Sequence[int], x: int, y: int, *, _cache: dict | None = None) -> float:
    """Dirichlet Green function G^C(x, y) of the cell ``K_cell``.

    Normalized so that ``f = h^C - sum_s G^C(., s) (Delta f)(s) m(s)``.
    Returns 0 with a warning when ``x`` or ``y`` lies on the cell boundary.
    """
    if _cache is None:
        cd = cell_dirichlet(el, cell)
    else:
        cd = _cache.get(tuple(cell)) or _cache.setdefault(tuple(cell), cell_dirichlet(el, cell))
    bset = set(int(b) for b in cd.boundary)
    if int(x) in bset or int(y) in bset:
        warnings.warn("Green function evaluated on the cell boundary", DegenerateInput, stacklevel=2)
        return 0.0
    ipos = {int(v): i for i, v in enumerate(cd.interior)}
    if int(x) not in ipos or int(y) not in ipos:
        raise ModelError("points must lie in the cell")
    return float(cd.green[ipos[int(x)], ipos[int(y)]])


def green_identity_residual(el: EnergyLaplacian, cell: Sequence[int], f: np.ndarray, cd: CellDirichlet | None = None) -> float:
    """max over interior z of |f(z) - h^C(z) + sum_s G^C(z, s) (Delta f)(s) m(s)|.

    ``f`` is given on the cell vertices (ordered as ``cell_vertices``) or on all of V_m.
    """
    cd = cell_dirichlet(el, cell) if cd is None else cd
    f = np.asarray(f, dtype=float)
    if f.shape[0] == el.n and el.n != len(cd.vertices):
        f = f[cd.vertices]
    if cd.interior.size == 0:
        return 0.0
    li = cd.local(cd.interior)
    lb = cd.local(cd.boundary)
    h = _dirichlet_solve(cd.stiffness, lb, f[lb])
    lap = -(cd.stiffness @ f)[li] / el.mass[cd.interior]
    res = f[li] - h[li] + cd.green @ (lap * el.mass[cd.interior])
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# Self-similar Green series


@dataclass(frozen=True)
class GreenSeries:
    """Partial sums of the word expansion of the Green function of K.

    ``psi_matrix`` holds g(s, s') on V_1 \\ V_0; ``splines`` the level-1
    harmonic splines on each finer graph; ``level_terms[K]`` the partial sum
    over words of length <= K on V_m.
    """

    graph: ApproxGraph
    psi_matrix: np.ndarray
    interior_v1: np.ndarray
    level_terms: list = field(repr=False)

    @property
    def constant(self) -> float:
        """sum over s, s' of g(s, s')."""
        return float(self.psi_matrix.sum())


def _spline_values(model: IFSModel, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Level-1 harmonic splines of V_1 \\ V_0 evaluated on V_level."""
    el = assemble(build_graph(model, level))
    n1 = build_graph(model, 1).n_vertices
    nb = model.boundary_size
    S = np.zeros((el.n, n1 - nb))
    for j, s in enumerate(range(nb, n1)):
        vals = np.zeros(n1)
        vals[s] = 1.0
        S[:, j] = _dirichlet_solve(el.stiffness, np.arange(n1), vals)
    return S, el.mass


def green_series(el: EnergyLaplacian, max_terms: int | None = None) -> GreenSeries:
    """Evaluate the series on V_m; it terminates at K = m - 1 on V_m."""
    g = el.graph
    model, m = g.model, g.level
    if m < 1:
        raise ModelError("Green series needs level >= 1")
    K_max = m - 1 if max_terms is None else min(max_terms, m - 1)
    g1 = assemble(build_graph(model, 1))
    nb = model.boundary_size
    gmat = sla.inv(g1.stiffness[nb:, nb:])
    psi_cache: dict[int, np.ndarray] = {}
    key_index: dict[int, dict] = {}
    total = np.zeros((el.n, el.n))
    terms = []
    for k in range(K_max + 1):
        j = m - k
        if j not in psi_cache:
            S, _ = _spline_values(model, j)
            psi_cache[j] = S @ gmat @ S.T
            key_index[j] = {key: i for i, key in enumerate(build_graph(model, j).keys)}
        Psi, kidx = psi_cache[j], key_index[j]
        for w in words(model, k):
            lm = g.cell_local_map(w)
            gl = np.fromiter(lm.keys(), dtype=int)
            loc = np.array([kidx[key] for key in lm.values()], dtype=int)
            total[np.ix_(gl, gl)] += model.word_weight(w) * Psi[np.ix_(loc, loc)]
        terms.append(total.copy())
    return GreenSeries(graph=g, psi_matrix=gmat, interior_v1=np.arange(nb, g1.n), level_terms=terms)


def green_series_partial(gs: GreenSeries, K: int, y: int, z: int) -> float:
    """Partial sum over words of length <= K (saturates at K = m - 1)."""
    if K < 0:
        raise ModelError("K must be nonnegative")
    K = min(K, len(gs.level_terms) - 1)
    return float(gs.level_terms[K][y, z])


# ---------------------------------------------------------------------------
# export


def write_matrix_csv(path: str | Path, matrix: np.ndarray, *, value_name: str = "value") -> None:
    """Write ``row,col,value`` lines with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", value_name])
        n0, n1 = matrix.shape
        for i in range(n0):
            for j in range(n1):
                w.writerow([i, j, f"{matrix[i, j]:.17g}"])
