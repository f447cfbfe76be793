"""Self-similar models and their level-m approximation graphs.

Vertices are identified symbolically. A point ``F_w(q_k)`` is reduced to a
canonical key by stripping trailing copies of ``k`` from ``w`` and then, if
the remaining word ends in a letter ``i`` with a contact rule
``F_i(q_k) = F_k(q_i)``, by merging the two representations into one key.
No floating-point coordinates are compared anywhere.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_VERTEX_CAP = 5000

Word = tuple[int, ...]


class ModelError(ValueError):
    """Unknown model or out-of-range construction request."""


@dataclass(frozen=True)
class IFSModel:
    """Description of a nested fractal by its scaling data.

    Letters and boundary points are both indexed ``0..N-1``; boundary point
    ``k`` is the fixed point of map ``k``.
    """

    name: str
    branch_count: int
    energy_weights: tuple[Fraction, ...]
    measure_weights: tuple[Fraction, ...]
    boundary_size: int
    resistance_dim: float
    # pairs (i, k) with F_i(q_k) = F_k(q_i)
    contacts: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    # Euclidean position of each boundary point, only used for display/tests
    boundary_points: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if self.branch_count < 2:
            raise ModelError("need at least two maps")
        if len(self.energy_weights) != self.branch_count:
            raise ModelError("one energy weight per map")
        if len(self.measure_weights) != self.branch_count:
            raise ModelError("one measure weight per map")
        if sum(self.measure_weights) != 1:
            raise ModelError("measure weights must sum to one")
        for r, mu in zip(self.energy_weights, self.measure_weights):
            if not 0 < r < 1 or not 0 < mu < 1:
                raise ModelError("weights must lie in (0, 1)")
            if abs(float(r) ** self.resistance_dim - float(mu)) > 1e-12:
                raise ModelError("measure weights must equal r_i**d")

    @property
    def r(self) -> float:
        """Largest energy weight (the ``r`` of the separation constants)."""
        return float(max(self.energy_weights))

    @property
    def walk_exponent(self) -> float:
        """d + 1, the time-space scaling exponent in the resistance metric."""
        return self.resistance_dim + 1.0

    @property
    def beta(self) -> float:
        """On-diagonal heat exponent d/(d+1)."""
        return self.resistance_dim / (self.resistance_dim + 1.0)

    def word_weight(self, word: Sequence[int]) -> float:
        return math.prod(float(self.energy_weights[i]) for i in word)

    def word_measure(self, word: Sequence[int]) -> float:
        return math.prod(float(self.measure_weights[i]) for i in word)


def _solve_dimension(r: Fraction, mu: Fraction) -> float:
    return math.log(float(mu)) / math.log(float(r))


def build_model(name: str) -> IFSModel:
    """Return one of the shipped models, ``"gasket"`` or ``"interval"``."""
    if name == "gasket":
        r, mu = Fraction(3, 5), Fraction(1, 3)
        contacts = frozenset((i, k) for i in range(3) for k in range(3) if i != k)
        return IFSModel(
            name="gasket",
            branch_count=3,
            energy_weights=(r,) * 3,
            measure_weights=(mu,) * 3,
            boundary_size=3,
            resistance_dim=_solve_dimension(r, mu),
            contacts=contacts,
            boundary_points=((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2)),
        )
    if name == "interval":
        r = mu = Fraction(1, 2)
        return IFSModel(
            name="interval",
            branch_count=2,
            energy_weights=(r, r),
            measure_weights=(mu, mu),
            boundary_size=2,
            resistance_dim=1.0,
            contacts=frozenset({(0, 1), (1, 0)}),
            boundary_points=((0.0,), (1.0,)),
        )
    raise ModelError(f"unknown model {name!r}; expected 'gasket' or 'interval'")


def vertex_key(model: IFSModel, word: Sequence[int], k: int) -> tuple:
    """Canonical symbolic address of the point ``F_word(q_k)``."""
    w = list(word)
    while w and w[-1] == k:
        w.pop()
    if not w:
        return ("b", k)
    i = w[-1]
    if (i, k) not in model.contacts:
        return ("p", tuple(w), k)
    return ("j", tuple(w[:-1]), frozenset((i, k)))


def _sort_token(key: tuple) -> tuple:
    # stable ordering for keys created at the same level
    if key[0] == "j":
        return (key[0], key[1], tuple(sorted(key[2])))
    return key


@dataclass(frozen=True)
class ApproxGraph:
    """Level-m graph approximation of a model.

    ``edges`` is an (E, 2) integer array, ``conductance`` the matching
    weights r_w^{-1}; ``cells`` maps each level-m word to the indices of its
    boundary vertices in boundary order.
    """

    model: IFSModel
    level: int
    keys: tuple
    edges: np.ndarray
    conductance: np.ndarray
    vertex_measure: np.ndarray
    cells: dict
    edge_cell: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.keys)

    @property
    def boundary(self) -> np.ndarray:
        return np.arange(self.model.boundary_size)

    def index_of(self, key) -> int:
        return self._index[key]

    @property
    def _index(self) -> dict:
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {k: i for i, k in enumerate(self.keys)}
            object.__setattr__(self, "_index_cache", idx)
        return idx

    def vertex_of(self, word: Sequence[int], k: int) -> int:
        return self._index[vertex_key(self.model, word, k)]

    def cell_vertices(self, word: Sequence[int]) -> np.ndarray:
        """All level-m vertices lying in the cell ``K_word`` (|word| <= level)."""
        word = tuple(word)
        if len(word) > self.level:
            raise ModelError("cell is finer than the graph")
        out = set()
        for tail in itertools.product(range(self.model.branch_count), repeat=self.level - len(word)):
            for v in self.cells[word + tail]:
                out.add(int(v))
        return np.array(sorted(out), dtype=int)

    def cell_local_map(self, word: Sequence[int]) -> dict[int, tuple]:
        """Map global vertex index in ``K_word`` to the key of its preimage
        under ``F_word`` (a key of the level ``level-|word|`` graph)."""
        word = tuple(word)
        model = self.model
        out = {}
        for tail in itertools.product(range(model.branch_count), repeat=self.level - len(word)):
            for k in range(model.boundary_size):
                g = self._index[vertex_key(model, word + tail, k)]
                out.setdefault(g, vertex_key(model, tail, k))
        return out

    def cell_boundary(self, word: Sequence[int]) -> np.ndarray:
        word = tuple(word)
        return np.array([self.vertex_of(word, k) for k in range(self.model.boundary_size)])

    def coordinates(self) -> np.ndarray:
        """Euclidean positions (ratio-1/2 similitudes); for plots and tests."""
        q = np.asarray(self.model.boundary_points, dtype=float)
        pts = np.zeros((self.n_vertices, q.shape[1]))
        for word, verts in self.cells.items():
            for k, v in enumerate(verts):
                p = q[k]
                for i in reversed(word):
                    p = 0.5 * (p - q[i]) + q[i]
                pts[v] = p
        return pts

    def to_json(self) -> dict:
        return {
            "schema": "fractalcz.graph/1",
            "model": self.model.name,
            "level": self.level,
            "resistance_dim": self.model.resistance_dim,
            "n_vertices": self.n_vertices,
            "boundary": self.boundary.tolist(),
            "vertex_measure": self.vertex_measure.tolist(),
            "edges": self.edges.tolist(),
            "conductance": self.conductance.tolist(),
            "cells": {"".join(str(i) for i in w): list(map(int, v)) for w, v in self.cells.items()},
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")


def expected_counts(model: IFSModel, level: int) -> tuple[int, int]:
    """Closed-form (vertex, edge) counts for the shipped models."""
    if model.name == "gasket":
        return (3 ** (level + 1) + 3) // 2, 3 ** (level + 1)
    if model.name == "interval":
        return 2**level + 1, 2**level
    raise ModelError(f"no closed form for {model.name}")


def build_graph(model: IFSModel, level: int, vertex_cap: int = DEFAULT_VERTEX_CAP) -> ApproxGraph:
    """Build the level-``level`` approximation graph.

    Vertex numbering is nested: the vertices of V_k are the first |V_k|
    indices for every k <= level, with V_0 first.
    """
    if level < 0:
        raise ModelError("level must be nonnegative")
    N, nb = model.branch_count, model.boundary_size
    if model.name in ("gasket", "interval") and expected_counts(model, level)[0] > vertex_cap:
        raise ModelError(f"level {level} exceeds the vertex cap {vertex_cap}")

    keys: list = []
    index: dict = {}
    for k in range(nb):
        key = vertex_key(model, (), k)
        index[key] = len(keys)
        keys.append(key)
    for lev in range(1, level + 1):
        new = []
        for word in itertools.product(range(N), repeat=lev):
            for k in range(nb):
                key = vertex_key(model, word, k)
                if key not in index:
                    index[key] = -1
                    new.append(key)
        for key in sorted(set(new), key=_sort_token):
            index[key] = len(keys)
            keys.append(key)
        if len(keys) > vertex_cap:
            raise ModelError(f"level {level} exceeds the vertex cap {vertex_cap}")

    cells: dict = {}
    edges, cond, edge_cell = [], [], []
    measure = np.zeros(len(keys))
    words = list(itertools.product(range(N), repeat=level))
    for c, word in enumerate(words):
        verts = [index[vertex_key(model, word, k)] for k in range(nb)]
        cells[word] = verts
        g = 1.0 / model.word_weight(word)
        for a, b in itertools.combinations(range(nb), 2):
            edges.append((verts[a], verts[b]))
            cond.append(g)
            edge_cell.append(c)
        measure[verts] += model.word_measure(word) / nb

    return ApproxGraph(
        model=model,
        level=level,
        keys=tuple(keys),
        edges=np.array(edges, dtype=int).reshape(-1, 2),
        conductance=np.array(cond),
        vertex_measure=measure,
        cells=cells,
        edge_cell=np.array(edge_cell, dtype=int),
    )


@dataclass(frozen=True)
class CellPartition:
    target_size: float
    cells: list
    size_constant: float
    level: int


def cell_partition(graph: ApproxGraph, target_size: float, size_constant: float = 1.0) -> CellPartition:
    """Cells of size ``target_size``: words w with c1 r_w <= R < c1 r_{w minus last letter}.

    Built by stopping time from the empty word, which also covers unequal
    weights. ``size_constant`` is c1.
    """
    model = graph.model
    c1 = size_constant
    finest = c1 * min(model.word_weight(w) for w in graph.cells)
    tol = 1e-12 * target_size
    if target_size > c1 + tol or target_size < finest - tol:
        raise ModelError(
            f"target size {target_size:g} outside the resolvable range [{finest:g}, {c1:g}]"
        )
    out: list = []
    stack: list = [()]
    while stack:
        w = stack.pop()
        if c1 * model.word_weight(w) <= target_size + tol:
            out.append(w)
        else:
            stack.extend(w + (i,) for i in reversed(range(model.branch_count)))
    out.sort()
    levels = {len(w) for w in out}
    return CellPartition(
        target_size=target_size,
        cells=out,
        size_constant=c1,
        level=max(levels),
    )


def words(model: IFSModel, length: int) -> Iterable[Word]:
    return itertools.product(range(model.branch_count), repeat=length)
