import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractalcz.fractal_model import (
    IFSModel,
    ModelError,
    build_graph,
    build_model,
    cell_partition,
    expected_counts,
    vertex_key,
    words,
)


def test_gasket_constants(gasket):
    assert gasket.resistance_dim == pytest.approx(math.log(3) / math.log(5 / 3), abs=1e-14)
    assert gasket.beta == pytest.approx(math.log(3) / math.log(5), abs=1e-14)
    assert gasket.r == pytest.approx(0.6)
    # r^{d+1} = mu r = 1/5
    assert gasket.r ** gasket.walk_exponent == pytest.approx(0.2, abs=1e-14)


def test_interval_constants(interval):
    assert interval.resistance_dim == pytest.approx(1.0)
    assert interval.beta == pytest.approx(0.5)


@pytest.mark.parametrize("level,count", [(0, 3), (1, 6), (3, 42), (4, 123), (5, 366), (6, 1095)])
def test_gasket_vertex_counts(gasket, level, count):
    g = build_graph(gasket, level)
    assert g.n_vertices == count == (3 ** (level + 1) + 3) // 2
    assert (g.n_vertices, len(g.edges)) == expected_counts(gasket, level)
    assert len(g.edges) == 3 ** (level + 1)


@pytest.mark.parametrize("level", [0, 1, 4, 9])
def test_interval_counts(interval, level):
    g = build_graph(interval, level)
    assert g.n_vertices == 2**level + 1
    assert len(g.edges) == 2**level


def test_measure_sums_to_one(gasket):
    for level in range(5):
        assert build_graph(gasket, level).vertex_measure.sum() == pytest.approx(1.0, abs=1e-14)


def test_gasket_vertex_measure_values(gasket):
    # boundary vertices sit in one cell, junction points in two
    g = build_graph(gasket, 2)
    mu = 1.0 / 3**2
    assert np.allclose(g.vertex_measure[:3], mu / 3)
    assert np.allclose(np.sort(g.vertex_measure[3:]), 2 * mu / 3)


def test_contact_points_merge(gasket):
    # F_0(q_1) and F_1(q_0) are the same point
    assert vertex_key(gasket, (0,), 1) == vertex_key(gasket, (1,), 0)
    # trailing fixed-point letters are stripped
    assert vertex_key(gasket, (2, 2, 2), 2) == vertex_key(gasket, (), 2)
    assert vertex_key(gasket, (0,), 1) != vertex_key(gasket, (0,), 2)


def test_coordinates_are_distinct_and_match_cells(gasket):
    g = build_graph(gasket, 4)
    xy = g.coordinates()
    assert len({(round(a, 12), round(b, 12)) for a, b in xy}) == g.n_vertices
    # edge lengths are all 2^-level
    lengths = np.linalg.norm(xy[g.edges[:, 0]] - xy[g.edges[:, 1]], axis=1)
    assert np.allclose(lengths, 2.0**-4)


def test_nested_vertex_numbering(gasket):
    # V_m keys appear in V_{m+1}
    g3, g4 = build_graph(gasket, 3), build_graph(gasket, 4)
    for k in g3.keys:
        g4.index_of(k)


def test_cell_helpers(gasket):
    g = build_graph(gasket, 3)
    assert len(g.cell_vertices(())) == g.n_vertices
    assert len(g.cell_vertices((0,))) == build_graph(gasket, 2).n_vertices
    assert list(g.cell_boundary(())) == [0, 1, 2]
    with pytest.raises(ModelError):
        g.cell_vertices((0, 0, 0, 0))


def test_json_roundtrip(gasket, tmp_path):
    g = build_graph(gasket, 2)
    p = tmp_path / "g.json"
    g.save_json(p)
    data = json.loads(p.read_text())
    assert data["n_vertices"] == 15
    assert len(data["edges"]) == 27
    assert data["schema"] == "fractalcz.graph/1"


def test_cell_partition_sizes(gasket):
    g = build_graph(gasket, 5)
    part = cell_partition(g, 0.6**3)
    assert len(part.cells) == 27
    assert all(len(w) == 3 for w in part.cells)
    with pytest.raises(ModelError):
        cell_partition(g, 0.6**7)


def test_unknown_model_and_cap(gasket):
    with pytest.raises(ModelError):
        build_model("carpet")
    with pytest.raises(ModelError):
        build_graph(gasket, 9)


def test_model_validation():
    with pytest.raises(ModelError):
        IFSModel("bad", 2, (Fraction(1, 2),) * 2, (Fraction(1, 3),) * 2, 2, 1.0)


def test_words():
    assert len(list(words(build_model("gasket"), 2))) == 9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=0, max_size=5), st.integers(0, 2))
def test_vertex_key_is_canonical(word, k):
    # appending the fixed-point letter never changes the point
    model = build_model("gasket")
    assert vertex_key(model, tuple(word), k) == vertex_key(model, tuple(word) + (k,), k)
