
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractalcz.energy import (
    DegenerateInput,
    assemble,
    cell_dirichlet,
    effective_resistance,
    green_dirichlet,
    green_identity_residual,
    green_series,
    green_series_partial,
    harmonic_extension,
    resistance_matrix,
    write_matrix_csv,
)
from fractalcz.fractal_model import build_graph, build_model


def test_stiffness_is_symmetric_with_zero_row_sums(gasket):
    el = assemble(build_graph(gasket, 3))
    L = el.stiffness
    assert np.allclose(L, L.T)
    assert np.allclose(L.sum(axis=1), 0.0)
    assert np.linalg.eigvalsh(L)[0] > -1e-12


def test_energy_of_constants_vanishes(gasket):
    el = assemble(build_graph(gasket, 2))
    assert el.energy(np.ones(el.n)) == pytest.approx(0.0, abs=1e-12)


def test_laplacian_matches_matrix(gasket, rng):
    el = assemble(build_graph(gasket, 3))
    u = rng.standard_normal(el.n)
    assert np.allclose(el.laplacian(u), el.laplacian_matrix() @ u)


def test_harmonic_extension_one_fifth_two_fifths(gasket):
    # oracle: gasket harmonic averaging rule, values 1/5 and 2/5 at level one
    u = harmonic_extension(gasket, [1.0, 0.0, 0.0], 1)
    g = build_graph(gasket, 1)
    opposite = g.vertex_of((1,), 2)  # midpoint of the side q1 q2
    adjacent = [g.vertex_of((0,), 1), g.vertex_of((0,), 2)]
    assert u[opposite] == pytest.approx(0.2, abs=1e-14)
    assert u[adjacent] == pytest.approx([0.4, 0.4], abs=1e-14)


def test_harmonic_extension_energy_renormalization(gasket, rng):
    # harmonic energy is the same at every level
    b = rng.standard_normal(3)
    energies = []
    for m in range(4):
        el = assemble(build_graph(gasket, m))
        energies.append(el.energy(harmonic_extension(gasket, b, m, el)))
    assert np.allclose(energies, energies[0], rtol=1e-12)


def test_interval_resistance_is_distance(interval):
    el = assemble(build_graph(interval, 5))
    R = resistance_matrix(el)
    x = el.graph.coordinates()[:, 0]
    assert np.allclose(R, np.abs(x[:, None] - x[None, :]), atol=1e-12)


def test_gasket_boundary_resistance(gasket):
    # oracle: series-parallel, three unit-conductance edges in a triangle give 2/3
    for m in range(4):
        el = assemble(build_graph(gasket, m))
        assert effective_resistance(el, 0, 1) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_resistance_single_solve_matches_matrix(gasket):
    el = assemble(build_graph(gasket, 3))
    R = resistance_matrix(el)
    assert effective_resistance(el, 5, 30) == pytest.approx(R[5, 30], rel=1e-12)


def test_resistance_same_point_warns(gasket):
    el = assemble(build_graph(gasket, 1))
    with pytest.warns(DegenerateInput):
        assert effective_resistance(el, 2, 2) == 0.0


def test_resistance_is_a_metric(gasket):
    el = assemble(build_graph(gasket, 3))
    R = resistance_matrix(el)
    assert np.all(R[~np.eye(el.n, dtype=bool)] > 0)
    # triangle inequality over all triples
    viol = R[:, None, :] - R[:, :, None] - R[None, :, :].transpose(0, 2, 1)
    assert viol.max() < 1e-12


def test_interval_green_quarter_three_quarters(interval):
    # oracle: G(x,y) = x(1-y) for x <= y on the unit interval, G(1/4, 3/4) = 1/16
    el = assemble(build_graph(interval, 2))
    x = el.graph.coordinates()[:, 0]
    at = {float(v): i for i, v in enumerate(x)}
    assert green_dirichlet(el, (), at[0.25], at[0.75]) == pytest.approx(1.0 / 16.0, abs=1e-15)
    assert green_dirichlet(el, (), at[0.5], at[0.5]) == pytest.approx(0.25, abs=1e-15)


def test_green_on_boundary_warns(gasket):
    el = assemble(build_graph(gasket, 2))
    with pytest.warns(DegenerateInput):
        assert green_dirichlet(el, (), 0, 5) == 0.0


def test_green_identity_on_cells(gasket, rng):
    el = assemble(build_graph(gasket, 3))
    for w in [(), (0,), (1, 2)]:
        cd = cell_dirichlet(el, w)
        for _ in range(5):
            assert green_identity_residual(el, w, rng.standard_normal(el.n), cd) < 1e-12


def test_cell_green_scales_with_cell(gasket):
    # G^{F_w K}(F_w x, F_w y) = r_w G^K(x, y)
    el = assemble(build_graph(gasket, 3))
    big = cell_dirichlet(el, ())
    small = cell_dirichlet(el, (2,))
    el2 = assemble(build_graph(gasket, 2))
    ref = cell_dirichlet(el2, ())
    lm = el.graph.cell_local_map((2,))
    inv = {el2.graph.index_of(k): gidx for gidx, k in lm.items()}
    a, b = ref.interior[0], ref.interior[-1]
    sp = {int(v): i for i, v in enumerate(small.interior)}
    rp = {int(v): i for i, v in enumerate(ref.interior)}
    val = small.green[sp[inv[int(a)]], sp[inv[int(b)]]]
    assert val == pytest.approx(0.6 * ref.green[rp[int(a)], rp[int(b)]], rel=1e-12)
    assert big.green.shape[0] == el.n - 3


def test_green_series_constant_and_termination(gasket):
    # oracle: inverse of the level-one Dirichlet stiffness, sum of g = 0.9
    el = assemble(build_graph(gasket, 3))
    gs = green_series(el)
    assert gs.constant == pytest.approx(0.9, abs=1e-14)
    G = cell_dirichlet(el, ()).green
    inner = np.arange(3, el.n)
    S = gs.level_terms[-1][np.ix_(inner, inner)]
    assert np.max(np.abs(S - G)) < 1e-12
    # saturation beyond m - 1
    assert green_series_partial(gs, 10, 5, 7) == green_series_partial(gs, 2, 5, 7)
    # partial sums increase on the diagonal
    diag = [green_series_partial(gs, k, 5, 5) for k in range(3)]
    assert diag[0] <= diag[1] <= diag[2]


def test_interval_green_series_constant(interval):
    el = assemble(build_graph(interval, 4))
    assert green_series(el).constant == pytest.approx(0.25, abs=1e-15)


def test_write_matrix_csv(tmp_path):
    p = tmp_path / "m.csv"
    write_matrix_csv(p, np.array([[1.0, 2.5], [0.1, 3.0]]))
    text = p.read_text()
    assert "2.5" in text and "0.10000000000000001" in text


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_harmonic_extension_max_principle(values):
    model = build_model("gasket")
    u = harmonic_extension(model, values, 2)
    assert u.max() <= max(values) + 1e-12
    assert u.min() >= min(values) - 1e-12
