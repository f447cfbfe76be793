import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractalcz.potentials import (
    KernelError,
    MultiplierSpec,
    apply_kernel,
    apply_to_eigenfunctions,
    bessel_group_extension,
    bessel_imaginary_kernel,
    bessel_imaginary_multipliers,
    bessel_kernel,
    bessel_multipliers,
    compose,
    direct_resolvent_kernel,
    group_order,
    laplace_type_kernel,
    lsm_kernel,
    lsm_value,
    riesz_imaginary_kernel,
    riesz_multipliers,
)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def mean_free_identity(b):
    # kernel of I - P_0: sum over n >= 1 of phi_n(x) phi_n(y)
    P = b.vectors[:, 1:]
    return P @ P.T


def test_riesz_multipliers_unit_modulus():
    lam = np.array([0.0, 1.0, 7.5, 1e4])
    q = riesz_multipliers(lam, 1.3)
    assert q[0] == 0
    assert np.allclose(np.abs(q[1:]), 1.0)
    assert np.allclose(q, riesz_multipliers(lam, 1.3, "quadrature"), atol=1e-9)


def test_riesz_acts_on_eigenfunctions(gasket_l3):
    _, b = gasket_l3
    kf = riesz_imaginary_kernel(b, 0.7)
    seen = apply_to_eigenfunctions(kf, b)
    assert seen[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(seen[1:], np.exp(0.7j * np.log(b.eigenvalues[1:])), atol=1e-10)


def test_riesz_inverse_pair(gasket_l3):
    _, b = gasket_l3
    prod = compose(riesz_imaginary_kernel(b, 1.1), riesz_imaginary_kernel(b, -1.1))
    assert rel(prod, mean_free_identity(b)) < 1e-12
    assert rel(riesz_imaginary_kernel(b, 0.0).values, mean_free_identity(b)) < 1e-12


def test_riesz_symmetry_and_provenance(gasket_l3):
    _, b = gasket_l3
    kf = riesz_imaginary_kernel(b, 2.0)
    assert kf.hermitian_error() > 0  # complex symmetric, not Hermitian
    assert np.allclose(kf.values, kf.values.T)
    assert kf.basis_id == "gasket-L3-n42"
    assert kf.metadata()["schema"] == "fractalcz.kernel/1"


def test_bessel_group_law_and_resolvent(gasket_l3):
    el, b = gasket_l3
    K1 = bessel_kernel(b, -1.0).values
    half = bessel_kernel(b, -0.5)
    assert rel(compose(half, half), K1) < 1e-12
    assert rel(K1, direct_resolvent_kernel(el.stiffness, el.mass)) < 1e-12


def test_bessel_real_alpha_positivity_and_mass(gasket_l3):
    # (I - Delta)^alpha preserves constants and is positivity preserving
    _, b = gasket_l3
    K = bessel_kernel(b, -0.5).values
    assert np.abs(K.imag).max() < 1e-14
    assert K.real.min() > 0
    assert np.allclose(K.real @ b.mass, 1.0)


def test_bessel_validation(gasket_l3):
    _, b = gasket_l3
    with pytest.raises(KernelError):
        bessel_kernel(b, 0.5)
    with pytest.raises(KernelError):
        bessel_kernel(b, -0.5, route="difference")


def test_group_extension(gasket_l3):
    el, b = gasket_l3
    assert group_order(1.0) == 2 and group_order(-0.5) == 0 and group_order(0.3) == 1
    A1 = bessel_group_extension(b, 1.0, 2, el.stiffness)
    want = np.eye(el.n) + el.stiffness / el.mass[:, None]
    assert rel(A1.operator_matrix(), want) < 1e-10
    A0 = bessel_group_extension(b, 0.0, 1, el.stiffness)
    assert rel(A0.operator_matrix(), np.eye(el.n)) < 1e-10
    with pytest.raises(KernelError):
        bessel_group_extension(b, 1.0, 1, el.stiffness)


def test_bessel_imaginary_routes(gasket_l3):
    _, b = gasket_l3
    K = bessel_imaginary_kernel(b, 1.5).values
    assert rel(bessel_imaginary_kernel(b, 1.5, "quadrature").values, K) < 1e-9
    D = bessel_imaginary_kernel(b, 1.5, "difference").values
    # the difference route drops the identity, whose kernel is diag(1/m)
    assert rel(D + np.diag(1.0 / b.mass), K) < 1e-9


def test_bessel_imaginary_zero_is_identity(gasket_l3):
    _, b = gasket_l3
    kf = bessel_imaginary_kernel(b, 0.0)
    assert rel(kf.operator_matrix(), np.eye(b.size)) < 1e-12


def test_bessel_imaginary_multipliers_unit_modulus():
    lam = np.geomspace(1e-2, 1e5, 11)
    for route in ("spectral", "quadrature"):
        assert np.allclose(np.abs(bessel_imaginary_multipliers(lam, 2.0, route)), 1.0, atol=1e-9)


def test_laplace_type_examples(gasket_l3):
    _, b = gasket_l3
    const = laplace_type_kernel(b, MultiplierSpec.constant())
    assert rel(const.values, mean_free_identity(b)) < 1e-9
    ex = laplace_type_kernel(b, MultiplierSpec.exponential(2.0))
    assert rel(ex.values, laplace_type_kernel(b, MultiplierSpec.exponential(2.0), "spectral").values) < 1e-9
    lam = b.eigenvalues
    assert np.allclose(ex.multipliers, lam / (lam + 2.0), atol=1e-9)
    ip = laplace_type_kernel(b, MultiplierSpec.imaginary_power(1.0))
    assert rel(ip.values, riesz_imaginary_kernel(b, 1.0).values) < 1e-9


def test_laplace_generic_function_needs_quadrature(gasket_l3):
    _, b = gasket_l3
    m = MultiplierSpec(kind="bounded_function", func=lambda t: np.cos(t) + 0j, name="cos")
    with pytest.raises(KernelError):
        laplace_type_kernel(b, m, "spectral")
    q = laplace_type_kernel(b, m).multipliers
    lam = b.eigenvalues
    # lambda int cos(t) e^{-lambda t} dt = lambda^2 / (lambda^2 + 1)
    assert np.allclose(q[1:], lam[1:] ** 2 / (lam[1:] ** 2 + 1), rtol=1e-8)


def test_multiplier_validation():
    with pytest.raises(KernelError):
        MultiplierSpec(kind="power_complex", alpha=0.5)
    with pytest.raises(KernelError):
        MultiplierSpec(kind="bounded_function")
    with pytest.raises(KernelError):
        MultiplierSpec(kind="nope")


def test_lsm_routes_and_values(gasket_l3, gasket):
    _, b = gasket_l3
    d = gasket.resistance_dim
    for s in (d + 1.0, 1.0):
        A = lsm_kernel(b, s).values
        assert rel(lsm_kernel(b, s, route="quadrature").values, A) < 1e-9
        assert lsm_value(b, s, 3, 7) == pytest.approx(A[3, 7], rel=1e-12)
    # s = d + 1: int t^{1} e^{-t} h_t dt / t has constant mode Gamma(1) = 1
    A = lsm_kernel(b, d + 1.0)
    assert A.multipliers[0] == pytest.approx(1.0)


def test_lsm_nonpositive_s(gasket_l3):
    _, b = gasket_l3
    K = lsm_kernel(b, -0.5).values
    assert np.all(np.isnan(np.diag(K)))
    off = ~np.eye(b.size, dtype=bool)
    Q = lsm_kernel(b, -0.5, route="quadrature").values
    assert np.linalg.norm((K - Q)[off]) / np.linalg.norm(K[off]) < 1e-9
    with pytest.raises(KernelError):
        lsm_value(b, -0.5, 4, 4)
    with pytest.raises(KernelError):
        lsm_kernel(b, -5.0)


def test_apply_kernel(gasket_l3, rng):
    _, b = gasket_l3
    kf = bessel_kernel(b, -1.0)
    u = rng.standard_normal(b.size)
    assert np.allclose(apply_kernel(kf, u), kf.operator_matrix() @ u)
    with pytest.raises(KernelError):
        apply_kernel(kf, u[:-1])


def test_compose_rejects_mixed_bases(gasket_l3, gasket_l4):
    with pytest.raises(KernelError):
        compose(bessel_kernel(gasket_l3[1], -1.0), bessel_kernel(gasket_l4[1], -1.0))


def test_save_and_csv(gasket_l3, tmp_path):
    _, b = gasket_l3
    kf = riesz_imaginary_kernel(b, 1.0)
    npy, side = kf.save(tmp_path / "k_a1.0", level=3)
    assert npy.name == "k_a1.0.npy"
    assert np.array_equal(np.load(npy), kf.values)
    meta = json.loads(side.read_text())
    assert meta["family"] == "riesz_imaginary" and meta["level"] == 3
    kf.write_csv(tmp_path / "k.csv")
    assert len((tmp_path / "k.csv").read_text().splitlines()) == 1 + 42 * 42
    with pytest.raises(KernelError):
        kf.write_csv(tmp_path / "big.csv", max_size=10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, -0.01), st.floats(-3, 3))
def test_bessel_multipliers_contract(re, im):
    lam = np.geomspace(1e-3, 1e4, 9)
    q = bessel_multipliers(lam, complex(re, im))
    assert np.all(np.abs(q) <= 1.0 + 1e-12)
    assert np.allclose(np.abs(q), (1 + lam) ** re)
