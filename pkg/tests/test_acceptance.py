"""Acceptance suite: one test and one summary line per criterion.

Each test records its line before asserting, so failures are reported too.
"""

import json
import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from fractalcz.cli import main
from fractalcz.fractal_model import build_model

D = build_model("gasket").resistance_dim
BETA = math.log(3) / math.log(5)
OPERATORS = [("riesz", "0.5"), ("riesz", "1"), ("riesz", "2"), ("bessel_imaginary", "1"), ("bessel_imaginary", "2")]

pytestmark = pytest.mark.slow


def _run(args):
    t0 = time.perf_counter()
    code = main(args)
    return code, time.perf_counter() - t0


def _load(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def interval_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("interval")
    code, secs = _run(["verify", "--model", "interval", "--all", "--out", str(out)])
    return code, secs, out / "verify_interval.json"


@pytest.fixture(scope="module")
def gasket_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("gasket")
    code, secs = _run(["verify", "--all", "--out", str(out)])
    return code, secs, out / "verify_gasket.json"


@pytest.fixture(scope="module")
def gasket_bundle(gasket_run):
    return _load(gasket_run[2])


@pytest.fixture(scope="module")
def product_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("product")
    code, _ = _run(["product", "--out", str(out)])
    assert code in (0, 1)
    return _load(out / "product_gasket.json")


def _ident(e):
    return e.get("check_id") or e.get("estimate_id")


def _select(bundle, *ids):
    return [e for e in bundle["entries"] if _ident(e) in ids or e["kind"] == "error" and e["label"].split()[0] in ids]


def _by_label(bundle, prefix):
    return [e for e in bundle["entries"] if e["label"].startswith(prefix)]


def _record(k, ok, text):
    ACCEPTANCE_LINES[k] = f"CRITERION {k:>2} {'PASS' if ok else 'FAIL'}: {text}"
    return ok


def _worst(entries):
    return max((e["value"] for e in entries), default=math.nan)


def test_criterion_01_interval_calibration(interval_run):
    code, secs, path = interval_run
    b = _load(path)
    e = {x["label"]: x for x in b["entries"]}
    heat = e["heat_envelope L10"]
    holder = e["holder riesz alpha=1"]
    lam1 = e["lambda_1 vs pi^2 L10"]
    oracle = e["spectrum oracle L10"]
    ok = code == 0 and b["passed"] and secs < 60
    ok &= oracle["threshold"] == 1e-10 and lam1["threshold"] == 1e-3
    ok &= heat["target_exponent"] == 0.5 and heat["exponent_tolerance"] == 0.03
    ok &= abs(heat["details"]["gamma"] - 1.0) <= 0.1 and holder["target_exponent"] == 0.45
    _record(
        1,
        ok,
        f"spectrum gap {oracle['value']:.2e}, lambda_1 rel {lam1['value']:.2e}, beta {heat['fitted_exponent']:.4f}, "
        f"gamma {heat['details']['gamma']:.3f}, Hoelder {holder['fitted_exponent']:.3f}, {secs:.1f} s",
    )
    assert ok


def test_criterion_02_gasket_spectrum(gasket_bundle):
    ent = _select(gasket_bundle, "spectrum")
    oracle = [e for e in ent if e["label"].startswith("spectrum oracle")]
    orth = [e for e in ent if e["label"].startswith("orthonormality")]
    levels = sorted(e["details"]["level"] for e in oracle)
    ok = levels == [3, 4, 5] and len(orth) == 3 and all(e["passed"] for e in ent)
    ok &= all(e["threshold"] == 1e-8 for e in oracle) and all(e["threshold"] == 1e-10 for e in orth)
    _record(2, ok, f"levels 3-5 oracle gap {_worst(oracle):.2e}, orthonormality {_worst(orth):.2e}")
    assert ok


def test_criterion_03_resistance(gasket_bundle):
    ent = _select(gasket_bundle, "resistance")
    refine = [e for e in ent if " vs " in e["label"]]
    pair = [e for e in ent if e["label"] == "resistance boundary pair"]
    ok = len(refine) == 4 and len(pair) == 1 and all(e["passed"] for e in ent)
    ok &= all(e["threshold"] == 1e-10 for e in refine) and pair[0]["threshold"] == 1e-12
    _record(3, ok, f"refinement max {_worst(refine):.2e} (m <= 4), boundary pair error {pair[0]['value']:.2e}")
    assert ok


def test_criterion_04_green(gasket_bundle):
    ent = _select(gasket_bundle, "green")
    ident = [e for e in ent if "identity" in e["label"]]
    series = [e for e in ent if "series" in e["label"]]
    ok = len(ident) == 4 and len(series) == 4 and all(e["passed"] for e in ent)
    ok &= all(e["threshold"] == 1e-12 and e["details"]["functions_per_cell"] == 100 for e in ident)
    ok &= all(e["threshold"] == 1e-8 for e in series)
    _record(4, ok, f"identity residual {_worst(ident):.2e}, series vs solve {_worst(series):.2e}")
    assert ok


def test_criterion_05_quadrature(gasket_bundle):
    ent = _select(gasket_bundle, "quadrature")
    scalar = [e for e in ent if e["label"].startswith("scalar")]
    routes = [e for e in ent if e["label"].startswith("route")]
    fams = {e["label"].split()[2] for e in routes}
    ok = len(scalar) == 4 and fams == {"riesz", "bessel", "bessel_imaginary"} and all(e["passed"] for e in ent)
    ok &= all(e["threshold"] == 1e-9 for e in scalar) and all(e["threshold"] == 1e-6 for e in routes)
    _record(5, ok, f"scalar powers {_worst(scalar):.2e}, route agreement L4 {_worst(routes):.2e} over {len(routes)} kernels")
    assert ok


def test_criterion_06_heat(gasket_bundle):
    [heat] = _select(gasket_bundle, "heat_envelope")
    [band] = _select(gasket_bundle, "int_exp")
    ok = heat["passed"] and band["passed"]
    ok &= abs(heat["target_exponent"] - BETA) < 1e-12 and heat["exponent_tolerance"] == 0.05
    ok &= heat["drift_cap"] == 3 and band["details"]["band"] <= 4 and band["details"]["decades"] >= 3
    _record(
        6,
        ok,
        f"beta {heat['fitted_exponent']:.4f} vs {BETA:.4f}, upper/lower drift "
        f"{heat['details']['upper_drift']:.2f}/{heat['details']['lower_drift']:.2f}, "
        f"band ratio {band['details']['band']:.2f} over {band['details']['decades']:.2f} decades",
    )
    assert ok


def test_criterion_07_cz_estimates(gasket_run, gasket_bundle):
    secs = gasket_run[1]
    parts, ok = [], True
    for fam, a in OPERATORS:
        tag = f"{fam} alpha={a}"
        [size] = _by_label(gasket_bundle, f"size {tag}")
        [lap] = _by_label(gasket_bundle, f"laplacian_smooth {tag}")
        [hol] = _by_label(gasket_bundle, f"holder {tag}")
        for e, target in ((size, D), (lap, 2 * D + 1)):
            ok &= e["passed"] and abs(e["target_exponent"] - target) < 1e-9
            ok &= abs(e["exponent_tolerance"] - 0.15 * target) < 1e-9 and e["drift_cap"] == 3
            ok &= sorted({lv for lv, _ in e["per_level_constants"]}) == [3, 4, 5, 6]
        ok &= hol["passed"] and hol["mode"] == "at_least" and hol["target_exponent"] == 0.45
        ok &= abs(hol["details"]["c"] - 21.4356) < 1e-3
        parts.append(f"{fam[0]}{a}: {size['fitted_exponent']:.2f}/{lap['fitted_exponent']:.2f}/{hol['fitted_exponent']:.2f}")
    ok &= secs < 900
    _record(7, ok, f"size/laplacian/Hoelder exponents {'; '.join(parts)} (targets {D:.3f}/{2 * D + 1:.3f}/0.45), full run {secs:.0f} s")
    assert ok


def test_criterion_08_bessel(gasket_bundle):
    alg = _select(gasket_bundle, "bessel_algebra")
    rows = _select(gasket_bundle, "l1_rows")
    hs = _select(gasket_bundle, "hilbert_schmidt")
    thr = -D / (2 * (D + 1))
    ok = all(e["passed"] for e in alg + rows + hs) and len(hs) == 4 and len(rows) >= 1
    ok &= all(e["threshold"] == 1e-8 for e in alg) and all(e["drift_cap"] == 2 for e in rows)
    sides = [e["details"]["expected"] for e in hs]
    ok &= sides == ["stable", "stable", "growing", "growing"]
    _record(
        8,
        ok,
        f"group law/resolvent {_worst(alg):.2e}, L1 row drift {max(e['drift'] for e in rows):.3f}, "
        f"HS sides {'/'.join(sides)} around {thr:.4f}",
    )
    assert ok


def test_criterion_09_lp(gasket_bundle):
    ent = _select(gasket_bundle, "lp_norms")
    exact = [e for e in ent if e["kind"] == "check"]
    emp = [e for e in ent if e["kind"] == "bound"]
    ps = {e["label"].split()[1] for e in emp}
    ok = all(e["passed"] for e in ent) and len(exact) == 3 and ps == {"p=1.5", "p=3"}
    ok &= all(e["threshold"] == 1e-10 for e in exact) and all(e["drift_cap"] == 2 for e in emp)
    _record(9, ok, f"p=2 error {_worst(exact):.2e}, p in (1.5, 3) max drift {max(e['drift'] for e in emp):.3f}")
    assert ok


def test_criterion_10_products(product_bundle):
    b = product_bundle
    heat = [e for e in b["entries"] if e["label"].startswith("product heat")]
    [size] = _select(b, "product_size")
    [smooth] = _select(b, "product_smooth")
    [hol] = _select(b, "product_holder")
    ok = b["passed"] and heat and all(e["threshold"] == 1e-10 for e in heat)
    ok &= abs(size["target_exponent"] - 2 * D) < 1e-9 and abs(smooth["target_exponent"] - (3 * D + 1)) < 1e-9
    ok &= all(abs(e["exponent_tolerance"] - 0.15 * e["target_exponent"]) < 1e-9 for e in (size, smooth))
    ok &= hol["target_exponent"] == 0.45
    _record(
        10,
        ok,
        f"heat {_worst(heat):.2e}, size {size['fitted_exponent']:.2f} vs {2 * D:.2f}, "
        f"smooth {smooth['fitted_exponent']:.2f} vs {3 * D + 1:.2f}, Hoelder {hol['fitted_exponent']:.2f}",
    )
    assert ok


def test_criterion_11_reproducibility(interval_run, gasket_run, tmp_path):
    def run(model, *extra):
        out = tmp_path / f"{model}{'_'.join(extra)}"
        main(["verify", "--model", model, "--all", "--out", str(out), *extra])
        return (out / f"verify_{model}.json").read_bytes()

    base_i, base_g = interval_run[2].read_bytes(), gasket_run[2].read_bytes()
    same = {
        "interval repeat": run("interval") == base_i,
        "interval threads 1": run("interval", "--threads", "1") == base_i,
        "interval threads 3": run("interval", "--threads", "3") == base_i,
        "gasket threads 1": run("gasket", "--threads", "1") == base_g,
        "gasket threads 3": run("gasket", "--threads", "3") == base_g,
    }
    ok = all(same.values())
    _record(11, ok, f"byte-identical JSON: {', '.join(k for k, v in same.items() if v) or 'none'}")
    assert ok
