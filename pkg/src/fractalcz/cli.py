"""Command-line front end.

Exit codes: 0 every requested check passed, 1 a bound failed, 2 bad
configuration or input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ENV_OUT, ENV_THREADS, ConfigError, RunConfig, load_config, parse_levels
from .energy import assemble
from .fractal_model import ModelError, build_graph, build_model
from .pipeline import NUMERICAL_ERRORS, VERIFY_IDS, make_kernel, run_products, run_verify
from .potentials import ROUTES
from .report import format_table, load_bundles, slug, write_bundle, write_columns
from .spectral import eigenbasis, match_spectra, oracle_spectrum

log = logging.getLogger("fractalcz")

EXIT_OK, EXIT_BOUND, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
ROUTE_AGREEMENT_TOL = 1e-6


def _alpha(text: str) -> complex | float:
    try:
        z = complex(text.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    return z.real if z.imag == 0 else z


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _levels(text: str) -> tuple[int, ...]:
    try:
        return parse_levels(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="sectioned key-value config file; flags override it")
    g.add_argument("--model", choices=("gasket", "interval"), help="fractal model (default gasket)")
    g.add_argument("--level", type=int, dest="top_level", help="finest level")
    g.add_argument("--levels", type=_levels, help="pooled levels, e.g. 3-6 or 3,4,5")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", dest="output_dir", help=f"output directory (env {ENV_OUT})")
    g.add_argument("--threads", type=int, help=f"worker threads, 0 = all cores (env {ENV_THREADS})")
    g.add_argument("--formats", type=_csv_list, help="comma list of json, csv, plot")
    g.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(
        prog="fractalcz",
        description="Spectral multipliers of fractal Laplacians and empirical checks of their kernel bounds.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("build", parents=[common], help="build and serialize the level graph")
    sp = sub.add_parser("spectrum", parents=[common], help="eigenbasis and eigenvalue CSV")
    sp.add_argument("--save-basis", action="store_true", help="also write the binary basis file")

    kp = sub.add_parser("kernel", parents=[common], help="build and export one kernel")
    kp.add_argument("--family", required=True, choices=("riesz", "bessel", "bessel_imaginary"))
    kp.add_argument("--alpha", required=True, type=_alpha)
    kp.add_argument("--route", default="spectral", choices=(*ROUTES, "both"), help="'both' compares spectral and quadrature")

    vp = sub.add_parser("verify", parents=[common], help="run estimate checks")
    vp.add_argument("--all", action="store_true", help="run the full suite of the model")
    vp.add_argument("--estimate", action="append", type=_csv_list, help=f"one or more of: {', '.join(VERIFY_IDS)}")
    vp.add_argument("--c", type=float, dest="holder_c", help="Hoelder separation constant")
    vp.add_argument("--rel-tol", type=float, dest="rel_tol")
    vp.add_argument("--drift-cap", type=float, dest="drift_cap")

    pp = sub.add_parser("product", parents=[common], help="two-fold product suite")
    pp.add_argument("--family", dest="product_family", choices=("riesz", "bessel_imaginary"))
    pp.add_argument("--alpha", dest="product_alpha", type=float)
    pp.add_argument("--gamma", dest="product_gamma", type=float, help="chemical exponent (default: fitted)")
    pp.add_argument("--samples", dest="product_samples", type=int)
    pp.add_argument("--c", type=float, dest="holder_c")

    rp = sub.add_parser("report", help="summarize report bundles in a directory")
    rp.add_argument("--dir", default=None, help=f"directory with report JSON (default ${ENV_OUT} or fractalcz_out)")
    rp.add_argument("-v", "--verbose", action="count", default=0)
    return p


_CONFIG_FLAGS = (
    "model",
    "top_level",
    "levels",
    "seed",
    "output_dir",
    "threads",
    "formats",
    "holder_c",
    "rel_tol",
    "drift_cap",
    "product_family",
    "product_alpha",
    "product_gamma",
    "product_samples",
)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    flags = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
    if getattr(args, "estimate", None):
        flags["estimates"] = tuple(x for group in args.estimate for x in group)
    return load_config(args.config, flags)


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_build(cfg: RunConfig, args) -> int:
    model = build_model(cfg.model)
    g = build_graph(model, cfg.top_level, vertex_cap=cfg.vertex_cap)
    path = _out(cfg) / f"graph_{cfg.model}_L{cfg.top_level}.json"
    g.save_json(path)
    print(f"{cfg.model} level {cfg.top_level}: {g.n_vertices} vertices, {len(g.edges)} edges -> {path}")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, args) -> int:
    model = build_model(cfg.model)
    el = assemble(build_graph(model, cfg.top_level, vertex_cap=cfg.vertex_cap))
    b = eigenbasis(el)
    out = _out(cfg)
    stem = f"eigenvalues_{cfg.model}_L{cfg.top_level}"
    b.write_eigenvalues_csv(out / f"{stem}.csv")
    if "plot" in cfg.formats:
        write_columns(out / "plots" / f"{stem}.dat", enumerate(b.eigenvalues.tolist()), header="index eigenvalue")
    if args.save_basis:
        b.save(out / f"basis_{cfg.model}_L{cfg.top_level}.fczb")
    gap = match_spectra(b.eigenvalues, oracle_spectrum(model, cfg.top_level))
    print(f"{b.size} eigenvalues -> {out / (stem + '.csv')}")
    print(f"oracle gap {gap:.3e}, orthonormality error {b.orthonormality_error():.3e}")
    return EXIT_OK


def cmd_kernel(cfg: RunConfig, args) -> int:
    model = build_model(cfg.model)
    el = assemble(build_graph(model, cfg.top_level, vertex_cap=cfg.vertex_cap))
    b = eigenbasis(el)
    if args.route == "difference" and args.family != "bessel_imaginary":
        raise ConfigError("the difference route exists only for bessel_imaginary")
    routes = ("spectral", "quadrature") if args.route == "both" else (args.route,)
    out = _out(cfg)
    tag = f"{args.family}_a{slug(str(args.alpha))}_L{cfg.top_level}"
    fields = {}
    for route in routes:
        kf = make_kernel(args.family, args.alpha, b, route)
        fields[route] = kf
        kf.save(out / f"kernel_{tag}_{route}")
        if "csv" in cfg.formats and kf.n <= 400:
            kf.write_csv(out / f"kernel_{tag}_{route}.csv")
        print(f"{route}: {kf.n}x{kf.n} kernel -> {out / f'kernel_{tag}_{route}.npy'}")
    if len(routes) == 1:
        return EXIT_OK
    A, B = fields["quadrature"].values, fields["spectral"].values
    rel = float(np.linalg.norm(A - B) / np.linalg.norm(B))
    passed = rel <= ROUTE_AGREEMENT_TOL
    agreement = {
        "schema": "fractalcz.route_agreement/1",
        "family": args.family,
        "alpha": str(args.alpha),
        "level": cfg.top_level,
        "model": cfg.model,
        "relative_frobenius": float(f"{rel:.12g}"),
        "tolerance": ROUTE_AGREEMENT_TOL,
        "passed": passed,
    }
    (out / f"kernel_{tag}_agreement.json").write_text(json.dumps(agreement, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"route agreement: relative Frobenius difference {rel:.3e} ({'pass' if passed else 'FAIL'})")
    return EXIT_OK if passed else EXIT_BOUND


def _emit(result, cfg: RunConfig, stem: str) -> int:
    paths = write_bundle(result.bundle, _out(cfg), stem, cfg.formats)
    print(format_table(result.bundle["entries"]))
    c = result.bundle["counts"]
    print(f"\n{c['passed']}/{c['total']} passed, {c['errors']} errors; wrote {len(paths)} files to {cfg.output_dir}")
    return result.exit_code


def cmd_verify(cfg: RunConfig, args) -> int:
    result = run_verify(cfg, run_all=args.all)
    return _emit(result, cfg, f"verify_{cfg.model}")


def cmd_product(cfg: RunConfig, args) -> int:
    result = run_products(cfg)
    return _emit(result, cfg, f"product_{cfg.model}")


def cmd_report(args) -> int:
    directory = Path(args.dir or os.environ.get(ENV_OUT) or "fractalcz_out")
    if not directory.is_dir():
        print(f"error: no such directory {directory}", file=sys.stderr)
        return EXIT_CONFIG
    bundles = load_bundles(directory)
    if not bundles:
        print(f"error: no report files in {directory}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    for path, b in bundles:
        print(f"== {path.name} ({b['command']}, model {b['config'].get('model')})")
        print(format_table(b["entries"]))
        print()
        if b["counts"]["errors"]:
            code = max(code, EXIT_NUMERIC)
        elif not b["passed"]:
            code = max(code, EXIT_BOUND)
    return code


COMMANDS = {"build": cmd_build, "spectrum": cmd_spectrum, "kernel": cmd_kernel, "verify": cmd_verify, "product": cmd_product}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return cmd_report(args)
    try:
        cfg = config_from_args(args)
        if args.command == "verify" and not args.all and not cfg.estimates:
            raise ConfigError("verify needs --all or --estimate")
        with threadpool_limits(limits=1):
            return COMMANDS[args.command](cfg, args)
    except (ConfigError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
