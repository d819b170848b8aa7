"""Command-line entry point.

Subcommands: test, constants, power, clt, dissim, tails. Each run writes a
manifest (JSON, sorted keys) echoing the fully resolved configuration into
--output-dir, so outputs are reproducible from the manifest alone. Flags may
also be given in a config file of `key = value` lines (--config), with
command-line flags taking precedence. Output schemas are documented in
SCHEMAS.md. Exit codes: 0 success, 2 invalid configuration, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constants import (
    estimate_constants,
    find_constants,
    load_constants_csv,
    moment_check_cd,
    save_constants_csv,
    stabilization_tail,
)
from .errors import (
    GeomtestError,
    IncompleteConstantsError,
    InsufficientPilotError,
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    ResourceLimitError,
    GridTooCoarseError,
)
from .experiments import (
    clt_diagnostic,
    local_power_crosscheck,
    power_curve,
    write_clt_csv,
    write_local_power_csv,
    write_power_csv,
    write_power_svg,
)
from .functional import GraphKind
from .sampling import SeededRng, gaussian, load_labeled_csv, truncated_normal, uniform_box
from .stats import TestReport, asymptotic_test, hp_dissimilarity, permutation_test


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _parse_grid(spec: str) -> np.ndarray:
    """start:stop:count (inclusive linspace) or a comma list of values."""
    try:
        if ":" in spec:
            start, stop, count = spec.split(":")
            return np.linspace(float(start), float(stop), int(count))
        return np.array([float(x) for x in spec.split(",")])
    except ValueError as exc:
        raise InvalidParameterError(f"bad grid spec {spec!r}: {exc}") from exc


def _parse_density(spec: str, d: int):
    """TYPE:key=value,... with types uniform (side), gaussian (mu),
    truncnorm (mu, radius). Scalar mu is replicated across coordinates."""
    name, _, rest = spec.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise InvalidParameterError(f"bad density argument {item!r} in {spec!r}")
            kv[key.strip()] = float(val)
    if name == "uniform":
        return uniform_box(d, kv.get("side", 1.0))
    if name == "gaussian":
        return gaussian(np.full(d, kv.get("mu", 0.0)))
    if name == "truncnorm":
        return truncated_normal(np.full(d, kv.get("mu", 0.0)), kv.get("radius", 6.0))
    raise InvalidParameterError(f"unknown density type {name!r}")


def _parse_kinds(spec: str) -> list[GraphKind]:
    out = []
    for item in spec.split(","):
        name, _, k = item.strip().partition(":")
        if name == "knn":
            out.append(GraphKind.knn(int(k or 1)))
        elif name == "mst":
            out.append(GraphKind.mst())
        else:
            raise InvalidParameterError(f"unknown graph kind {item!r}")
    return out


def _load_config(path: str) -> dict:
    """Config grammar: one `key = value` per line, # comments, keys use the
    flag names without the leading dashes."""
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        known = set(vars(args))
        for key, val in cfg.items():
            if key not in known or key.startswith("_"):
                raise InvalidParameterError(f"unknown config key {key!r}")
            if getattr(args, f"_cli_{key}", False):
                continue  # explicit flag wins
            setattr(args, key, val)
    return args


class _TrackingStore(argparse.Action):
    """Store the value and remember that it came from the command line."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, f"_cli_{self.dest}", True)


def _add(parser, flag, required=False, **kw):
    # requiredness is validated after the config-file merge, so a config can
    # satisfy it; argparse itself never sees required=True
    kw.setdefault("action", _TrackingStore)
    if required:
        kw.setdefault("default", None)
        parser.get_default("_required").append(flag.lstrip("-").replace("-", "_"))
    parser.add_argument(flag, **kw)


def _write_manifest(outdir: str, command: str, resolved: dict) -> None:
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    body = {"command": command, "package_version": __version__}
    for key, val in resolved.items():
        if key.startswith("_") or key in ("config", "func"):
            continue
        if isinstance(val, np.ndarray):
            val = val.tolist()
        body[key] = val
    with open(path / "manifest.json", "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _require_constants(path: str | None, kind: GraphKind, d: int):
    if not path:
        raise IncompleteConstantsError("cache file", kind.label)
    try:
        rows = load_constants_csv(path)
    except OSError as exc:
        raise InvalidInputError(
            f"cannot read constants cache {path}: {exc}; "
            "run `geomtest constants` first") from exc
    c = find_constants(rows, kind, d)
    if c is None:
        raise InvalidParameterError(
            f"constants cache {path} has no row for {kind.label} at d={d}; "
            "run `geomtest constants` first")
    return c


def _cmd_test(args) -> int:
    sample = load_labeled_csv(args.data)
    kind = GraphKind.knn(int(args.k)) if args.functional == "knn" else GraphKind.mst()
    alpha = float(args.alpha)
    if args.method == "asymptotic":
        c = _require_constants(args.constants, kind, sample.cloud.dim)
        p = float(args.p) if args.p is not None else None
        report = asymptotic_test(sample, kind, c, alpha, p=p)
    else:
        report = permutation_test(sample, kind, alpha, int(args.permutations),
                                  SeededRng(int(args.seed)))
    print(TestReport.CSV_HEADER)
    print(report.csv_row())
    _write_manifest(args.output_dir, "test", vars(args))
    return 0


def _cmd_constants(args) -> int:
    d = int(args.d)
    rng = SeededRng(int(args.seed))
    side = float(args.side) if args.side is not None else None
    items = []
    for i, kind in enumerate(_parse_kinds(args.kinds)):
        items.append(estimate_constants(
            kind, d, intensity=1.0, side=side,
            n_replicates=int(args.replicates), rng=SeededRng(int(args.seed), stream_id=i)))
    save_constants_csv(args.out, items)
    cd, c2d = moment_check_cd(d, max(10_000, int(args.mc_n)), rng.substream(999))
    print(f"moment check d={d}: C_d={cd.value:.6g} (se {cd.se:.2g}), "
          f"C_2d={c2d.value:.6g} (se {c2d.se:.2g})")
    _write_manifest(args.output_dir, "constants", vars(args))
    return 0


def _cmd_power(args) -> int:
    h_grid = _parse_grid(args.h_grid)
    constants = None
    if args.constants:
        rows = load_constants_csv(args.constants)
        constants = {}
        for t in str(args.tests).split(","):
            if t.startswith("knn_"):
                k = int(t.split("_")[1])
                c = find_constants(rows, GraphKind.knn(k), int(args.d))
                if c is None:
                    raise InvalidParameterError(
                        f"constants cache has no knn:{k} row at d={args.d}; "
                        "run `geomtest constants` first")
                constants[k] = c
    curve = power_curve(
        a=float(args.a), h_grid=h_grid, d=int(args.d),
        n1_mean=float(args.n1), n2_mean=float(args.n2),
        n_iterations=int(args.iters), tests=tuple(str(args.tests).split(",")),
        alpha=float(args.alpha), seed=int(args.seed), draw_mode=args.draw_mode,
        radius=float(args.radius), b_permutations=int(args.permutations),
        constants=constants,
        n_jobs=int(args.threads) if int(args.threads) > 0 else (os.cpu_count() or 1))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_power_csv(outdir / "power.csv", curve)
    if args.svg:
        write_power_svg(outdir / "power.svg", curve)
    _write_manifest(args.output_dir, "power", vars(args))
    return 0


def _cmd_clt(args) -> int:
    d = int(args.d)
    kind = GraphKind.knn(int(args.k)) if args.functional == "knn" else GraphKind.mst()
    c = _require_constants(args.constants, kind, d)
    if args.family == "uniform":
        f = uniform_box(d, 1.0)
        g = uniform_box(d, 1.0)
    else:
        f = truncated_normal(np.zeros(d), float(args.radius))
        g = truncated_normal(np.full(d, float(args.shift)), float(args.radius))
    report = clt_diagnostic(kind, f, g, float(args.p), float(args.n),
                            int(args.replicates), c, seed=int(args.seed))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_clt_csv(outdir / "clt.csv", report)
    print(f"ks_distance={report.ks_distance:.6g} "
          f"var_ratio={report.empirical_variance / report.theoretical_variance:.6g}")
    _write_manifest(args.output_dir, "clt", vars(args))
    return 0


def _cmd_dissim(args) -> int:
    d = int(args.d)
    f = _parse_density(args.f, d)
    g = _parse_density(args.g, d)
    est = hp_dissimilarity(f, g, float(args.p), int(args.mc_n), SeededRng(int(args.seed)))
    print("dissimilarity,se")
    print("%.10g,%.10g" % (est.value, est.se))
    _write_manifest(args.output_dir, "dissim", vars(args))
    return 0


def _cmd_tails(args) -> int:
    s_grid = _parse_grid(args.s_grid)
    tail = stabilization_tail(int(args.k), int(args.d), s_grid,
                              int(args.replicates), SeededRng(int(args.seed)))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["s,tau_hat"]
    lines += ["%.10g,%.10g" % (s, t) for s, t in zip(tail.s_grid, tail.tau_hat)]
    lines.append("# fit_slope=%.10g" % tail.fit_slope)
    with open(outdir / "tails.csv", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("fit_slope=%.10g" % tail.fit_slope)
    _write_manifest(args.output_dir, "tails", vars(args))
    return 0


def _cmd_localpower(args) -> int:
    d = int(args.d)
    kind = GraphKind.knn(1)
    c = _require_constants(args.constants, kind, d)
    h_vec = np.array([float(x) for x in str(args.h_vec).split(",")])
    rep = local_power_crosscheck(
        h_vec, d, float(args.radius), float(args.p), float(args.alpha),
        float(args.n1), float(args.n2), int(args.iters), c, seed=int(args.seed))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_local_power_csv(outdir / "local_power.csv", rep)
    print(f"empirical={rep.empirical.value:.4g}(se {rep.empirical.se:.2g}) "
          f"predicted_rsq4={rep.predicted_rsq4.value:.4g} "
          f"predicted_pq={rep.predicted_pq.value:.4g}")
    _write_manifest(args.output_dir, "localpower", vars(args))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="geomtest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.set_defaults(_required=[])
        _add(sp, "--config", default=None)
        _add(sp, "--seed", default=0, type=int)
        _add(sp, "--output-dir", default=".")

    sp = sub.add_parser("test", help="run one two-sample test on a labeled CSV")
    common(sp)
    _add(sp, "--data", required=True)
    _add(sp, "--functional", default="knn", choices=["knn", "mst"])
    _add(sp, "--k", default=1, type=int)
    _add(sp, "--p", default=None, type=float)
    _add(sp, "--alpha", default=0.05, type=float)
    _add(sp, "--constants", default=None)
    _add(sp, "--method", default="asymptotic", choices=["asymptotic", "permutation"])
    _add(sp, "--permutations", default=199, type=int)
    sp.set_defaults(func=_cmd_test)

    sp = sub.add_parser("constants", help="estimate graph constants on a torus")
    common(sp)
    _add(sp, "--kinds", default="knn:1")
    _add(sp, "--d", required=True, type=int)
    _add(sp, "--side", default=None, type=float)
    _add(sp, "--replicates", default=200, type=int)
    _add(sp, "--mc-n", default=100_000, type=int)
    _add(sp, "--out", required=True)
    sp.set_defaults(func=_cmd_constants)

    sp = sub.add_parser("power", help="empirical power curves on an h grid")
    common(sp)
    _add(sp, "--d", required=True, type=int)
    _add(sp, "--a", required=True, type=float)
    _add(sp, "--h-grid", default="0:3:20")
    _add(sp, "--n1", required=True, type=float)
    _add(sp, "--n2", required=True, type=float)
    _add(sp, "--iters", default=200, type=int)
    _add(sp, "--tests", default=",".join(("knn_1", "knn_2", "knn_3", "fr_mst", "hotelling")))
    _add(sp, "--alpha", default=0.05, type=float)
    _add(sp, "--draw-mode", default="poissonized", choices=["poissonized", "fixed"])
    _add(sp, "--radius", default=6.0, type=float)
    _add(sp, "--permutations", default=199, type=int)
    _add(sp, "--constants", default=None)
    _add(sp, "--threads", default=0, type=int)  # 0 = all available cores
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=_cmd_power)

    sp = sub.add_parser("clt", help="normality diagnostics of the standardized statistic")
    common(sp)
    _add(sp, "--functional", default="knn", choices=["knn", "mst"])
    _add(sp, "--k", default=1, type=int)
    _add(sp, "--d", required=True, type=int)
    _add(sp, "--p", default=0.5, type=float)
    _add(sp, "--n", required=True, type=float)
    _add(sp, "--replicates", default=2000, type=int)
    _add(sp, "--family", default="uniform", choices=["uniform", "normal"])
    _add(sp, "--shift", default=0.0, type=float)
    _add(sp, "--radius", default=6.0, type=float)
    _add(sp, "--constants", default=None)
    sp.set_defaults(func=_cmd_clt)

    sp = sub.add_parser("dissim", help="Henze-Penrose dissimilarity of two densities")
    common(sp)
    _add(sp, "--f", required=True)
    _add(sp, "--g", required=True)
    _add(sp, "--d", required=True, type=int)
    _add(sp, "--p", default=0.5, type=float)
    _add(sp, "--mc-n", default=200_000, type=int)
    sp.set_defaults(func=_cmd_dissim)

    sp = sub.add_parser("tails", help="stabilization-radius tail estimates")
    common(sp)
    _add(sp, "--k", default=1, type=int)
    _add(sp, "--d", required=True, type=int)
    _add(sp, "--s-grid", default="0.25:2:8")
    _add(sp, "--replicates", default=2000, type=int)
    sp.set_defaults(func=_cmd_tails)

    sp = sub.add_parser("localpower", help="limiting-power formula cross-validation")
    common(sp)
    _add(sp, "--d", required=True, type=int)
    _add(sp, "--h-vec", default="1,1")
    _add(sp, "--p", default=0.6, type=float)
    _add(sp, "--alpha", default=0.05, type=float)
    _add(sp, "--n1", required=True, type=float)
    _add(sp, "--n2", required=True, type=float)
    _add(sp, "--iters", default=1000, type=int)
    _add(sp, "--radius", default=3.0, type=float)
    _add(sp, "--constants", default=None)
    sp.set_defaults(func=_cmd_localpower)
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args)
        for name in getattr(args, "_required", ()):
            if getattr(args, name, None) is None:
                print(f"error: --{name.replace('_', '-')} is required", file=sys.stderr)
                return 2
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (InvalidParameterError, InvalidInputError, IncompleteConstantsError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, InsufficientPilotError, GridTooCoarseError,
            ResourceLimitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except GeomtestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())
