"""Command-line interface: single tests, batch screening, simulations, and
the bundled quartet demonstration.

Every command is reproducible from its flags and seed alone.  Output files
never embed timestamps, so identical invocations produce byte-identical
reports.  ``DCAL_THREADS`` is the only recognized environment variable; it
sets the default worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources

from .batchio import CORRECTIONS, load_matrix, screen, write_report
from .calibration import bf_to_posterior, correlation_bf, pcal_bickel, pcal_sellke
from .core import DataPair
from .engine import OosScheme, dcal_test
from .errors import DcalError, ParseError, TargetError
from .multitest import PermutationPlan
from .robust import skipped_correlation
from .simulate import (
    Contaminated,
    CorrelatedBattery,
    EffectGrid,
    NullBattery,
    OutlierKind,
    PAIR_METHODS,
    run_battery_experiment,
    run_effect_grid,
    run_oos_comparison,
    run_outlier_suite,
)

SCHEME_NAMES = ("loo", "cv10x10", "boot632")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_TARGET = 3


def _scheme_from_name(name: str, seed: int) -> OosScheme:
    if name == "loo":
        return OosScheme.loo()
    if name == "cv10x10":
        return OosScheme.repeated_kfold(10, 10, seed)
    if name == "boot632":
        return OosScheme.boot632(100, seed)
    raise ParseError(f"unknown scheme {name!r}")


def _default_threads() -> int:
    raw = os.environ.get("DCAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.05, help="significance level")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument(
        "--scheme", choices=SCHEME_NAMES, default="loo",
        help="out-of-sample prediction scheme",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: DCAL_THREADS or 1)",
    )


def _read_pair_file(path: str) -> DataPair:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ParseError(f"{path}: file is empty")
    xs, ys = [], []
    for i, line in enumerate(lines, start=1):
        parts = [p for p in line.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ParseError(f"{path} line {i}: expected two columns, got {len(parts)}")
        try:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
        except ValueError:
            if i == 1:
                continue  # header row
            raise ParseError(f"{path} line {i}: non-numeric value") from None
    return DataPair(xs, ys)


def _parse_inline(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ParseError(f"{flag}: expected comma-separated numbers") from None


def _num(v: float) -> str:
    return f"{v:.6g}"


def cmd_test(args) -> int:
    if args.input:
        pair = _read_pair_file(args.input)
    elif args.x and args.y:
        pair = DataPair(_parse_inline(args.x, "--x"), _parse_inline(args.y, "--y"))
    else:
        raise ParseError("provide either --input FILE or both --x and --y")
    scheme = _scheme_from_name(args.scheme, args.seed)
    res = dcal_test(pair, alpha=args.alpha, fast=args.fast, scheme=scheme)
    doc = {
        "n": pair.n,
        "r": res.r,
        "p": res.p,
        "r_dcal": res.r_dcal,
        "p_dcal": res.p_dcal,
        "sign_flip": res.sign_flip_triggered,
        "skipped_fast": res.skipped_by_fast_flag,
        "scheme": scheme.label,
        "alpha": args.alpha,
    }
    extras = [m.strip() for m in (args.methods or "").split(",") if m.strip()]
    for method in extras:
        if method == "sellke":
            doc["pcal_sellke"] = pcal_sellke(res.p)
        elif method == "bickel":
            doc["pcal_bickel"] = pcal_bickel(res.p)
        elif method == "ppbf":
            doc["ppbf"] = bf_to_posterior(correlation_bf(pair))
        elif method == "skipped":
            try:
                sk = skipped_correlation(pair)
                doc["r_skipped"] = sk.r
                doc["p_skipped"] = sk.p
                doc["n_skipped"] = sk.n_used
            except DcalError as exc:
                doc["r_skipped"] = None
                doc["p_skipped"] = None
                doc["skipped_error"] = str(exc)
        else:
            raise ParseError(f"unknown method {method!r} (sellke, bickel, ppbf, skipped)")
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        for key, value in doc.items():
            shown = _num(value) if isinstance(value, float) else value
            print(f"{key:>14}  {shown}")
    return EXIT_OK


def cmd_screen(args) -> int:
    threads = args.threads if args.threads is not None else _default_threads()
    corrections = tuple(c.strip() for c in args.corrections.split(",") if c.strip())
    matrix = load_matrix(
        args.matrix,
        delimiter=args.delimiter,
        orientation=args.orientation,
        missing_policy=args.missing_policy,
    )
    for warning in matrix.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    scheme = _scheme_from_name(args.scheme, args.seed)

    def progress(done: int, total: int) -> None:
        print(f"screened {done}/{total} features", file=sys.stderr)

    started = time.perf_counter()
    report = screen(
        matrix,
        args.target,
        alpha=args.alpha,
        scheme=scheme,
        corrections=corrections,
        fast=args.fast,
        plan=PermutationPlan(args.permutations, args.seed),
        threads=threads,
        progress=progress,
    )
    write_report(report, args.output, format=args.format)
    elapsed = time.perf_counter() - started
    print(f"screened {report.summary['tested']} features in {elapsed:.2f} s")
    for method, count in report.summary["significant"].items():
        print(f"  significant ({method}): {count}")
    print(f"report written to {args.output}")
    return EXIT_OK


_CONFIG_KEYS = {
    "design", "n", "seed", "repetitions", "alpha", "methods", "scheme", "schemes",
    "permutations", "m", "m_true", "m_null", "rho", "rho_list", "n_list",
    "kinds", "sd_list", "fraction", "magnitude",
}


def _parse_config(path: str) -> dict:
    cfg: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path} line {line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ParseError(f"{path} line {line_no}: unknown config key {key!r}")
            cfg[key] = value.strip()
    if "design" not in cfg:
        raise ParseError(f"{path}: missing required key 'design'")
    return cfg


def _cfg_int(cfg: dict, key: str, default=None) -> int:
    if key not in cfg:
        if default is None:
            raise ParseError(f"config key {key!r} is required")
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ParseError(f"config key {key!r}: expected an integer") from None


def _cfg_float(cfg: dict, key: str, default=None) -> float:
    if key not in cfg:
        if default is None:
            raise ParseError(f"config key {key!r} is required")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ParseError(f"config key {key!r}: expected a number") from None


def _cfg_list(cfg: dict, key: str, default=None) -> list[str]:
    if key not in cfg:
        if default is None:
            raise ParseError(f"config key {key!r} is required")
        return default
    return [tok.strip() for tok in cfg[key].split(",") if tok.strip()]


def cmd_simulate(args) -> int:
    threads = args.threads if args.threads is not None else _default_threads()
    cfg = _parse_config(args.config)
    design_name = cfg["design"]
    seed = args.seed if args.seed is not None else _cfg_int(cfg, "seed", 0)
    alpha = args.alpha if args.alpha is not None else _cfg_float(cfg, "alpha", 0.05)
    repetitions = (
        args.repetitions if args.repetitions is not None else _cfg_int(cfg, "repetitions", 1)
    )
    permutations = _cfg_int(cfg, "permutations", 999)

    if design_name == "null_battery":
        design = NullBattery(m=_cfg_int(cfg, "m"), n=_cfg_int(cfg, "n"), seed=seed)
        methods = _cfg_list(cfg, "methods", ["uncorrected", "holm", "bh", "dcal"])
        scheme = _scheme_from_name(cfg.get("scheme", "loo"), seed)
        report = run_battery_experiment(
            design, methods, alpha=alpha, repetitions=repetitions, scheme=scheme,
            plan=PermutationPlan(permutations, seed), threads=threads,
        )
    elif design_name == "correlated_battery":
        design = CorrelatedBattery(
            m_true=_cfg_int(cfg, "m_true"), m_null=_cfg_int(cfg, "m_null"),
            rho=_cfg_float(cfg, "rho"), n=_cfg_int(cfg, "n"), seed=seed,
        )
        methods = _cfg_list(cfg, "methods", ["uncorrected", "holm", "bh", "dcal"])
        scheme = _scheme_from_name(cfg.get("scheme", "loo"), seed)
        report = run_battery_experiment(
            design, methods, alpha=alpha, repetitions=repetitions, scheme=scheme,
            plan=PermutationPlan(permutations, seed), threads=threads,
        )
    elif design_name == "oos_comparison":
        design = CorrelatedBattery(
            m_true=_cfg_int(cfg, "m_true", 0), m_null=_cfg_int(cfg, "m_null"),
            rho=_cfg_float(cfg, "rho", 0.0), n=_cfg_int(cfg, "n"), seed=seed,
        )
        if design.m_true == 0:
            design = NullBattery(m=design.m_null, n=design.n, seed=seed)
        schemes = [
            _scheme_from_name(name, seed) for name in _cfg_list(cfg, "schemes", list(SCHEME_NAMES))
        ]
        report = run_oos_comparison(
            design, schemes, alpha=alpha, repetitions=repetitions, threads=threads
        )
    elif design_name == "effect_grid":
        design = EffectGrid(
            rho_list=tuple(float(v) for v in _cfg_list(cfg, "rho_list")),
            n_list=tuple(int(v) for v in _cfg_list(cfg, "n_list")),
            seed=seed,
        )
        methods = _cfg_list(cfg, "methods", list(PAIR_METHODS))
        report = run_effect_grid(
            design, methods, alpha=alpha, repetitions=repetitions, threads=threads
        )
    elif design_name == "outlier_suite":
        kinds = _cfg_list(cfg, "kinds")
        fraction = _cfg_float(cfg, "fraction", 0.1)
        magnitude = _cfg_float(cfg, "magnitude", 8.0)
        n = _cfg_int(cfg, "n")
        cells: list[Contaminated] = []
        for kind in kinds:
            if kind == "high_variance":
                rho = _cfg_float(cfg, "rho", 0.5)
                for sd in _cfg_list(cfg, "sd_list", ["2", "3", "5"]):
                    cells.append(
                        Contaminated(
                            rho=rho,
                            outlier=OutlierKind("high_variance", sd_outlier=float(sd)),
                            fraction=fraction, n=n, seed=seed,
                        )
                    )
            elif kind in ("univariate", "bivariate"):
                for rho in _cfg_list(cfg, "rho_list"):
                    cells.append(
                        Contaminated(
                            rho=float(rho),
                            outlier=OutlierKind(kind, magnitude=magnitude),
                            fraction=fraction, n=n, seed=seed,
                        )
                    )
            else:
                raise ParseError(f"config key 'kinds': unknown outlier kind {kind!r}")
        methods = _cfg_list(cfg, "methods", ["pearson", "dcal", "skipped"])
        report = run_outlier_suite(
            cells, methods, alpha=alpha, repetitions=repetitions, threads=threads
        )
    else:
        raise ParseError(f"config key 'design': unknown design {design_name!r}")

    base = args.output
    csv_path = base if base.endswith(".csv") else base + ".csv"
    json_path = (base[: -len(".csv")] if base.endswith(".csv") else base) + ".json"
    report.write_csv(csv_path)
    report.write_json(json_path)
    print(f"{len(report.records)} records written to {csv_path} and {json_path}")
    return EXIT_OK


_ANSCOMBE_METHOD_COLUMNS = ["cor", "dcal", "pcal_sellke", "pcal_bickel", "ppbf", "skipped"]


def _anscombe_rows():
    ref = resources.files("dcal.fixtures").joinpath("anscombe.csv")
    datasets: dict[str, tuple[list[float], list[float]]] = {}
    for line in ref.read_text(encoding="utf-8").splitlines()[1:]:
        name, xs, ys = line.split(",")
        datasets.setdefault(name, ([], []))
        datasets[name][0].append(float(xs))
        datasets[name][1].append(float(ys))
    return datasets


def cmd_anscombe(args) -> int:
    datasets = _anscombe_rows()
    results = {}
    for name in sorted(datasets):
        pair = DataPair(*datasets[name])
        res = dcal_test(pair, alpha=args.alpha, fast=False)
        row = {
            "cor": {"r": res.r, "p": res.p},
            "dcal": {"r": res.r_dcal, "p": res.p_dcal, "flip": res.sign_flip_triggered},
            "pcal_sellke": {"p": pcal_sellke(res.p)},
            "pcal_bickel": {"p": pcal_bickel(res.p)},
            "ppbf": {"p": 1.0 - bf_to_posterior(correlation_bf(pair))},
        }
        try:
            sk = skipped_correlation(pair)
            row["skipped"] = {"r": sk.r, "p": sk.p}
        except DcalError as exc:
            row["skipped"] = {"r": None, "p": None, "error": str(exc)}
        results[name] = row
    if args.json:
        print(json.dumps(results, indent=2))
        return EXIT_OK

    def cell(value) -> str:
        return "NA".rjust(12) if value is None else f"{value:12.4f}"

    print("r values")
    print("dataset" + "".join(f"{m:>13}" for m in ("cor", "dcal", "skipped")))
    for name, row in results.items():
        flip = "  (flip)" if row["dcal"].get("flip") else ""
        print(
            f"{name:>7}"
            + cell(row["cor"]["r"]) + cell(row["dcal"]["r"]) + cell(row["skipped"]["r"])
            + flip
        )
    print()
    print("p values")
    print("dataset" + "".join(f"{m:>13}" for m in _ANSCOMBE_METHOD_COLUMNS))
    for name, row in results.items():
        print(
            f"{name:>7}"
            + cell(row["cor"]["p"]) + cell(row["dcal"]["p"])
            + cell(row["pcal_sellke"]["p"]) + cell(row["pcal_bickel"]["p"])
            + cell(row["ppbf"]["p"]) + cell(row["skipped"]["p"])
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcal",
        description="Calibrated correlation testing, screening, and simulations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run the calibrated test on one pair")
    _add_common(p_test)
    p_test.add_argument("--input", help="two-column file (x, y)")
    p_test.add_argument("--x", help="inline comma-separated x values")
    p_test.add_argument("--y", help="inline comma-separated y values")
    p_test.add_argument("--fast", action="store_true", help="skip OOS work when p >= alpha")
    p_test.add_argument(
        "--methods", default="",
        help="extra methods: comma list from sellke,bickel,ppbf,skipped",
    )
    p_test.set_defaults(func=cmd_test)

    p_screen = sub.add_parser("screen", help="screen a feature matrix against a target")
    _add_common(p_screen)
    p_screen.add_argument("--matrix", required=True, help="feature matrix CSV")
    p_screen.add_argument("--target", required=True, help="target feature name")
    p_screen.add_argument(
        "--corrections", default="holm,bh",
        help=f"comma list from {','.join(CORRECTIONS)}",
    )
    p_screen.add_argument("--output", required=True, help="report path")
    p_screen.add_argument("--format", choices=("csv", "json"), default="csv")
    p_screen.add_argument("--delimiter", default=",")
    p_screen.add_argument(
        "--orientation", choices=("features_in_rows", "samples_in_rows"),
        default="features_in_rows",
    )
    p_screen.add_argument(
        "--missing-policy", choices=("drop_feature", "fail"), default="drop_feature",
    )
    p_screen.add_argument("--permutations", type=int, default=999)
    fast_group = p_screen.add_mutually_exclusive_group()
    fast_group.add_argument("--fast", dest="fast", action="store_true")
    fast_group.add_argument("--no-fast", dest="fast", action="store_false")
    p_screen.set_defaults(fast=True, func=cmd_screen)

    p_sim = sub.add_parser("simulate", help="run a configured simulation experiment")
    p_sim.add_argument("--config", required=True, help="key = value design file")
    p_sim.add_argument("--output", required=True, help="report base path (.csv/.json)")
    p_sim.add_argument("--repetitions", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--alpha", type=float, default=None)
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_ans = sub.add_parser("anscombe", help="print the bundled quartet analysis")
    _add_common(p_ans)
    p_ans.set_defaults(func=cmd_anscombe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except TargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TARGET
    except (ParseError, DcalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def entry() -> None:
    sys.exit(main())
