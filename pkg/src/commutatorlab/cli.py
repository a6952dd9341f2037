"""commutatorlab command line.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration could not
be parsed, 3 a file could not be read or written.
"""

import argparse
import csv
import datetime
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import _backend, analysis, kernel
from .scenario import (
    ConfigError,
    ConfigIOError,
    list_checks,
    load_config,
    plot_rows,
    resolve,
    run_scenario,
    shipped_names,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_IO = 0, 1, 2, 3


def write_report(report, outdir, stem, ctx, matrix=False):
    """<stem>.report.json, <stem>.plotdata.csv and optionally <stem>.matrix.csv."""
    os.makedirs(outdir, exist_ok=True)
    doc = dict(report)
    doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    doc["backend"] = _backend.backend_name()
    path = os.path.join(outdir, f"{stem}.report.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    rows = plot_rows(ctx)
    if rows:
        with open(os.path.join(outdir, f"{stem}.plotdata.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["series", "x", "value"])
            for s, x, v in rows:
                wr.writerow([s, repr(float(x)), repr(float(v))])
    if matrix and "matrix" in ctx:
        kernel.write_matrix_csv(os.path.join(outdir, f"{stem}.matrix.csv"), ctx["matrix"])
    return path


def _run_one(sc, outdir, matrix, workers):
    report, ctx = run_scenario(sc, workers)
    write_report(report, outdir, sc.name, ctx, matrix)
    return sc.name, report["all_pass"], [c["name"] for c in report["checks"] if not c["pass"]]


def cmd_run(args):
    scenarios = []
    for path in args.config:
        scenarios.extend(load_config(path))
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names must be unique across configs")
    workers = _backend.thread_cap()
    if args.parallel and len(scenarios) > 1:
        # one working directory per scenario keeps concurrent writers apart
        nproc = workers or min(len(scenarios), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=nproc) as pool:
            futs = [pool.submit(_run_one, sc, os.path.join(args.out, sc.name), args.matrix, 1) for sc in scenarios]
            results = [fu.result() for fu in futs]
    else:
        results = [_run_one(sc, args.out, args.matrix, workers) for sc in scenarios]
    failed = False
    for name, ok, bad in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + ("" if ok else f" ({', '.join(bad)})"))
        failed |= not ok
    return EXIT_FAIL if failed else EXIT_OK


def cmd_list_checks(args):
    for info in list_checks():
        print(f"{info.name}\ttol={info.default_tol:g}\t{info.anchor}")
    if args.scenarios:
        print()
        for n in shipped_names():
            print(f"scenario\t{n}")
    return EXIT_OK


def cmd_kernel_dump(args):
    sc = resolve(args.scenario, args.name)
    f, g = sc.functions()
    km = kernel.nystrom_assemble(f, g, sc.grid)
    out = args.out or f"{sc.name}.matrix.csv"
    km.to_csv(out)
    if args.binary:
        km.to_binary(args.binary)
    print(f"wrote {out} (N={km.grid.N}, L={km.grid.L:g})")
    for w in km.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_spectrum(args):
    sc = resolve(args.scenario, args.name)
    f, g = sc.functions()
    route = args.route or sc.route
    from .scenario import _route_matrix

    M = _route_matrix(sc, f, g, route)
    rep = analysis.positivity_spectrum(M, args.tol, top=args.top, route=route)
    doc = rep.to_json()
    doc["relative_min"] = rep.relative_min
    json.dump(doc, sys.stdout, indent=2)
    print()
    return EXIT_OK


def cmd_probe(args):
    sc = resolve(args.scenario, args.name)
    f, g = sc.functions()
    vals = np.linspace(args.start, args.stop, args.steps) if args.values is None else args.values
    cat = analysis.conjecture_probe(f, g, args.family, vals, sc.grid, args.tol, workers=_backend.thread_cap())
    analysis.catalog_to_csv(cat, args.csv or f"{sc.name}.probe.csv")
    json.dump(analysis.catalog_to_json(cat), sys.stdout, indent=2)
    print()
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="commutatorlab",
        description="Discretize i[f(P), g(Q)] and check positivity, trace and kernel identities.",
        epilog="COMMUTATORLAB_THREADS caps worker threads; COMMUTATORLAB_BACKEND=numpy disables numba.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run scenario configs and write reports")
    r.add_argument("config", nargs="+", help="scenario config JSON file(s)")
    r.add_argument("--out", default="reports", help="output directory (default: reports)")
    r.add_argument("--parallel", action="store_true", help="run scenarios in parallel, one subdirectory each")
    r.add_argument("--matrix", action="store_true", help="also write <name>.matrix.csv for positivity checks")
    r.set_defaults(func=cmd_run)

    lc = sub.add_parser("list-checks", help="print the check registry")
    lc.add_argument("--scenarios", action="store_true", help="also list shipped scenario names")
    lc.set_defaults(func=cmd_list_checks)

    def scen(sp):
        sp.add_argument("scenario", help="shipped scenario name or config path")
        sp.add_argument("--name", help="scenario name inside a multi-scenario config")

    kd = sub.add_parser("kernel-dump", help="write the Nystrom matrix as CSV (i,j,re,im)")
    scen(kd)
    kd.add_argument("--out", help="CSV path (default: <name>.matrix.csv)")
    kd.add_argument("--binary", help="also write the binary dump to this path")
    kd.set_defaults(func=cmd_kernel_dump)

    sp = sub.add_parser("spectrum", help="print the positivity report as JSON")
    scen(sp)
    sp.add_argument("--route", choices=("kernel", "operator", "weyl"))
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--top", type=int, default=8)
    sp.set_defaults(func=cmd_spectrum)

    pr = sub.add_parser("probe", help="minimum eigenvalue along a perturbation family")
    scen(pr)
    pr.add_argument("--family", choices=analysis.FAMILIES, default="bump")
    pr.add_argument("--values", type=float, nargs="+", help="explicit parameter values")
    pr.add_argument("--start", type=float, default=0.0)
    pr.add_argument("--stop", type=float, default=0.5)
    pr.add_argument("--steps", type=int, default=6)
    pr.add_argument("--tol", type=float, default=1e-8)
    pr.add_argument("--csv", help="catalog CSV path (default: <name>.probe.csv)")
    pr.set_defaults(func=cmd_probe)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigIOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception:  # a check crashed: report it as a failure, not a parse error
        traceback.print_exc()
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
