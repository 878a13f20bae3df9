"""Command line entry point: ``lab run|verify|report``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage, parse or IO error.
"""
import argparse
import json
import os
import sys
import time

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _set_threads(n):
    # only effective when the BLAS has not been loaded yet
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _out_dir(cfg, override):
    if override:
        return override
    if cfg.out:
        base = os.path.dirname(cfg.path) if cfg.path else os.getcwd()
        return os.path.join(base, cfg.out)
    return os.path.join(os.getcwd(), "runs", cfg.kind)


def _fail(msg):
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def cmd_run(args):
    from . import __version__
    from .config import load_config
    from .errors import ConfigError, LabError
    from .experiments import RUNNERS, build_report, metrics_rows
    from .output import ensure_dir, write_csv, write_json

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    if args.seed is not None:
        cfg = type(cfg)(kind=cfg.kind, seed=args.seed, out=cfg.out, sections=cfg.sections,
                        path=cfg.path, raw={**cfg.raw, "seed": args.seed})
    out = _out_dir(cfg, args.out)
    try:
        ensure_dir(out)
    except OSError as exc:
        return _fail(f"cannot create {out}: {exc.strerror}")
    t0 = time.perf_counter()
    if cfg.kind == "report":
        # run paths in a report config are relative to the config, like ``out``
        base = os.path.dirname(cfg.path) if cfg.path else os.getcwd()
        runs = [os.path.normpath(os.path.join(base, d)) for d in cfg.get("experiment", "runs")]
        try:
            _, files = build_report(runs, out)
        except (OSError, LabError) as exc:
            return _fail(f"report: {exc}")
        checks = []
    else:
        runner, checker = RUNNERS[cfg.kind]
        try:
            files = runner(cfg, out)
            checks = checker(cfg, out)
        except LabError as exc:
            return _fail(f"{cfg.kind} experiment failed [{exc.code}]: {exc}")
        write_csv(os.path.join(out, "metrics.csv"), ["check", "value", "limit", "passed", "detail"],
                  metrics_rows(checks))
        files = files + ["metrics.csv"]
    passed = all(c.passed for c in checks)
    record = {"config_hash": cfg.hash, "version": __version__, "kind": cfg.kind, "seed": cfg.seed,
              "wall_time": time.perf_counter() - t0, "outputs": files + ["run.json"],
              "checks": [c.as_dict() for c in checks], "passed": passed, "config": cfg.raw}
    write_json(os.path.join(out, "run.json"), record)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} (limit {c.limit:.6g})")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_verify(args):
    from .config import load_config
    from .errors import ConfigError, LabError
    from .experiments import OUTPUTS, RUNNERS
    from .output import write_json

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    if cfg.kind == "report":
        return _fail("report configs have nothing to verify")
    out = _out_dir(cfg, args.out)
    missing = [f for f in OUTPUTS[cfg.kind] if not os.path.isfile(os.path.join(out, f))]
    if not os.path.isdir(out) or missing:
        listing = missing if os.path.isdir(out) else [out]
        print(json.dumps({"verdict": "missing", "missing": listing}, sort_keys=True))
        return EXIT_USAGE
    try:
        checks = RUNNERS[cfg.kind][1](cfg, out)
    except (LabError, KeyError, ValueError, IndexError) as exc:
        checks = None
        err = f"{type(exc).__name__}: {exc}"
    if checks is None:
        verdict = {"verdict": "fail", "failed": ["unreadable-outputs"], "error": err}
        code = EXIT_FAIL
    else:
        failed = [c.name for c in checks if not c.passed]
        verdict = {"verdict": "pass" if not failed else "fail", "failed": failed,
                   "checks": [c.as_dict() for c in checks]}
        code = EXIT_OK if not failed else EXIT_FAIL
    write_json(os.path.join(out, "verdict.json"), verdict)
    print(json.dumps(verdict, sort_keys=True))
    return code


def cmd_report(args):
    from .errors import LabError
    from .experiments import build_report
    from .output import ensure_dir

    dirs = [d for d in args.runs if os.path.isfile(os.path.join(d, "run.json"))]
    absent = [d for d in args.runs if d not in dirs]
    if absent:
        return _fail("no run.json in: " + ", ".join(absent))
    out = args.out or "report"
    try:
        ensure_dir(out)
        records, files = build_report(dirs, out)
    except (OSError, LabError, KeyError) as exc:
        return _fail(str(exc))
    with open(os.path.join(out, "summary.txt")) as fh:
        print(fh.read(), end="")
    return EXIT_OK if all(r.get("passed") for r in records) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="lab", description="threshold spectral laboratory")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread count")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run an experiment"), ("verify", "re-check stored outputs")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--out", default=None)
        s.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    s = sub.add_parser("report", help="summarize run directories")
    s.add_argument("runs", nargs="+")
    s.add_argument("--out", default=None)
    s.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    _set_threads(args.threads)
    handler = {"run": cmd_run, "verify": cmd_verify, "report": cmd_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
