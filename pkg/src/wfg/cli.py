"""Command line entry point: ``wfg synth | analyze | compare | selftest``.

Exit codes: 0 success, 1 computation error, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
import warnings
from pathlib import Path

from .config import RunConfig, SchemaError
from .errors import ConfigError, InvalidSignal, OutOfBox, WFGError
from .io import (
    ResultBundle,
    agreement_csv,
    atomic_write,
    read_bundle,
    read_signal,
    report_csv,
    safe_name,
    write_bundle,
    write_signal,
)
from .wavefront import (
    compare_many,
    compare_reports,
    gabor_wf,
    gabor_wf_lattice,
    hstft_local_report,
    hwf_estimate,
    resolve_threads,
    with_params,
)

log = logging.getLogger("wfg")

METHODS = {
    "gabor": gabor_wf,
    "gabor-lattice": gabor_wf_lattice,
    "hstft-local": hstft_local_report,
    "hwf": hwf_estimate,
}

EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2


def _config(path) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig.from_dict({})


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.out)


def cmd_synth(args) -> int:
    cfg = _config(args.config)
    out = _out_dir(args, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        signals = cfg.build_signals()
    for w in caught:
        log.warning("%s", w.message)
    if not signals:
        raise ConfigError("configuration selects no signals (set 'signals', 'corpus' or 'prescribed')")
    for u in signals:
        path = write_signal(out / f"{safe_name(u.label)}.json", u)
        print(path)
    return EXIT_OK


def _analyze_one(u, methods, params):
    reports, timing = [], {}
    for m in methods:
        t0 = time.perf_counter()
        try:
            rep = METHODS[m](u, params=params)
        except WFGError as exc:
            exc.args = (f"{u.label} [{m}]: {exc}",)
            raise
        timing[f"{u.label}/{m}"] = time.perf_counter() - t0
        reports.append(rep)
    return reports, timing


def cmd_analyze(args) -> int:
    cfg = _config(args.config)
    params = with_params(cfg.estimator, threads=resolve_threads(args.threads or cfg.threads))
    methods = list(METHODS) if args.method == "all" else [args.method]
    out = _out_dir(args, cfg)
    signals = [read_signal(p) for p in args.signals]
    bundle = ResultBundle(cfg.snapshot())
    for u in signals:
        reports, timing = _analyze_one(u, methods, params)
        bundle.reports.extend(reports)
        bundle.timing.update(timing)
        for rep in reports[1:]:
            bundle.agreements.append((reports[0].method.value, rep.method.value, compare_reports(reports[0], rep)))
        for m, rep in zip(methods, reports):
            atomic_write(out / f"{safe_name(u.label)}__{m}.csv", report_csv(rep))
    write_bundle(out / "bundle.json", bundle)
    atomic_write(out / "report.json", bundle.canonical())
    for rep in bundle.reports:
        flagged = ", ".join(f"{a:.2f}" for a in rep.flagged_angles()) or "none"
        print(f"{rep.signal_id} {rep.method.value}: flagged [{flagged}]")
    for a, b, m in bundle.agreements:
        print(f"{a} vs {b}: agreement {m.agreement:.3f}, indeterminate {m.indeterminate_fraction:.3f}")
    print(out / "bundle.json")
    return EXIT_OK


def cmd_compare(args) -> int:
    A, B = read_bundle(args.bundle_a), read_bundle(args.bundle_b)
    if len(A.reports) != len(B.reports):
        raise ConfigError(f"bundles hold {len(A.reports)} and {len(B.reports)} reports")
    m = compare_many(A.reports, B.reports)
    text = agreement_csv(m)
    if args.out:
        print(atomic_write(Path(args.out) / "agreement.csv", text))
    else:
        sys.stdout.write(text)
    print(f"agreement {m.agreement:.4f} indeterminate {m.indeterminate_fraction:.4f} pairs {len(m.pairs)}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    which = [int(k) for k in args.only.split(",")] if args.only else None
    results = run_all(which)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed {failed}" if failed else ""))
    return EXIT_OK if not failed else EXIT_COMPUTE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfg", description="Gabor and homogeneous wave front set estimation")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False):
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--out", help="output directory (overrides the config)")
        if threads:
            p.add_argument("--threads", type=int, help="worker threads (default: WFG_THREADS or 1)")

    p = sub.add_parser("synth", help="synthesize the configured signals")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="estimate wave front sets of signal files")
    p.add_argument("signals", nargs="+", help="signal JSON files")
    p.add_argument("--method", choices=[*METHODS, "all"], default="gabor")
    common(p, threads=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="direction-wise agreement of two result bundles")
    p.add_argument("bundle_a")
    p.add_argument("bundle_b")
    p.add_argument("--out", help="directory for agreement.csv (default: stdout)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("selftest", help="run the acceptance experiments")
    p.add_argument("--only", help="comma separated criterion numbers, e.g. 1,2,7")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SchemaError, InvalidSignal, OutOfBox, ConfigError) as exc:
        print(f"wfg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"wfg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WFGError as exc:
        print(f"wfg: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
