"""Command-line entry point.

Every command prints one delimited line per claim,

    suite,claim,theory,measured,tolerance,comparator,verdict

and exits 0 only if no enabled claim fails.  Configuration errors exit
with status 2, regime and numerical failures with status 3.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .analysis import Claim, exponent_claim
from .config import ExperimentConfig
from .errors import ConfigError, FitError, NumericalError, RadgasError, RegimeError
from .fitting import NormSeries, default_window, fit_decay
from .harness import run_experiment, run_sweep

HEADER = ("suite", "claim", "theory", "measured", "tolerance", "comparator", "verdict")


def _num(x):
    return "" if x is None else repr(float(x))


def _emit(writer, suite: str, claim: Claim) -> None:
    writer.writerow([suite, claim.name, _num(claim.theory), _num(claim.measured),
                     _num(claim.tolerance), claim.comparator, claim.status])


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load(args, **forced) -> ExperimentConfig:
    overrides = _parse_set(args.set)
    if args.output:
        overrides["run.output_dir"] = args.output
    overrides.update(forced)
    return ExperimentConfig.from_file(args.config, overrides)


def _values(text: str) -> list:
    return [v for v in text.replace(",", " ").split() if v]


def cmd_run(args, writer) -> int:
    record = run_experiment(_load(args))
    writer.writerow(HEADER)
    for suite, claim in record.all_claims():
        _emit(writer, suite, claim)
    print(f"# summary {record.output_dir / 'summary.json'}", file=sys.stderr)
    return 0 if record.passed else 1


def cmd_verify_linear(args, writer) -> int:
    record = run_experiment(_load(args, **{"run.suites": "linear"}))
    writer.writerow(HEADER)
    for suite, claim in record.all_claims():
        _emit(writer, suite, claim)
    return 0 if record.passed else 1


def cmd_sweep(args, writer) -> int:
    base = _load(args)
    entries = run_sweep(base, args.axis, _values(args.values), base.output_dir,
                        workers=args.workers)
    writer.writerow((args.axis,) + HEADER)
    ok = True
    for e in entries:
        if e.record is None:
            writer.writerow([e.value, "", "run", "", "", "", "", "error"])
            print(f"# {args.axis}={e.value}: {e.error}", file=sys.stderr)
            ok = False
            continue
        for suite, claim in e.record.all_claims():
            writer.writerow([e.value, suite, claim.name, _num(claim.theory), _num(claim.measured),
                             _num(claim.tolerance), claim.comparator, claim.status])
        ok = ok and e.record.passed
    return 0 if ok else 1


def cmd_fit(args, writer) -> int:
    series = NormSeries.from_csv(args.norms, kind=Path(args.norms).stem)
    window = tuple(args.window) if args.window else default_window(series.times)
    claim = exponent_claim(series.kind, series, args.theory, args.tolerance, window,
                           dual=args.log_correction)
    writer.writerow(HEADER + ("t_lo", "t_hi", "log_exponent"))
    log_exp = ""
    if args.log_correction and claim.measured is not None:
        log_exp = _num(fit_decay(series, window, log_correction=True).exponent)
    writer.writerow([
        "fit", claim.name, _num(claim.theory), _num(claim.measured), _num(claim.tolerance),
        claim.comparator, claim.status, _num(window[0]), _num(window[1]), log_exp,
    ])
    if claim.reason:
        print(f"# {claim.reason}", file=sys.stderr)
    return 0 if claim.verdict else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radgas", description="Radiating-gas decay experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def config_args(sp):
        sp.add_argument("config", help="INI experiment configuration")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value (section.key or alias); repeatable")
        sp.add_argument("-o", "--output", help="output directory (overrides [run] output_dir)")

    sp = sub.add_parser("run", help="run every enabled suite")
    config_args(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify-linear", help="linear propagator suite only (no time stepping)")
    config_args(sp)
    sp.set_defaults(func=cmd_verify_linear)

    sp = sub.add_parser("sweep", help="repeat a run over values of one parameter")
    config_args(sp)
    sp.add_argument("--axis", required=True, help="parameter, e.g. amplitude or grid.N")
    sp.add_argument("--values", required=True, help="comma- or space-separated values")
    sp.add_argument("--workers", type=int, default=1, help="parallel processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="fit a power law to a t,value CSV")
    sp.add_argument("norms", help="CSV with header t,value")
    sp.add_argument("--theory", type=float, required=True, help="expected exponent")
    sp.add_argument("--tolerance", type=float, default=0.1)
    sp.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    sp.add_argument("--log-correction", action="store_true",
                    help="also report the fit of value / log(1 + t)")
    sp.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    try:
        return args.func(args, writer)
    except (ConfigError, FitError, FileNotFoundError) as exc:
        print(f"radgas: error: {exc}", file=sys.stderr)
        return 2
    except (RegimeError, NumericalError) as exc:
        print(f"radgas: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except RadgasError as exc:
        print(f"radgas: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
