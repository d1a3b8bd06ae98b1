"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .calibrate import fit_all
from .evaluate import DEFAULT_BINS, build_report, contract_outcomes
from .model import TariffPlan, ValidationError
from .pipeline import final_profiles
from .pricing import DEFAULT_PATHS, price_table
from .recovery import run_recovery
from .simulate import ObservationLaw, SimulationConfig, simulate_portfolio

log = logging.getLogger("servipricer")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ValidationError):
    pass


class NonConvergence(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- commands ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = sio.load_run_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    law = cfg.t_obs if args.t_obs is None else _parse_law(args.t_obs)
    n, profiles = cfg.n, None
    if args.profiles_from:
        finals = final_profiles(sio.read_dataset(args.profiles_from))
        n = len(finals)
        profiles = tuple(finals[i] for i in sorted(finals))
    data = simulate_portfolio(SimulationConfig(n, law, seed, cfg.params, cfg.plan, profiles=profiles))
    text = sio.write_dataset(data, args.out)
    sio.write_manifest(args.out, text, command="simulate", seed=seed, n=n, t_obs=str(law),
                       rows=len(data.events()), params=sio.params_to_dict(cfg.params),
                       profiles_from=args.profiles_from)
    log.info("wrote %d rows for %d machines to %s", len(data.events()), n, args.out)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    data = sio.read_dataset(args.data)
    plan = TariffPlan.named(args.plan)
    fit = fit_all(data, plan, pm_interval=args.pm_interval)
    blocks = {name: {"converged": b.converged, "iterations": b.iterations, "loglik": b.loglik_at_optimum,
                     "errors": b.errors} for name, b in fit.blocks.items()}
    doc = {
        "plan": plan.id,
        "data": str(args.data),
        "converged": fit.converged,
        "loglik": fit.loglik_at_optimum,
        "errors": fit.errors,
        "blocks": blocks,
        "params": sio.params_to_dict(fit.estimates) if fit.estimates is not None else None,
        "table": fit.table(),
    }
    text = sio.dumps_json(doc)
    sio.atomic_write_text(args.out, text)
    sio.write_manifest(args.out, text, command="calibrate", plan=plan.id, data=str(args.data))
    for name, msg in fit.errors.items():
        log.warning("%s: %s", name, msg)
    if not fit.blocks or all(b.estimates is None for b in fit.blocks.values()):
        raise NonConvergence("no block could be calibrated")
    return EXIT_OK


def cmd_price(args) -> int:
    if not args.duration > 0:
        raise UsageError(f"--duration must be positive, got {args.duration}")
    if args.paths < 1:
        raise UsageError("--paths must be at least 1")
    params = sio.load_params(args.params)
    plan = TariffPlan.named(args.plan)
    table = price_table(params, plan, args.duration, args.paths, args.seed)
    text = sio.price_table_to_csv(table)
    sio.atomic_write_text(args.out, text)
    sio.write_manifest(args.out, text, command="price", plan=plan.id, duration=args.duration, paths=args.paths,
                       seed=args.seed, params=sio.params_to_dict(params), rows=len(table))
    return EXIT_OK


def _parse_tariff(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise UsageError(f"--tariff expects NAME=PATH, got {text!r}")
    return name, path


def cmd_evaluate(args) -> int:
    tariffs = [_parse_tariff(t) for t in args.tariff]
    if len({name for name, _ in tariffs}) != len(tariffs):
        raise UsageError("tariff names must be distinct")
    in_time = sio.read_dataset(args.in_time)
    out_of_time = sio.read_dataset(args.out_of_time)
    profiles = final_profiles(in_time)
    if set(profiles) != {tl.machine_id for tl in out_of_time.timelines}:
        raise sio.DataError("in-time and out-of-time data must cover the same machines")
    tables = {name: sio.read_price_table(path) for name, path in tariffs}
    durations = {d for _, _, d in tables.values()}
    if len(durations) != 1:
        raise sio.DataError("all price tables must share one contract duration")
    duration = durations.pop()
    starts = None
    if args.protocol == "continuation":
        starts = {tl.machine_id: tl.observation_length for tl in in_time.timelines}
    outcomes = contract_outcomes(out_of_time, duration, start_times=starts, profiles=profiles)
    prices, maint = {}, {}
    for name, (table, mterm, _) in tables.items():
        try:
            prices[name] = [table[o.profile.as_tuple()] for o in outcomes]
            maint[name] = [mterm[o.profile.as_tuple()] for o in outcomes]
        except KeyError as exc:
            raise sio.DataError(f"tariff {name} has no price for profile {exc.args[0]}") from None
    report = build_report(outcomes, prices, args.bins, maintenance_premium=maint, pm_interval=args.pm_interval,
                          meta={"in_time": args.in_time, "out_of_time": args.out_of_time,
                                "tariffs": dict(tariffs), "protocol": args.protocol})
    text = report.to_json() + "\n"
    sio.atomic_write_text(args.out, text)
    sio.write_manifest(args.out, text, command="evaluate", tariffs=dict(tariffs), protocol=args.protocol)
    if args.plot_dir:
        _write_plot_points(Path(args.plot_dir), report)
    for name in prices:
        log.info("tariff %s: loss ratio %.4f, gini %.4f", name, report.loss_ratio(name), report.gini(name))
    return EXIT_OK


def _points_csv(header: str, rows) -> str:
    return header + "\n" + "".join(",".join(repr(float(v)) for v in row) + "\n" for row in rows)


def _write_plot_points(directory: Path, report) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, t in report.tariffs.items():
        sio.atomic_write_text(directory / f"lorenz_{name}.csv", _points_csv("population_share,cost_share", t["lorenz"]))
        sio.atomic_write_text(directory / f"quantile_{name}.csv", _points_csv("avg_price,avg_cost", t["quantile_bins"]))
        sio.atomic_write_text(directory / f"loss_ratio_{name}.csv",
                              _points_csv("time,loss_ratio", t["loss_ratio_series"]))
    for pair, o in report.ordered.items():
        sio.atomic_write_text(directory / f"ordered_lorenz_{pair}.csv", _points_csv("premium_share,cost_share",
                                                                                     o["points"]))


def cmd_recover(args) -> int:
    if args.replications < 2:
        raise UsageError("--replications must be at least 2")
    cfg = sio.load_run_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    summary = run_recovery(cfg.params, args.replications, cfg.n, cfg.t_obs, seed, cfg.plan)
    text = sio.dumps_json(summary.to_dict())
    sio.atomic_write_text(args.out, text)
    sio.write_manifest(args.out, text, command="recover", seed=seed, replications=args.replications,
                       params=sio.params_to_dict(cfg.params))
    if summary.failed:
        log.warning("%d of %d replications excluded", summary.failed, summary.replications)
    if summary.succeeded == 0:
        raise NonConvergence("every replication failed")
    for p in summary.parameters:
        log.info("%-14s truth %9.4f mean %9.4f sd %8.4f coverage %.2f", p.name, p.truth, p.mean, p.std, p.coverage)
    return EXIT_OK


def _parse_law(text: str) -> ObservationLaw:
    return ObservationLaw.parse(text)


# -- parser -------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="servipricer", description="Simulate, calibrate and price full-service contracts.")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a portfolio to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--t-obs", default=None, help="override the observation law (fixed:T, uniform:LO:HI, mixed:P:LO:HI)")
    p.add_argument("--profiles-from", default=None,
                   help="simulate the machines of this dataset, starting from their final x2")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit all model blocks to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--plan", choices=("a", "b", "c"), default="c")
    p.add_argument("--pm-interval", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("price", help="break-even prices for all 32 profiles")
    p.add_argument("--params", required=True, help="run config or calibration report")
    p.add_argument("--plan", choices=("a", "b", "c"), default="c")
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--paths", type=int, default=DEFAULT_PATHS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("evaluate", help="out-of-time evaluation of one or more tariffs")
    p.add_argument("--in-time", required=True)
    p.add_argument("--out-of-time", required=True)
    p.add_argument("--tariff", action="append", required=True, help="NAME=PRICE_TABLE.csv, repeatable")
    p.add_argument("--protocol", choices=("fresh", "continuation"), default="fresh")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--pm-interval", type=float, default=1.0)
    p.add_argument("--plot-dir", default=None, help="also write plot-point CSVs here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recover", help="repeated simulate-and-calibrate parameter recovery study")
    p.add_argument("--config", required=True)
    p.add_argument("--replications", type=int, default=25)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except sio.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
