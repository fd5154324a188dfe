#    Copyright (C) 2026  The clickshield developers
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
"""
Command line interface of clickshield.

    clickshield serve --config clickshield.toml
    clickshield simulate nat --pool 5538048 --users 28870000 --clickers 28870 --runs 1000 --seed 42
    clickshield simulate attack --clicks 40 --pool 256 --threshold 0.01 --seed 7
    clickshield eval-model --pool 5538048 --clicks 28870
    clickshield replay --log decisions.jsonl --config clickshield.toml

Exit codes: 0 success, 1 runtime failure or replay divergence, 2 usage error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ..config import ServiceConfig, load_service_config
from ..exceptions import ClickShieldException, ConfigError, ModelDomainError
from ..filter_engine import EngineConfig
from ..ingest_service import replay_log, serve
from ..net_registry import Registry, load_registry_file, single_net_registry
from ..poisson_model import (
    ModelParams,
    expected_repeats,
    lambda_of,
    loss_factor,
    loss_upper_bound,
    max_discardable_clicks,
    should_discard_repeat,
)
from ..shield_constants import ShieldConstants
from ..traffic_simulator import (
    AttackScenario,
    NatScenario,
    compare_with_model,
    run_attack_scenario,
    run_nat_scenario,
    write_attack_report_json,
    write_attack_trace_csv,
    write_sim_report_json,
    write_sim_runs_csv,
)

logger = logging.getLogger("clickshield")


def _add_service_options(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML or INI file with a [clickshield] section")
    p.add_argument("--registry", dest="registry_path", help="registry file (CIDR,net_id[,pool_size])")
    p.add_argument("--window", dest="window_seconds", type=float, help="statistics window T in seconds")
    p.add_argument("--threshold", type=float, help="loss budget in (0, 1)")
    p.add_argument("--fallback-pool", dest="fallback_pool_size", type=int, help="pool size of unregistered addresses")
    p.add_argument("--ledger-capacity", type=int, help="maximum clicks held in the window")


def _service_config(args) -> ServiceConfig:
    keys = (
        "listen_address",
        "registry_path",
        "window_seconds",
        "threshold",
        "fallback_pool_size",
        "decision_log_path",
        "ledger_capacity",
        "max_clock_skew_seconds",
    )
    overrides = {k: getattr(args, k, None) for k in keys}
    return load_service_config(args.config, overrides=overrides)


def cmd_serve(args, parser) -> int:
    try:
        config = _service_config(args)
    except ConfigError as msg:
        parser.error(str(msg))
    try:
        serve(config)
    except (ClickShieldException, OSError) as msg:
        logger.error("Startup failed: %s", msg)
        print("ERROR: %s" % msg, file=sys.stderr)
        return 1
    return 0


def cmd_replay(args, parser) -> int:
    try:
        config = _service_config(args)
    except ConfigError as msg:
        parser.error(str(msg))
    try:
        if config.registry_path is not None:
            registry = load_registry_file(config.registry_path, config.fallback_pool_size)
        else:
            registry = Registry(fallback_pool_size=config.fallback_pool_size)
        result = replay_log(args.log, config.engine_config(), registry)
    except (ClickShieldException, OSError) as msg:
        print("ERROR: %s" % msg, file=sys.stderr)
        return 1

    print("records checked: %i" % result.records_checked)
    print("divergences:     %i" % result.divergences)
    if result.first_divergence is not None:
        d = result.first_divergence
        print("first divergence at seq %i" % d.seq)
        print("  recorded: %s" % d.recorded)
        print("  replayed: %s" % d.replayed)
        return 1
    print("verified")
    return 0


def cmd_simulate_nat(args, parser) -> int:
    try:
        scenario = NatScenario(
            pool_size=args.pool,
            user_count=args.users,
            clicker_count=args.clickers,
            runs=args.runs,
            seed=args.seed,
            materialize_users=args.materialize_users,
        )
    except ModelDomainError as msg:
        parser.error(str(msg))
    report = run_nat_scenario(scenario, workers=args.workers)
    comparison = compare_with_model(report, args.tolerance)

    print("runs:                    %i" % report.runs_completed)
    print("mean repeated fraction:  %.4e (std error %.2e)" % (report.mean_repeated_fraction, report.std_error))
    print("exact expectation:       %.4e" % report.exact_expectation)
    print("model loss factor L:     %.4e" % report.model_loss_factor)
    print("bound 0.5*C/A:           %.4e" % report.model_upper_bound)
    print("|mean - 0.5*C/A|:        %.4e (%s tolerance %.1e)" % (
        comparison.abs_difference,
        "within" if comparison.within_tolerance else "outside",
        args.tolerance,
    ))
    print("address fraction (2+):   %.4e (model %.4e)" % (report.mean_address_fraction, report.model_address_fraction))
    if (
        scenario.pool_size == ShieldConstants.REF_POOL_SIZE
        and scenario.clicker_count == ShieldConstants.REF_CLICKER_COUNT
    ):
        print("reference simulation:    %.4e (difference to bound %.4e)" % (
            ShieldConstants.REF_SIMULATED_FRACTION,
            ShieldConstants.REF_DIFFERENCE,
        ))

    if args.json:
        write_sim_report_json(report, args.json)
    if args.csv:
        write_sim_runs_csv(report, args.csv)
    return 0


def cmd_simulate_attack(args, parser) -> int:
    try:
        scenario = AttackScenario(
            attacker_ip=args.attacker_ip,
            dest=args.dest,
            n_clicks=args.clicks,
            mean_interval_seconds=args.interval,
            interval_jitter=args.jitter,
            background_rate=args.background_rate,
            seed=args.seed,
        )
        config = EngineConfig(window_seconds=args.window, threshold=args.threshold)
        registry = single_net_registry(scenario.attacker_ip, args.pool, args.prefix_len)
    except (ClickShieldException, ValueError) as msg:
        parser.error(str(msg))
    report = run_attack_scenario(scenario, config, registry)

    print("clicks:              %i attack, %i total" % (scenario.n_clicks, len(report.trace)))
    print("accepted:            %i" % report.accepted)
    print("discarded:           %i" % report.discarded)
    print("attacker accepted:   %i" % report.attacker_accepted)
    print("attacker discarded:  %i" % report.attacker_discarded)
    print("reference observed:  %i counted / %i invalid on a live ad network" % (
        ShieldConstants.REF_ATTACK_COUNTED,
        ShieldConstants.REF_ATTACK_DISCARDED,
    ))

    if args.json:
        write_attack_report_json(report, args.json)
    if args.csv:
        write_attack_trace_csv(report, args.csv)
    return 0


def _click_list(text: str) -> List[int]:
    try:
        return [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma separated integers, got %r" % text)


def cmd_eval_model(args, parser) -> int:
    if not args.clicks:
        parser.error("--clicks needs at least one value")
    rows = []
    try:
        for c in args.clicks:
            if c < 1:
                raise ModelDomainError("clicks must be >= 1, loss is undefined for %i" % c)
            rows.append(ModelParams(args.pool, c))
        if args.threshold is not None:
            c_max = max_discardable_clicks(args.pool, args.threshold)
    except ModelDomainError as msg:
        parser.error(str(msg))

    header = "%10s %10s %12s %12s %12s %12s %12s" % (
        "A", "C", "lambda", "N", "L", "0.5*C/A", "|L-0.5*C/A|"
    )
    if args.threshold is not None:
        header += " %8s" % "discard"
    print(header)
    for params in rows:
        lam = lambda_of(params)
        lf = loss_factor(params)
        bound = loss_upper_bound(params)
        line = "%10i %10i %12.5e %12.5e %12.5e %12.5e %12.5e" % (
            params.pool_size,
            params.click_count,
            lam.value,
            expected_repeats(lam),
            lf,
            bound,
            abs(lf - bound),
        )
        if args.threshold is not None:
            line += " %8s" % ("yes" if should_discard_repeat(params, args.threshold) else "no")
        print(line)
    if args.threshold is not None:
        print("repeats are discarded while C <= %i (threshold %g)" % (c_max, args.threshold))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clickshield", description="NAT aware click spam filter for pay-per-click accounting."
    )
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    parser.add_argument("--debug", action="store_true", help="same as --log-level DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP ingestion service")
    _add_service_options(p)
    p.add_argument("--listen", dest="listen_address", help="host:port")
    p.add_argument("--decision-log", dest="decision_log_path", help="JSON lines decision log, 'none' disables")
    p.add_argument("--max-skew", dest="max_clock_skew_seconds", type=float, help="accepted client clock skew in seconds, inf disables")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="verify a decision log against a fresh engine")
    _add_service_options(p)
    p.add_argument("--log", required=True, help="decision log to replay")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("eval-model", help="print the repeated click model for A and C")
    p.add_argument("--pool", type=int, required=True, help="address pool size A")
    p.add_argument("--clicks", type=_click_list, required=True, help="click count C, comma separated for a sweep")
    p.add_argument("--threshold", type=float, help="also show the discard verdict")
    p.set_defaults(func=cmd_eval_model)

    p = sub.add_parser("simulate", help="Monte Carlo simulations")
    sim = p.add_subparsers(dest="scenario", required=True)

    n = sim.add_parser("nat", help="repeated clicks from a NAT address pool")
    n.add_argument("--pool", type=int, required=True)
    n.add_argument("--users", type=int, required=True)
    n.add_argument("--clickers", type=int, required=True)
    n.add_argument("--runs", type=int, default=1000)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--workers", type=int, default=1)
    n.add_argument("--materialize-users", action="store_true", help="sample the full user table (small pools only)")
    n.add_argument("--tolerance", type=float, default=1.5e-4, help="allowed |mean - 0.5*C/A|")
    n.add_argument("--json", help="write the report as JSON")
    n.add_argument("--csv", help="write one row per run as CSV")
    n.set_defaults(func=cmd_simulate_nat)

    a = sim.add_parser("attack", help="single address click spam against the filter")
    a.add_argument("--clicks", type=int, required=True)
    a.add_argument("--pool", type=int, required=True, help="pool size A of the attacker's net")
    a.add_argument("--threshold", type=float, default=ShieldConstants.DEFAULT_THRESHOLD)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--window", type=float, default=1e9, help="statistics window T in seconds")
    a.add_argument("--interval", type=float, default=ShieldConstants.DEFAULT_ATTACK_INTERVAL, help="mean seconds between attack clicks")
    a.add_argument("--jitter", type=float, default=ShieldConstants.DEFAULT_ATTACK_JITTER, help="0 regular, 1 exponential intervals")
    a.add_argument("--background-rate", type=float, default=0.0, help="benign clicks per second from the same net")
    a.add_argument("--attacker-ip", default="198.51.100.7")
    a.add_argument("--prefix-len", type=int, default=ShieldConstants.DEFAULT_ATTACK_PREFIX_LEN)
    a.add_argument("--dest", default="/landing")
    a.add_argument("--json", help="write the report with its trace as JSON")
    a.add_argument("--csv", help="write the decision trace as CSV")
    a.set_defaults(func=cmd_simulate_attack)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = logging.DEBUG if args.debug else getattr(logging, args.log_level.upper(), None)
        if not isinstance(level, int):
            parser.error("unknown log level %r" % args.log_level)
        logging.basicConfig(
            level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )
        return args.func(args, parser)
    except SystemExit as exc:
        # argparse reports usage errors by exiting with status 2
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
