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
traffic_simulator.py - Monte Carlo validation of the repeated click model
and synthetic attack traffic against the filter engine.

NAT scenario: users get uniformly random addresses from a pool of A
addresses, C distinct users click once each, and the repeated click fraction
(C - distinct addresses hit) / C is compared with the loss factor and its
bound 0.5 * C/A. Since the clickers are distinct users with i.i.d. uniform
addresses, the clicked addresses are themselves i.i.d. uniform, so the
default path samples C addresses per run directly. materialize_users keeps
the full user table for small instances.

Random numbers come from numpy's PCG64. Runs are grouped in blocks whose
size depends only on the scenario, block b draws from
SeedSequence(seed, spawn_key=(b,)), so a report is bit identical for a given
scenario and seed however many worker threads execute the blocks.
"""

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import ConfigError, ModelDomainError
from .filter_engine import ClickEvent, Decision, EngineConfig, FilterEngine, Outcome
from .net_registry import Registry, parse_ipv4
from .poisson_model import (
    ModelParams,
    expected_multi_click_fraction,
    lambda_of,
    loss_factor,
    loss_upper_bound,
)
from .shield_constants import ShieldConstants

__all__ = [
    "NatScenario",
    "SimReport",
    "ModelComparison",
    "AttackScenario",
    "AttackStep",
    "AttackReport",
    "expected_repeated_fraction",
    "run_nat_scenario",
    "compare_with_model",
    "generate_attack_events",
    "run_attack_scenario",
    "write_sim_report_json",
    "write_sim_runs_csv",
    "write_attack_report_json",
    "write_attack_trace_csv",
]

logger = logging.getLogger(__name__)

_SEED_LIMIT = 1 << 64


def _check_seed(seed: int):
    if not 0 <= seed < _SEED_LIMIT:
        raise ModelDomainError("seed must be a 64 bit unsigned integer, got %r" % seed)


@dataclass(frozen=True)
class NatScenario:
    """Address pool, user population and clickers of one NAT network."""

    pool_size: int
    user_count: int
    clicker_count: int
    runs: int
    seed: int = 0
    materialize_users: bool = False

    def __post_init__(self):
        for name in ("pool_size", "user_count", "clicker_count", "runs"):
            value = getattr(self, name)
            if value < 1:
                raise ModelDomainError("%s must be >= 1, got %r" % (name, value))
        if self.clicker_count > self.user_count:
            raise ModelDomainError(
                "clicker_count (%i) must not exceed user_count (%i)"
                % (self.clicker_count, self.user_count)
            )
        _check_seed(self.seed)


@dataclass
class SimReport:
    """Aggregate of a NAT scenario run next to the model predictions."""

    mean_repeated_fraction: float
    std_error: float
    model_loss_factor: float
    model_upper_bound: float
    abs_difference: float
    runs_completed: int
    mean_address_fraction: float = 0.0
    model_address_fraction: float = 0.0
    exact_expectation: float = 0.0
    scenario: Optional[NatScenario] = None
    run_fractions: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        d = {
            "mean_repeated_fraction": self.mean_repeated_fraction,
            "std_error": self.std_error,
            "model_loss_factor": self.model_loss_factor,
            "model_upper_bound": self.model_upper_bound,
            "abs_difference": self.abs_difference,
            "runs_completed": self.runs_completed,
            "mean_address_fraction": self.mean_address_fraction,
            "model_address_fraction": self.model_address_fraction,
            "exact_expectation": self.exact_expectation,
        }
        if self.scenario is not None:
            d["scenario"] = {
                "pool_size": self.scenario.pool_size,
                "user_count": self.scenario.user_count,
                "clicker_count": self.scenario.clicker_count,
                "runs": self.scenario.runs,
                "seed": self.scenario.seed,
                "materialize_users": self.scenario.materialize_users,
            }
        return d


@dataclass(frozen=True)
class ModelComparison:
    abs_difference: float
    within_tolerance: bool


def expected_repeated_fraction(pool_size: int, clicker_count: int) -> float:
    """Exact mean repeated click fraction for C i.i.d. uniform clicks over A
    addresses, 1 - A * (1 - (1 - 1/A)**C) / C."""
    if pool_size < 1 or clicker_count < 1:
        raise ModelDomainError("pool_size and clicker_count must be >= 1")
    if pool_size == 1:
        return 1.0 - 1.0 / clicker_count
    # A * (1 - (1-1/A)^C) without losing digits for large A
    distinct = -pool_size * math.expm1(clicker_count * math.log1p(-1.0 / pool_size))
    return 1.0 - distinct / clicker_count


def _block_layout(scenario: NatScenario) -> List[Tuple[int, int]]:
    """(block_index, runs in block) covering all runs of the scenario."""
    per_run = scenario.user_count if scenario.materialize_users else scenario.clicker_count
    per_block = max(
        1, min(ShieldConstants.SIM_MAX_BLOCK_RUNS, ShieldConstants.SIM_BLOCK_SAMPLES // per_run)
    )
    blocks = []
    done = 0
    index = 0
    while done < scenario.runs:
        n = min(per_block, scenario.runs - done)
        blocks.append((index, n))
        done += n
        index += 1
    return blocks


def _block_rng(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(block_index,)))
    )


def _collision_stats(addresses: np.ndarray, pool_size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per row repeated click fraction and fraction of addresses hit twice or
    more, for a (runs, clicks) array of clicked addresses."""
    clicks = addresses.shape[1]
    s = np.sort(addresses, axis=1)
    same = s[:, 1:] == s[:, :-1]
    # clicks minus distinct addresses = number of equal neighbours after sorting
    repeats = same.sum(axis=1)
    # an address with 2+ clicks starts a run of equal neighbours
    starts = same.copy()
    starts[:, 1:] &= ~same[:, :-1]
    multi = starts.sum(axis=1)
    return repeats / clicks, multi / pool_size


def _run_block(scenario: NatScenario, block_index: int, n_runs: int):
    rng = _block_rng(scenario.seed, block_index)
    a, c = scenario.pool_size, scenario.clicker_count
    if scenario.materialize_users:
        addresses = np.empty((n_runs, c), dtype=np.int64)
        for i in range(n_runs):
            user_addresses = rng.integers(0, a, size=scenario.user_count, dtype=np.int64)
            clickers = rng.choice(scenario.user_count, size=c, replace=False)
            addresses[i] = user_addresses[clickers]
    else:
        addresses = rng.integers(0, a, size=(n_runs, c), dtype=np.int64)
    return _collision_stats(addresses, a)


def run_nat_scenario(scenario: NatScenario, workers: int = 1) -> SimReport:
    """Runs the NAT collision experiment.

    Args:
        scenario: Pool, users, clickers, runs and seed.
        workers: Number of threads sampling blocks in parallel. The result
            does not depend on it.

    Returns:
        SimReport: Mean and standard error of the repeated click fraction
            with the model's loss factor and bound for the same A and C.
    """
    blocks = _block_layout(scenario)
    logger.info(
        "NAT scenario A=%i users=%i C=%i: %i runs in %i blocks",
        scenario.pool_size,
        scenario.user_count,
        scenario.clicker_count,
        scenario.runs,
        len(blocks),
    )

    def _job(block):
        result = _run_block(scenario, *block)
        logger.debug("block %i done (%i runs)", block[0], block[1])
        return result

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map yields in submission order, the reduction stays deterministic
            results = list(pool.map(_job, blocks))
    else:
        results = [_job(block) for block in blocks]

    fractions = np.concatenate([r[0] for r in results])
    address_fractions = np.concatenate([r[1] for r in results])
    runs = fractions.size

    mean = float(fractions.mean())
    std_error = float(fractions.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    params = ModelParams(scenario.pool_size, scenario.clicker_count)
    upper = loss_upper_bound(params)
    return SimReport(
        mean_repeated_fraction=mean,
        std_error=std_error,
        model_loss_factor=loss_factor(params),
        model_upper_bound=upper,
        abs_difference=abs(mean - upper),
        runs_completed=runs,
        mean_address_fraction=float(address_fractions.mean()),
        model_address_fraction=expected_multi_click_fraction(lambda_of(params)),
        exact_expectation=expected_repeated_fraction(
            scenario.pool_size, scenario.clicker_count
        ),
        scenario=scenario,
        run_fractions=fractions,
    )


def compare_with_model(report: SimReport, tolerance: float) -> ModelComparison:
    """Distance between the simulated mean and the 0.5 * C/A bound."""
    diff = abs(report.mean_repeated_fraction - report.model_upper_bound)
    return ModelComparison(abs_difference=diff, within_tolerance=diff <= tolerance)


@dataclass(frozen=True)
class AttackScenario:
    """Repeated clicks from one address, optionally hidden in benign clicks
    from other hosts of the same net.

    Intervals between attack clicks are
    mean_interval_seconds * ((1 - interval_jitter) + interval_jitter * E)
    with E ~ Exp(1): jitter 1 gives exponential gaps, jitter 0 a fixed period.
    """

    attacker_ip: IPv4Address
    dest: str = "/landing"
    n_clicks: int = 40
    mean_interval_seconds: float = ShieldConstants.DEFAULT_ATTACK_INTERVAL
    interval_jitter: float = ShieldConstants.DEFAULT_ATTACK_JITTER
    background_rate: float = 0.0
    seed: int = 0
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "attacker_ip", parse_ipv4(self.attacker_ip))
        if self.n_clicks < 1:
            raise ModelDomainError("n_clicks must be >= 1, got %r" % self.n_clicks)
        if not self.mean_interval_seconds > 0:
            raise ModelDomainError("mean_interval_seconds must be > 0")
        if not 0.0 <= self.interval_jitter <= 1.0:
            raise ModelDomainError("interval_jitter must be in [0, 1]")
        if self.background_rate < 0:
            raise ModelDomainError("background_rate must be >= 0")
        if not self.dest:
            raise ModelDomainError("dest must not be empty")
        _check_seed(self.seed)


@dataclass(frozen=True)
class AttackStep:
    click: ClickEvent
    decision: Decision
    from_attacker: bool


@dataclass
class AttackReport:
    scenario: AttackScenario
    accepted: int
    discarded: int
    attacker_accepted: int
    attacker_discarded: int
    trace: List[AttackStep] = field(default_factory=list, repr=False)

    def to_dict(self, include_trace: bool = False) -> Dict[str, Any]:
        d = {
            "attacker_ip": str(self.scenario.attacker_ip),
            "dest": self.scenario.dest,
            "n_clicks": self.scenario.n_clicks,
            "seed": self.scenario.seed,
            "accepted": self.accepted,
            "discarded": self.discarded,
            "attacker_accepted": self.attacker_accepted,
            "attacker_discarded": self.attacker_discarded,
            "reference_observed": {
                "counted": ShieldConstants.REF_ATTACK_COUNTED,
                "discarded": ShieldConstants.REF_ATTACK_DISCARDED,
            },
        }
        if include_trace:
            d["trace"] = [_step_row(i, step) for i, step in enumerate(self.trace)]
        return d


def _host_sampler(network: IPv4Network, attacker: IPv4Address):
    base = int(network.network_address)
    size = network.num_addresses
    skip = int(attacker) - base

    def sample(rng: np.random.Generator, n: int) -> List[IPv4Address]:
        # draw from the size-1 other hosts by stepping over the attacker
        offsets = rng.integers(0, size - 1, size=n)
        offsets = offsets + (offsets >= skip)
        return [IPv4Address(base + int(o)) for o in offsets]

    return sample


def generate_attack_events(
    scenario: AttackScenario, registry: Registry
) -> List[Tuple[ClickEvent, bool]]:
    """Synthesizes the attack stream and its background in timestamp order.

    Returns:
        list: (click, from_attacker) pairs sorted by click time, attack clicks
            first on equal times.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(scenario.seed)))
    jitter = scenario.interval_jitter
    gaps = scenario.mean_interval_seconds * (
        (1.0 - jitter) + jitter * rng.standard_exponential(scenario.n_clicks - 1)
    )
    times = scenario.start_time + np.concatenate(([0.0], np.cumsum(gaps)))
    events = [
        (ClickEvent(scenario.attacker_ip, scenario.dest, float(t)), True) for t in times
    ]

    horizon = float(times[-1] - scenario.start_time)
    if scenario.background_rate > 0 and horizon > 0:
        network = registry.lookup_net(scenario.attacker_ip).network
        if network.num_addresses < 2:
            logger.warning("Net of %s has no other hosts, no background", scenario.attacker_ip)
        else:
            n = int(rng.poisson(scenario.background_rate * horizon))
            bg_times = np.sort(rng.uniform(scenario.start_time, float(times[-1]), size=n))
            sources = _host_sampler(network, scenario.attacker_ip)(rng, n)
            events.extend(
                (ClickEvent(src, scenario.dest, float(t)), False)
                for src, t in zip(sources, bg_times)
            )
    # stable sort keeps attack clicks ahead of background clicks at equal times
    events.sort(key=lambda e: e[0].time)
    return events


def run_attack_scenario(
    scenario: AttackScenario, config: EngineConfig, registry: Registry
) -> AttackReport:
    """Feeds a synthetic attack through a fresh filter engine.

    Raises:
        ConfigError: If the registry has no range for the attacker address.
    """
    if not registry.contains(scenario.attacker_ip):
        raise ConfigError("Registry has no range containing %s" % scenario.attacker_ip)

    engine = FilterEngine(registry, config)
    report = AttackReport(scenario, 0, 0, 0, 0)
    for click, from_attacker in generate_attack_events(scenario, registry):
        decision = engine.handle_click(click)
        accepted = decision.outcome is Outcome.ACCEPT
        if accepted:
            report.accepted += 1
        else:
            report.discarded += 1
        if from_attacker:
            if accepted:
                report.attacker_accepted += 1
            else:
                report.attacker_discarded += 1
        report.trace.append(AttackStep(click, decision, from_attacker))

    logger.info(
        "Attack from %s: %i accepted, %i discarded",
        scenario.attacker_ip,
        report.attacker_accepted,
        report.attacker_discarded,
    )
    return report


def _step_row(index: int, step: AttackStep) -> Dict[str, Any]:
    row = {
        "index": index,
        "time": step.click.time,
        "source": str(step.click.source),
        "dest": step.click.dest,
        "from_attacker": step.from_attacker,
    }
    row.update(step.decision.to_dict())
    return row


def write_sim_report_json(report: SimReport, filename: str) -> str:
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")
    return filename


def write_sim_runs_csv(report: SimReport, filename: str) -> str:
    """One row per run: run_index, repeated_fraction."""
    with open(filename, "w", newline="", encoding="utf-8") as csvfile:
        csvwriter = csv.writer(csvfile)
        csvwriter.writerow(["run_index", "repeated_fraction"])
        for run_index, fraction in enumerate(report.run_fractions):
            csvwriter.writerow([run_index, repr(float(fraction))])
    return filename


def write_attack_report_json(report: AttackReport, filename: str) -> str:
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(include_trace=True), f, indent=2)
        f.write("\n")
    return filename


def write_attack_trace_csv(report: AttackReport, filename: str) -> str:
    header = [
        "index",
        "time",
        "source",
        "dest",
        "from_attacker",
        "outcome",
        "reason",
        "observed_c",
        "pool_size",
        "loss_bound",
        "net_id",
    ]
    with open(filename, "w", newline="", encoding="utf-8") as csvfile:
        csvwriter = csv.DictWriter(csvfile, fieldnames=header)
        csvwriter.writeheader()
        for index, step in enumerate(report.trace):
            csvwriter.writerow(_step_row(index, step))
    return filename
