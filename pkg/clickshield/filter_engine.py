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
filter_engine.py - Per click accept/discard decision for a NAT aware
pay-per-click accounting path.

For every click the engine looks up the source's net and pool size A,
evicts history older than the statistics window, counts the prior clicks C
from the net to the same destination and discards the click only if the
same source already clicked that destination and 0.5 * C/A stays below
the configured threshold. Accepted clicks are counted for invoicing and
recorded in the window, discarded ones leave no trace.
"""

import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum
from ipaddress import IPv4Address
from typing import Any, Dict, Mapping, Optional

from .click_ledger import ClickLedger, LedgerEntry, WindowConfig
from .exceptions import (
    ConfigError,
    InvalidClickError,
    LedgerCapacityError,
    ModelDomainError,
)
from .net_registry import Registry, parse_ipv4
from .poisson_model import ModelParams, should_discard_repeat
from .shield_constants import ShieldConstants

__all__ = [
    "Outcome",
    "Reason",
    "ClickEvent",
    "Decision",
    "EngineConfig",
    "ClickCounters",
    "FilterEngine",
]

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    ACCEPT = "ACCEPT"
    DISCARD = "DISCARD"


class Reason(str, Enum):
    FIRST_FROM_SOURCE = "FIRST_FROM_SOURCE"
    REPEAT_BELOW_THRESHOLD_DISCARDED = "REPEAT_BELOW_THRESHOLD_DISCARDED"
    REPEAT_ABOVE_THRESHOLD_ACCEPTED = "REPEAT_ABOVE_THRESHOLD_ACCEPTED"


@dataclass(frozen=True)
class ClickEvent:
    """One incoming click."""

    source: IPv4Address
    dest: str
    time: float

    def __post_init__(self):
        if not isinstance(self.source, IPv4Address):
            object.__setattr__(self, "source", parse_ipv4(self.source))
        if not isinstance(self.dest, str) or not self.dest:
            raise InvalidClickError("dest must be a non-empty string")
        if isinstance(self.time, bool) or not isinstance(self.time, (int, float)):
            raise InvalidClickError("time must be a number, got %r" % (self.time,))
        try:
            time = float(self.time)
        except OverflowError:
            raise InvalidClickError("time out of range, got %r" % (self.time,))
        if not math.isfinite(time) or time < 0:
            raise InvalidClickError("time must be finite and >= 0, got %r" % time)
        object.__setattr__(self, "time", time)

    @classmethod
    def from_mapping(
        cls, data: Mapping[str, Any], default_time: Optional[float] = None
    ) -> "ClickEvent":
        """Builds a click from a decoded JSON object.

        Args:
            data: Mapping with "source", "dest" and optionally "time".
            default_time: Used when "time" is absent.

        Raises:
            InvalidClickError: On missing or malformed fields. Bad addresses
                raise InvalidAddressError, which is a ValueError as well.
        """
        if not isinstance(data, Mapping):
            raise InvalidClickError("click must be a JSON object")
        if "source" not in data or not isinstance(data["source"], str):
            raise InvalidClickError("source must be an IPv4 address string")
        if "dest" not in data:
            raise InvalidClickError("dest is required")
        time = data.get("time")
        if time is None:
            if default_time is None:
                raise InvalidClickError("time is required")
            time = default_time
        return cls(source=parse_ipv4(data["source"]), dest=data["dest"], time=time)


@dataclass(frozen=True)
class Decision:
    """Outcome of one click with the statistics it was based on."""

    outcome: Outcome
    reason: Reason
    observed_c: int
    pool_size: int
    loss_bound: float
    net_id: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "outcome": self.outcome.value,
            "reason": self.reason.value,
            "observed_c": self.observed_c,
            "pool_size": self.pool_size,
            "loss_bound": self.loss_bound,
            "net_id": self.net_id,
        }


@dataclass(frozen=True)
class EngineConfig:
    window_seconds: float
    threshold: float = ShieldConstants.DEFAULT_THRESHOLD
    fallback_pool_size: int = ShieldConstants.DEFAULT_FALLBACK_POOL_SIZE
    ledger_capacity: Optional[int] = None

    def __post_init__(self):
        WindowConfig(self.window_seconds)
        if not 0.0 < self.threshold < 1.0:
            raise ModelDomainError(
                "threshold must be in (0, 1), got %r" % self.threshold
            )
        if self.fallback_pool_size < 1:
            raise ConfigError(
                "fallback_pool_size must be >= 1, got %r" % self.fallback_pool_size
            )
        if self.ledger_capacity is not None and self.ledger_capacity < 1:
            raise ConfigError(
                "ledger_capacity must be >= 1, got %r" % self.ledger_capacity
            )


class ClickCounters:
    """Accepted click counts per destination."""

    def __init__(self):
        self._counts: Dict[str, int] = {}
        self._lock = threading.Lock()

    def increment(self, dest: str):
        with self._lock:
            self._counts[dest] = self._counts.get(dest, 0) + 1

    def get(self, dest: str) -> int:
        with self._lock:
            return self._counts.get(dest, 0)

    def reset(self):
        with self._lock:
            self._counts.clear()

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._counts)


class FilterEngine:
    """Click handler with its statistics window and invoicing counters.

    One lock serializes evict, query, decide and record for every click,
    which covers the per (net, dest) serialization the decision needs.
    The engine can be shared by any number of request handlers.

    Args:
        registry (Registry): Network ranges used to find A for a source.
        config (EngineConfig): Window, threshold, fallback pool size and
            ledger capacity.
    """

    def __init__(self, registry: Registry, config: EngineConfig):
        self.config = config
        self._window = config.window_seconds
        self._registry = self._adopt(registry)
        self._ledger = ClickLedger(capacity=config.ledger_capacity)
        self._counters = ClickCounters()
        self._high_water: Optional[float] = None
        self._lock = threading.Lock()

    def _adopt(self, registry: Registry) -> Registry:
        if registry.fallback_pool_size != self.config.fallback_pool_size:
            registry = registry.with_fallback(self.config.fallback_pool_size)
        return registry

    @property
    def registry(self) -> Registry:
        return self._registry

    def replace_registry(self, registry: Registry):
        """Swaps in a reloaded registry. A click sees either the old or the
        new one, never a mix."""
        registry = self._adopt(registry)
        with self._lock:
            self._registry = registry
        logger.info("Registry replaced, %i ranges", len(registry))

    def handle_click(self, click: ClickEvent) -> Decision:
        """Decides whether click is counted or discarded.

        The eviction cutoff follows the latest click time seen so far, a late
        click is judged against the current window and does not bring back
        evicted history.

        Raises:
            LedgerCapacityError: If an accepted click cannot be recorded. The
                click is then neither counted nor recorded.
        """
        with self._lock:
            net = self._registry.lookup_net(click.source)
            pool_size = net.pool_size

            if self._high_water is None or click.time > self._high_water:
                self._high_water = click.time
            self._ledger.evict_before(self._high_water - self._window)

            observed_c = self._ledger.count_net_dest(net.net_id, click.dest)
            loss_bound = 0.5 * observed_c / pool_size

            if self._ledger.has_prior(click.source, click.dest):
                if should_discard_repeat(
                    ModelParams(pool_size, observed_c), self.config.threshold
                ):
                    decision = Decision(
                        Outcome.DISCARD,
                        Reason.REPEAT_BELOW_THRESHOLD_DISCARDED,
                        observed_c,
                        pool_size,
                        loss_bound,
                        net.net_id,
                    )
                    logger.debug("%s -> %s: %s", click.source, click.dest, decision)
                    return decision
                reason = Reason.REPEAT_ABOVE_THRESHOLD_ACCEPTED
            else:
                reason = Reason.FIRST_FROM_SOURCE

            if not self._ledger.has_capacity():
                logger.warning(
                    "Ledger full, rejecting click %s -> %s", click.source, click.dest
                )
                raise LedgerCapacityError(
                    "Ledger full (%i entries)" % self.config.ledger_capacity
                )
            self._counters.increment(click.dest)
            self._ledger.record(
                LedgerEntry(click.source, click.dest, net.net_id, click.time)
            )
            decision = Decision(
                Outcome.ACCEPT, reason, observed_c, pool_size, loss_bound, net.net_id
            )
            logger.debug("%s -> %s: %s", click.source, click.dest, decision)
            return decision

    def get_counter(self, dest: str) -> int:
        """Accepted clicks for dest since the last reset."""
        return self._counters.get(dest)

    def counters(self) -> Dict[str, int]:
        return self._counters.snapshot()

    def reset_counters(self):
        """Zeroes the invoicing counters. The statistics window is kept."""
        with self._lock:
            self._counters.reset()
        logger.info("Click counters reset")

    def window_size(self) -> int:
        """Number of clicks currently held in the statistics window."""
        with self._lock:
            return len(self._ledger)
