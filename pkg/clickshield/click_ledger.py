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
click_ledger.py - Sliding window of accepted clicks (the status table).

Entries are kept in a time ordered heap for eviction and counted in two
multisets, one keyed by (net_id, dest) and one by (source, dest), so every
operation of the click handler is O(log n) or O(1).

The ledger holds no lock, callers serialize access (see FilterEngine).
"""

import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from ipaddress import IPv4Address
from typing import Iterator, List, Optional, Tuple

from .exceptions import ConfigError, InvalidClickError, LedgerCapacityError

__all__ = ["LedgerEntry", "WindowConfig", "ClickLedger"]


@dataclass(frozen=True)
class LedgerEntry:
    """One accepted click. dest is compared byte exact, no URL normalisation."""

    source: IPv4Address
    dest: str
    net_id: str
    time: float

    def __post_init__(self):
        if not self.dest:
            raise InvalidClickError("dest must not be empty")
        if not math.isfinite(self.time) or self.time < 0:
            raise InvalidClickError("time must be finite and >= 0, got %r" % self.time)


@dataclass(frozen=True)
class WindowConfig:
    """Length T of the statistics window in seconds."""

    window_seconds: float

    def __post_init__(self):
        if not self.window_seconds > 0:
            raise ConfigError(
                "window_seconds must be > 0, got %r" % self.window_seconds
            )


class ClickLedger:
    """Multiset of accepted clicks with eviction by time.

    Args:
        capacity (Optional[int]): Maximum number of retained entries, None for
            no bound. record() raises LedgerCapacityError beyond it.
    """

    def __init__(self, capacity: Optional[int] = None):
        if capacity is not None and capacity < 1:
            raise ConfigError("capacity must be >= 1, got %r" % capacity)
        self.capacity = capacity
        # (time, insertion counter, entry), the counter keeps equal times FIFO
        self._heap: List[Tuple[float, int, LedgerEntry]] = []
        self._seq = itertools.count()
        self._net_dest: Counter = Counter()
        self._source_dest: Counter = Counter()

    def __len__(self) -> int:
        return len(self._heap)

    def has_capacity(self) -> bool:
        return self.capacity is None or len(self._heap) < self.capacity

    def evict_before(self, cutoff: float) -> int:
        """Removes every entry with time < cutoff.

        Returns:
            int: Number of removed entries.
        """
        removed = 0
        heap = self._heap
        while heap and heap[0][0] < cutoff:
            _, _, entry = heapq.heappop(heap)
            self._forget(self._net_dest, (entry.net_id, entry.dest))
            self._forget(self._source_dest, (entry.source, entry.dest))
            removed += 1
        return removed

    @staticmethod
    def _forget(counter: Counter, key):
        left = counter[key] - 1
        if left:
            counter[key] = left
        else:
            del counter[key]

    def count_net_dest(self, net_id: str, dest: str) -> int:
        """Number of retained clicks from the net to dest."""
        return self._net_dest.get((net_id, dest), 0)

    def has_prior(self, source: IPv4Address, dest: str) -> bool:
        """True if a retained click from source to dest exists."""
        return (source, dest) in self._source_dest

    def record(self, entry: LedgerEntry):
        """Stores an accepted click. Identical entries are kept as distinct rows.

        Raises:
            LedgerCapacityError: If the ledger is full.
        """
        if not self.has_capacity():
            raise LedgerCapacityError(
                "Ledger full (%i entries), click not recorded" % self.capacity
            )
        heapq.heappush(self._heap, (entry.time, next(self._seq), entry))
        self._net_dest[(entry.net_id, entry.dest)] += 1
        self._source_dest[(entry.source, entry.dest)] += 1

    def entries(self) -> Iterator[LedgerEntry]:
        """Retained entries in time order."""
        for _, _, entry in sorted(self._heap):
            yield entry

