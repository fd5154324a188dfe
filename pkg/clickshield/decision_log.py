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
decision_log.py - Append-only JSON lines audit log of click decisions.

Every decision becomes one DecisionRecord line. Records are written by a
single background thread in submission order, callers wait for their record
to be flushed before answering the client. The number of records in flight
is bounded, a full log refuses new clicks with LogBackPressure.
"""

import itertools
import json
import logging
import os
import queue
import threading
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterator, Optional

from .exceptions import DecisionLogCorruptError, DecisionLogError, LogBackPressure
from .filter_engine import ClickEvent, Decision, Outcome, Reason
from .shield_constants import ShieldConstants

__all__ = ["DecisionRecord", "DecisionLog", "PendingWrite", "read_decision_log"]

logger = logging.getLogger(__name__)

_BATCH = 512


@dataclass(frozen=True)
class DecisionRecord:
    """A click, the decision taken for it and its position in the log."""

    seq: int
    source: str
    dest: str
    time: float
    outcome: str
    reason: str
    observed_c: int
    pool_size: int
    loss_bound: float
    net_id: str

    @classmethod
    def from_decision(
        cls, seq: int, click: ClickEvent, decision: Decision
    ) -> "DecisionRecord":
        return cls(
            seq=seq,
            source=str(click.source),
            dest=click.dest,
            time=click.time,
            outcome=decision.outcome.value,
            reason=decision.reason.value,
            observed_c=decision.observed_c,
            pool_size=decision.pool_size,
            loss_bound=decision.loss_bound,
            net_id=decision.net_id,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any], line_no: Optional[int] = None):
        seq = data.get("seq") if isinstance(data, dict) else None
        try:
            record = cls(
                seq=int(data["seq"]),
                source=str(data["source"]),
                dest=str(data["dest"]),
                time=float(data["time"]),
                outcome=Outcome(data["outcome"]).value,
                reason=Reason(data["reason"]).value,
                observed_c=int(data["observed_c"]),
                pool_size=int(data["pool_size"]),
                loss_bound=float(data["loss_bound"]),
                net_id=str(data["net_id"]),
            )
        except (KeyError, TypeError, ValueError) as msg:
            raise DecisionLogCorruptError(
                "Malformed decision record: %s" % msg,
                seq if isinstance(seq, int) else None,
                line_no,
            )
        return record

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def click(self) -> ClickEvent:
        return ClickEvent(self.source, self.dest, self.time)

    def decision(self) -> Decision:
        return Decision(
            Outcome(self.outcome),
            Reason(self.reason),
            self.observed_c,
            self.pool_size,
            self.loss_bound,
            self.net_id,
        )


class PendingWrite:
    """Handle of a submitted record, wait() returns once it is on disk."""

    def __init__(self, record: DecisionRecord):
        self.record = record
        self.error: Optional[BaseException] = None
        self._done = threading.Event()

    def _finish(self, error: Optional[BaseException] = None):
        self.error = error
        self._done.set()

    def wait(self, timeout: Optional[float] = None):
        if not self._done.wait(timeout):
            raise DecisionLogError("Timed out writing record %i" % self.record.seq)
        if self.error is not None:
            raise DecisionLogError(
                "Could not write record %i: %s" % (self.record.seq, self.error)
            )


def _rotate(path: str):
    """Moves a non-empty log out of the way so one file holds one run."""
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return
    for n in itertools.count(1):
        target = "%s.%i" % (path, n)
        if not os.path.exists(target):
            os.rename(path, target)
            logger.info("Rotated previous decision log to %s", target)
            return


class DecisionLog:
    """Single writer decision log.

    Usage: reserve() a slot before deciding, then submit() the decision while
    still holding the lock that ordered it, and wait() on the returned handle.
    A reservation that ends without a decision must be release()d.

    Args:
        path (str): Log file, an existing non-empty file is rotated to
            path.1, path.2, ...
        queue_size (int): Maximum number of records reserved or in flight.
    """

    def __init__(self, path: str, queue_size: int = ShieldConstants.DEFAULT_LOG_QUEUE_SIZE):
        self.path = path
        self._slots = threading.BoundedSemaphore(queue_size)
        self._queue: "queue.Queue[Optional[PendingWrite]]" = queue.Queue()
        self._seq = itertools.count(1)
        self._failed: Optional[BaseException] = None
        try:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            _rotate(path)
            self._file = open(path, "a", encoding="utf-8")
        except OSError as msg:
            raise DecisionLogError("Could not open decision log %s: %s" % (path, msg))
        self._thread = threading.Thread(
            target=self._run, name="decision-log-writer", daemon=True
        )
        self._thread.start()

    def reserve(self):
        """Claims room for one record.

        Raises:
            LogBackPressure: If queue_size records are already pending.
            DecisionLogError: If the writer has failed.
        """
        if self._failed is not None:
            raise DecisionLogError("Decision log unavailable: %s" % self._failed)
        if not self._slots.acquire(blocking=False):
            raise LogBackPressure("Decision log queue full")

    def release(self):
        self._slots.release()

    def submit(self, click: ClickEvent, decision: Decision) -> PendingWrite:
        """Queues the record of a decision, the caller must hold a reservation."""
        pending = PendingWrite(DecisionRecord.from_decision(next(self._seq), click, decision))
        self._queue.put(pending)
        return pending

    def _run(self):
        while True:
            item = self._queue.get()
            if item is None:
                break
            batch = [item]
            stop = False
            while len(batch) < _BATCH:
                try:
                    nxt = self._queue.get_nowait()
                except queue.Empty:
                    break
                if nxt is None:
                    stop = True
                    break
                batch.append(nxt)
            self._write(batch)
            if stop:
                break

    def _write(self, batch):
        error = self._failed
        if error is None:
            try:
                self._file.write("".join(p.record.to_json() + "\n" for p in batch))
                self._file.flush()
            except (OSError, ValueError) as msg:
                logger.error("Writing decision log %s failed: %s", self.path, msg)
                self._failed = error = msg
        for pending in batch:
            # free the slot first, a woken caller may reserve again at once
            self._slots.release()
            pending._finish(error)

    def close(self):
        """Flushes pending records and stops the writer."""
        self._queue.put(None)
        self._thread.join()
        self._file.close()


def read_decision_log(path: str) -> Iterator[DecisionRecord]:
    """Parses a decision log.

    Raises:
        DecisionLogCorruptError: On undecodable lines, malformed records or
            sequence numbers that do not strictly increase.
    """
    last_seq = None
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                data = json.loads(text)
            except ValueError as msg:
                raise DecisionLogCorruptError(
                    "Undecodable line: %s" % msg,
                    None if last_seq is None else last_seq + 1,
                    line_no,
                )
            if not isinstance(data, dict):
                raise DecisionLogCorruptError("Line is not a JSON object", None, line_no)
            record = DecisionRecord.from_dict(data, line_no)
            if last_seq is not None and record.seq <= last_seq:
                raise DecisionLogCorruptError(
                    "Sequence number not increasing after %i" % last_seq,
                    record.seq,
                    line_no,
                )
            last_seq = record.seq
            yield record
