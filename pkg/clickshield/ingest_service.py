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
ingest_service.py - HTTP ingestion of clicks on the billing path, and replay
of decision logs.

Endpoints::

    POST /clicks          {"source": "1.2.3.4", "dest": "/landing", "time": 12.5}
    GET  /counters        {"/landing": 1}
    POST /counters/reset
    GET  /healthz

Each click answered with 200 has exactly one record in the decision log,
written before the response leaves the server. Once a record cannot be
written the service stops taking clicks and answers 503.
"""

import logging
import math
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

from flask import Flask, jsonify, request

from .config import ServiceConfig
from .decision_log import DecisionLog, DecisionRecord, read_decision_log
from .exceptions import (
    DecisionLogError,
    InvalidClickError,
    LedgerCapacityError,
    LogBackPressure,
)
from .filter_engine import ClickEvent, EngineConfig, FilterEngine
from .net_registry import Registry, load_registry_file

__all__ = [
    "IngestService",
    "create_app",
    "build_service",
    "serve",
    "Divergence",
    "ReplayResult",
    "replay_log",
    "replay_records",
]

logger = logging.getLogger(__name__)


class IngestService:
    """Filter engine, decision log and request validation behind the HTTP
    routes. Usable without Flask for embedding and tests.

    Args:
        config (ServiceConfig): Service settings.
        registry (Registry): Network ranges.
        decision_log (Optional[DecisionLog]): Audit log, None disables it.
        clock (Callable[[], float]): Source of server receive times.
    """

    def __init__(
        self,
        config: ServiceConfig,
        registry: Registry,
        decision_log: Optional[DecisionLog] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.config = config
        self.engine = FilterEngine(registry, config.engine_config())
        self.decision_log = decision_log
        self._clock = clock
        # set once a record could not be written, clicks are refused from then on
        self.failure: Optional[str] = None
        # orders decisions and log submissions identically
        self._ingest_lock = threading.Lock()

    def _parse(self, payload: Any) -> ClickEvent:
        now = self._clock()
        click = ClickEvent.from_mapping(payload, default_time=now)
        if isinstance(payload, dict) and payload.get("time") is not None:
            skew = self.config.max_clock_skew_seconds
            if not math.isinf(skew) and abs(click.time - now) > skew:
                raise InvalidClickError(
                    "time %r is more than %gs away from server time" % (click.time, skew)
                )
        return click

    def ingest(self, payload: Any) -> Tuple[int, Dict[str, Any]]:
        """Handles one click request body.

        Returns:
            tuple: (HTTP status, JSON body). 200 carries the decision, 400 a
                malformed click, 503 back-pressure or a failed decision log,
                500 the click whose record could not be written.
        """
        try:
            click = self._parse(payload)
        except ValueError as msg:
            logger.warning("Rejected click: %s", msg)
            return 400, {"error": str(msg)}

        if self.failure is not None:
            return 503, {"error": "Decision log failed: %s" % self.failure}

        log = self.decision_log
        if log is not None:
            try:
                log.reserve()
            except LogBackPressure as msg:
                logger.warning("%s", msg)
                return 503, {"error": str(msg)}
            except DecisionLogError as msg:
                self._fail(msg)
                return 503, {"error": str(msg)}

        pending = None
        try:
            with self._ingest_lock:
                decision = self.engine.handle_click(click)
                if log is not None:
                    pending = log.submit(click, decision)
        except LedgerCapacityError as msg:
            if log is not None:
                log.release()
            return 503, {"error": str(msg)}

        if pending is not None:
            # the writer finishes every submitted record, with or without error
            try:
                pending.wait()
            except DecisionLogError as msg:
                self._fail(msg)
                return 500, {"error": str(msg)}

        body = decision.to_dict()
        if pending is not None:
            body["seq"] = pending.record.seq
        return 200, body

    def _fail(self, error: BaseException):
        if self.failure is None:
            self.failure = str(error)
            logger.error("Decision log failed, refusing clicks: %s", error)

    def counters(self) -> Dict[str, int]:
        return self.engine.counters()

    def reset_counters(self):
        self.engine.reset_counters()

    def health(self) -> Dict[str, Any]:
        return {
            "status": "ok" if self.failure is None else "failed",
            "window_clicks": self.engine.window_size(),
            "ranges": len(self.engine.registry),
            "decision_log": self.decision_log.path if self.decision_log else None,
        }

    def close(self):
        if self.decision_log is not None:
            self.decision_log.close()


def create_app(service: IngestService) -> Flask:
    app = Flask(__name__)

    @app.route("/clicks", methods=["POST"])
    def post_click():
        payload = request.get_json(silent=True)
        if payload is None:
            return jsonify({"error": "body must be a JSON object"}), 400
        status, body = service.ingest(payload)
        return jsonify(body), status

    @app.route("/counters", methods=["GET"])
    def get_counters():
        return jsonify(service.counters())

    @app.route("/counters/reset", methods=["POST"])
    def reset_counters():
        service.reset_counters()
        return jsonify({"status": "reset"})

    @app.route("/healthz", methods=["GET"])
    def healthz():
        health = service.health()
        return jsonify(health), 200 if health["status"] == "ok" else 503

    return app


def build_service(config: ServiceConfig) -> IngestService:
    """Loads the registry and opens the decision log.

    Raises:
        RegistryError: If the registry file is malformed.
        DecisionLogError: If the log cannot be opened.
        OSError: If the registry file cannot be read.
    """
    if config.registry_path is not None:
        registry = load_registry_file(config.registry_path, config.fallback_pool_size)
    else:
        logger.warning("No registry configured, every source is its own net")
        registry = Registry(fallback_pool_size=config.fallback_pool_size)

    decision_log = None
    if config.decision_log_path is not None:
        decision_log = DecisionLog(config.decision_log_path, config.log_queue_size)
    return IngestService(config, registry, decision_log)


def serve(config: ServiceConfig):
    """Runs the ingestion service until interrupted."""
    service = build_service(config)
    host, port = config.host_port()
    app = create_app(service)
    logger.info(
        "Serving on %s:%i (T=%gs, threshold=%g)", host, port, config.window_seconds, config.threshold
    )
    try:
        app.run(host=host, port=port, threaded=True)
    finally:
        service.close()
        logger.info("Service stopped")


@dataclass(frozen=True)
class Divergence:
    seq: int
    recorded: Dict[str, Any]
    replayed: Dict[str, Any]


@dataclass(frozen=True)
class ReplayResult:
    records_checked: int
    divergences: int
    first_divergence: Optional[Divergence] = None

    @property
    def verified(self) -> bool:
        return self.divergences == 0


def replay_records(
    records: Iterable[DecisionRecord], config: EngineConfig, registry: Registry
) -> ReplayResult:
    """Re-decides recorded clicks on a fresh engine and compares decisions."""
    engine = FilterEngine(registry, config)
    checked = 0
    divergences = 0
    first = None
    for record in records:
        checked += 1
        recorded = record.decision().to_dict()
        try:
            replayed = engine.handle_click(record.click()).to_dict()
        except LedgerCapacityError as msg:
            replayed = {"error": str(msg)}
        if replayed != recorded:
            divergences += 1
            if first is None:
                first = Divergence(record.seq, recorded, replayed)
                logger.info("First divergence at seq %i", record.seq)
    return ReplayResult(checked, divergences, first)


def replay_log(path: str, config: EngineConfig, registry: Registry) -> ReplayResult:
    """Replays a decision log file.

    Raises:
        DecisionLogCorruptError: Naming the first unreadable record.
    """
    return replay_records(read_decision_log(path), config, registry)
