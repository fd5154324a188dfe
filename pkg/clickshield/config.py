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
config.py - Service configuration.

Values are layered, later wins: defaults, a config file (TOML, or INI with a
[clickshield] section), CLICKSHIELD_* environment variables, explicit
overrides from the command line.
"""

import configparser
import logging
import math
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from .compat import tomllib
from .exceptions import ConfigError, ModelDomainError
from .filter_engine import EngineConfig
from .shield_constants import ShieldConstants

__all__ = ["ServiceConfig", "load_service_config"]

logger = logging.getLogger(__name__)

_DISABLED = ("", "none", "off", "disabled", "false")


def _optional_path(value: Any) -> Optional[str]:
    if value is None:
        return None
    value = str(value).strip()
    return None if value.lower() in _DISABLED else value


def _positive_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("expected an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError("expected an integer")
        value = int(value)
    return int(value)


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the ingestion service needs to start.

    max_clock_skew_seconds bounds client supplied click times around the
    server clock, inf accepts any time (replay driven ingestion).
    """

    listen_address: str = ShieldConstants.DEFAULT_LISTEN_ADDRESS
    registry_path: Optional[str] = None
    window_seconds: float = ShieldConstants.DEFAULT_WINDOW_SECONDS
    threshold: float = ShieldConstants.DEFAULT_THRESHOLD
    fallback_pool_size: int = ShieldConstants.DEFAULT_FALLBACK_POOL_SIZE
    decision_log_path: Optional[str] = None
    ledger_capacity: int = ShieldConstants.DEFAULT_LEDGER_CAPACITY
    max_clock_skew_seconds: float = ShieldConstants.DEFAULT_MAX_CLOCK_SKEW
    log_queue_size: int = ShieldConstants.DEFAULT_LOG_QUEUE_SIZE

    def __post_init__(self):
        try:
            self.engine_config()
        except ModelDomainError as msg:
            raise ConfigError(str(msg))
        if self.log_queue_size < 1:
            raise ConfigError("log_queue_size must be >= 1")
        if not self.max_clock_skew_seconds >= 0:
            raise ConfigError("max_clock_skew_seconds must be >= 0")
        self.host_port()

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            window_seconds=self.window_seconds,
            threshold=self.threshold,
            fallback_pool_size=self.fallback_pool_size,
            ledger_capacity=self.ledger_capacity,
        )

    def host_port(self) -> Tuple[str, int]:
        host, sep, port = self.listen_address.rpartition(":")
        if not sep or not host:
            raise ConfigError(
                "listen_address must be host:port, got %r" % self.listen_address
            )
        try:
            port = int(port)
        except ValueError:
            raise ConfigError("Invalid port in %r" % self.listen_address)
        if not 0 <= port <= 65535:
            raise ConfigError("Invalid port in %r" % self.listen_address)
        return host, port


_CONVERTERS = {
    "listen_address": str,
    "registry_path": _optional_path,
    "window_seconds": float,
    "threshold": float,
    "fallback_pool_size": _positive_int,
    "decision_log_path": _optional_path,
    "ledger_capacity": _positive_int,
    "max_clock_skew_seconds": float,
    "log_queue_size": _positive_int,
}


def _convert(values: Mapping[str, Any], origin: str) -> Dict[str, Any]:
    known = {f.name for f in fields(ServiceConfig)}
    out = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError("%s: unknown setting %r" % (origin, key))
        try:
            out[key] = _CONVERTERS[key](value)
        except (TypeError, ValueError) as msg:
            raise ConfigError("%s: invalid value for %s: %s" % (origin, key, msg))
    return out


def _read_file(path: str) -> Dict[str, Any]:
    section = ShieldConstants.CONFIG_SECTION
    try:
        if path.endswith(".toml"):
            with open(path, "rb") as f:
                data = tomllib.load(f)
            if section in data and isinstance(data[section], dict):
                data = data[section]
            return dict(data)

        parser = configparser.ConfigParser(interpolation=None)
        with open(path, "r", encoding="utf-8") as f:
            parser.read_file(f)
    except OSError as msg:
        raise ConfigError("Could not read config file %s: %s" % (path, msg))
    except (tomllib.TOMLDecodeError, configparser.Error) as msg:
        raise ConfigError("Could not parse config file %s: %s" % (path, msg))
    if not parser.has_section(section):
        raise ConfigError("%s: missing [%s] section" % (path, section))
    return dict(parser.items(section))


def _from_environ(environ: Mapping[str, str]) -> Dict[str, str]:
    prefix = ShieldConstants.ENV_PREFIX
    values = {}
    for f in fields(ServiceConfig):
        key = prefix + f.name.upper()
        if key in environ:
            values[f.name] = environ[key]
    return values


def load_service_config(
    path: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ServiceConfig:
    """Assembles a ServiceConfig from file, environment and overrides.

    Args:
        path: Optional TOML (.toml) or INI config file.
        environ: Environment to read CLICKSHIELD_* variables from, defaults to
            os.environ.
        overrides: Explicit values, None entries are ignored.

    Raises:
        ConfigError: On unreadable files, unknown keys or invalid values.
    """
    if environ is None:
        environ = os.environ
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(_convert(_read_file(path), path))
    values.update(_convert(_from_environ(environ), "environment"))
    if overrides:
        values.update(
            _convert({k: v for k, v in overrides.items() if v is not None}, "arguments")
        )

    config = replace(ServiceConfig(), **values)
    if math.isinf(config.max_clock_skew_seconds):
        logger.info("Client supplied click times are not checked against the clock")
    return config
