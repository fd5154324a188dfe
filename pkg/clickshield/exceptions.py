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

from typing import Optional


class ClickShieldException(Exception):
    pass


class ModelDomainError(ClickShieldException, ValueError):
    pass


class InvalidAddressError(ClickShieldException, ValueError):
    pass


class InvalidClickError(ClickShieldException, ValueError):
    pass


class RegistryError(ClickShieldException):
    """Base for registry loading errors. Carries the offending line number
    when the error comes from a registry file."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        if line_no is not None:
            message = "line %i: %s" % (line_no, message)
        super().__init__(message)
        self.line_no = line_no


class RegistryParseError(RegistryError):
    pass


class RegistryConflictError(RegistryError):
    pass


class RegistryValidationError(RegistryError):
    pass


class LedgerCapacityError(ClickShieldException):
    pass


class ConfigError(ClickShieldException):
    pass


class DecisionLogError(ClickShieldException):
    pass


class DecisionLogCorruptError(DecisionLogError):
    def __init__(
        self, message: str, seq: Optional[int] = None, line_no: Optional[int] = None
    ):
        where = []
        if seq is not None:
            where.append("seq %i" % seq)
        if line_no is not None:
            where.append("line %i" % line_no)
        if where:
            message = "%s: %s" % (", ".join(where), message)
        super().__init__(message)
        self.seq = seq
        self.line_no = line_no


class LogBackPressure(DecisionLogError):
    pass
