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

from .click_ledger import ClickLedger, LedgerEntry, WindowConfig
from .exceptions import ClickShieldException
from .filter_engine import (
    ClickEvent,
    Decision,
    EngineConfig,
    FilterEngine,
    Outcome,
    Reason,
)
from .net_registry import NetRange, Registry, load_registry, load_registry_file
from .poisson_model import (
    Lambda,
    ModelParams,
    expected_repeats,
    loss_factor,
    loss_upper_bound,
    should_discard_repeat,
)
from .traffic_simulator import (
    AttackScenario,
    NatScenario,
    run_attack_scenario,
    run_nat_scenario,
)

__all__ = [
    "ClickShieldException",
    "ClickEvent",
    "ClickLedger",
    "Decision",
    "EngineConfig",
    "FilterEngine",
    "LedgerEntry",
    "Outcome",
    "Reason",
    "WindowConfig",
    "NetRange",
    "Registry",
    "load_registry",
    "load_registry_file",
    "Lambda",
    "ModelParams",
    "expected_repeats",
    "loss_factor",
    "loss_upper_bound",
    "should_discard_repeat",
    "AttackScenario",
    "NatScenario",
    "run_attack_scenario",
    "run_nat_scenario",
]
