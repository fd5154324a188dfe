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


class ShieldConstants:
    """Defaults and reference figures shared by the filter, the simulator and
    the service, read as ShieldConstants.NAME. The reference figures are kept
    for documentation and for the report output.
    """

    # Filter defaults
    DEFAULT_THRESHOLD = 0.01  # 1% accepted revenue loss
    DEFAULT_FALLBACK_POOL_SIZE = 1  # unknown IPs are treated as single hosts
    DEFAULT_WINDOW_SECONDS = 86400.0
    DEFAULT_LEDGER_CAPACITY = 1000000

    # Service defaults
    DEFAULT_LISTEN_ADDRESS = "127.0.0.1:8080"
    DEFAULT_MAX_CLOCK_SKEW = 300.0
    DEFAULT_LOG_QUEUE_SIZE = 10000
    ENV_PREFIX = "CLICKSHIELD_"
    CONFIG_SECTION = "clickshield"

    # IPv4
    IPV4_BITS = 32

    # Below this intensity N(lambda) is summed as a power series,
    # above it lambda + expm1(-lambda) has no harmful cancellation
    SERIES_CUTOVER = 0.5
    SERIES_TERMS = 40

    # Simulator
    SIM_BLOCK_SAMPLES = 1 << 20  # sampled addresses held in memory per block
    SIM_MAX_BLOCK_RUNS = 1 << 16
    DEFAULT_ATTACK_INTERVAL = 1200.0  # 20 minutes between attack clicks
    DEFAULT_ATTACK_JITTER = 1.0
    DEFAULT_ATTACK_PREFIX_LEN = 24

    # Large mobile operator scenario (subscribers behind a NAT address pool)
    REF_POOL_SIZE = 5538048
    REF_USER_COUNT = 28870000
    REF_CLICKER_COUNT = 28870
    REF_SIMULATED_FRACTION = 2.5368e-3
    REF_UPPER_BOUND = 2.6065e-3
    REF_DIFFERENCE = 6.9652e-5

    # Single IP attack against a live ad network, clicks counted / flagged
    # invalid as shown on the advertiser's dashboard
    REF_ATTACK_COUNTED = 41
    REF_ATTACK_DISCARDED = 43
