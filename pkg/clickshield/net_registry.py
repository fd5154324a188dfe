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
net_registry.py - Registered IPv4 network ranges and longest prefix lookup.

The registry stands in for a whois database: every source address is mapped
to the smallest registered range containing it, whose address pool size A
drives the repeated click statistics.

Registry file format, one row per line::

    # comment
    10.0.0.0/8,netA
    10.1.0.0/16,netB,40000

The optional third column overrides the pool size, which otherwise is the
full CIDR size 2**(32 - prefix_len).
"""

import logging
from dataclasses import dataclass
from ipaddress import AddressValueError, IPv4Address, IPv4Network, NetmaskValueError
from typing import Iterable, Iterator, Optional, Union

import pytricia

from .exceptions import (
    InvalidAddressError,
    RegistryConflictError,
    RegistryParseError,
    RegistryValidationError,
)
from .shield_constants import ShieldConstants

__all__ = [
    "NetRange",
    "Registry",
    "parse_ipv4",
    "load_registry",
    "load_registry_file",
    "single_net_registry",
]

logger = logging.getLogger(__name__)

IPLike = Union[str, IPv4Address]


def parse_ipv4(ip: IPLike) -> IPv4Address:
    """Normalise an IPv4 address given as text or IPv4Address.

    Raises:
        InvalidAddressError: If the text is not a dotted quad IPv4 address.
    """
    if isinstance(ip, IPv4Address):
        return ip
    try:
        return IPv4Address(str(ip).strip())
    except (AddressValueError, ValueError) as msg:
        raise InvalidAddressError("Invalid IPv4 address %r: %s" % (ip, msg))


@dataclass(frozen=True)
class NetRange:
    """A registered network block with its address pool cardinality."""

    net_id: str
    network: IPv4Network
    pool_size: Optional[int] = None

    def __post_init__(self):
        if self.pool_size is None:
            object.__setattr__(self, "pool_size", self.network.num_addresses)
        if self.pool_size < 1:
            raise RegistryValidationError(
                "pool_size of %s must be >= 1, got %i" % (self.net_id, self.pool_size)
            )

    @property
    def base(self) -> IPv4Address:
        return self.network.network_address

    @property
    def prefix_len(self) -> int:
        return self.network.prefixlen

    def __contains__(self, ip: IPLike) -> bool:
        return parse_ipv4(ip) in self.network


class Registry:
    """Immutable set of network ranges with longest prefix lookup.

    Ranges live in a PyTricia patricia trie keyed by CIDR text, a lookup
    returns the value of the most specific prefix covering the address.
    """

    def __init__(self, ranges: Iterable[NetRange] = (), fallback_pool_size: int = 1):
        if fallback_pool_size < 1:
            raise RegistryValidationError(
                "fallback_pool_size must be >= 1, got %i" % fallback_pool_size
            )
        self.fallback_pool_size: int = fallback_pool_size
        self._trie = pytricia.PyTricia(ShieldConstants.IPV4_BITS)
        for net in ranges:
            self._add(net)

    def _add(self, net: NetRange, line_no: Optional[int] = None):
        prefix = str(net.network)
        if self._trie.has_key(prefix):
            raise RegistryConflictError(
                "Duplicate range %s (%s and %s)"
                % (net.network, self._trie[prefix].net_id, net.net_id),
                line_no,
            )
        self._trie[prefix] = net

    def __len__(self) -> int:
        return len(self._trie)

    def __iter__(self) -> Iterator[NetRange]:
        nets = [self._trie[prefix] for prefix in self._trie]
        nets.sort(key=lambda net: (-net.prefix_len, int(net.base)))
        return iter(nets)

    def find(self, ip: IPLike) -> Optional[NetRange]:
        """Returns the smallest registered range containing ip, or None."""
        return self._trie.get(str(parse_ipv4(ip)))

    def contains(self, ip: IPLike) -> bool:
        return self.find(ip) is not None

    def with_fallback(self, fallback_pool_size: int) -> "Registry":
        """Same ranges, different pool size for unregistered addresses."""
        other = Registry(fallback_pool_size=fallback_pool_size)
        other._trie = self._trie
        return other

    def lookup_net(self, ip: IPLike) -> NetRange:
        """Smallest registered range containing ip.

        Unregistered addresses get a synthetic /32 range named after the
        address, with the registry's fallback pool size.
        """
        addr = parse_ipv4(ip)
        net = self.find(addr)
        if net is None:
            net = NetRange(
                net_id="host:%s" % addr,
                network=IPv4Network((int(addr), ShieldConstants.IPV4_BITS)),
                pool_size=self.fallback_pool_size,
            )
        return net


def _is_decimal(text: str) -> bool:
    return text.isascii() and text.isdigit()


def _parse_row(line: str, line_no: int) -> NetRange:
    fields = [f.strip() for f in line.split(",")]
    if len(fields) not in (2, 3):
        raise RegistryParseError(
            "Expected 'CIDR,net_id[,pool_size]', got %r" % line, line_no
        )
    cidr, net_id = fields[0], fields[1]
    prefix_len = cidr.partition("/")[2]
    if not prefix_len:
        raise RegistryParseError("Missing prefix length in %r" % cidr, line_no)
    if not _is_decimal(prefix_len):
        raise RegistryParseError("Prefix length of %r is not a number" % cidr, line_no)
    try:
        network = IPv4Network(cidr, strict=True)
    except (AddressValueError, NetmaskValueError, ValueError) as msg:
        raise RegistryParseError("Malformed CIDR %r: %s" % (cidr, msg), line_no)
    if not net_id:
        raise RegistryParseError("Empty net_id", line_no)

    pool_size = network.num_addresses
    if len(fields) == 3:
        text = fields[2]
        if not _is_decimal(text[1:] if text.startswith("-") else text):
            raise RegistryParseError("Malformed pool_size %r" % text, line_no)
        pool_size = int(text)
        if pool_size <= 0:
            raise RegistryValidationError(
                "pool_size must be positive, got %i" % pool_size, line_no
            )
    return NetRange(net_id=net_id, network=network, pool_size=pool_size)


def load_registry(
    source: Union[str, Iterable[str]],
    fallback_pool_size: int = ShieldConstants.DEFAULT_FALLBACK_POOL_SIZE,
) -> Registry:
    """Builds a Registry from registry file content.

    Args:
        source: The file content as one string, or an iterable of lines.
        fallback_pool_size: Pool size assumed for unregistered addresses.

    Returns:
        Registry: All rows loaded.

    Raises:
        RegistryParseError: On a malformed row.
        RegistryConflictError: If a CIDR appears twice.
        RegistryValidationError: On a non-positive pool size.
    """
    if isinstance(source, str):
        source = source.splitlines()

    registry = Registry(fallback_pool_size=fallback_pool_size)
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        registry._add(_parse_row(line, line_no), line_no)

    logger.info(
        "Loaded %i network ranges (fallback pool size %i)",
        len(registry),
        fallback_pool_size,
    )
    return registry


def load_registry_file(
    path: str, fallback_pool_size: int = ShieldConstants.DEFAULT_FALLBACK_POOL_SIZE
) -> Registry:
    with open(path, "r", encoding="utf-8") as f:
        return load_registry(f, fallback_pool_size)


def single_net_registry(
    ip: IPLike,
    pool_size: int,
    prefix_len: int = ShieldConstants.DEFAULT_ATTACK_PREFIX_LEN,
    net_id: str = "sim-net",
    fallback_pool_size: int = ShieldConstants.DEFAULT_FALLBACK_POOL_SIZE,
) -> Registry:
    """Registry holding one range around ip with an explicit pool size."""
    network = IPv4Network((int(parse_ipv4(ip)), prefix_len), strict=False)
    return Registry(
        [NetRange(net_id=net_id, network=network, pool_size=pool_size)],
        fallback_pool_size=fallback_pool_size,
    )
