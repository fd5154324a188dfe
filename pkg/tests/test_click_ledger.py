import math
import random
from ipaddress import IPv4Address

import pytest

from clickshield.click_ledger import ClickLedger, LedgerEntry, WindowConfig
from clickshield.exceptions import ConfigError, InvalidClickError, LedgerCapacityError

from .reference import NaiveLedger

SRC = IPv4Address("1.2.3.4")


def entry(time, source=SRC, dest="/landing", net_id="netA"):
    return LedgerEntry(source=IPv4Address(source), dest=dest, net_id=net_id, time=time)


def filled(*times):
    ledger = ClickLedger()
    for t in times:
        ledger.record(entry(t))
    return ledger


def test_entry_validation():
    with pytest.raises(InvalidClickError):
        entry(0.0, dest="")
    with pytest.raises(InvalidClickError):
        entry(-1.0)
    with pytest.raises(InvalidClickError):
        entry(math.nan)
    with pytest.raises(ConfigError):
        WindowConfig(0.0)
    with pytest.raises(ConfigError):
        WindowConfig(-5.0)
    assert WindowConfig(86400.0).window_seconds == 86400.0


def test_evict_strictly_older():
    ledger = filled(10.0, 20.0, 30.0)
    assert ledger.evict_before(25.0) == 2
    assert [e.time for e in ledger.entries()] == [30.0]


def test_evict_empty():
    assert ClickLedger().evict_before(1e9) == 0


def test_evict_boundary_retained():
    ledger = filled(25.0)
    assert ledger.evict_before(25.0) == 0
    assert len(ledger) == 1


def test_evict_idempotent():
    ledger = filled(1.0, 5.0, 9.0, 12.0)
    assert ledger.evict_before(9.0) == 2
    assert ledger.evict_before(9.0) == 0
    assert [e.time for e in ledger.entries()] == [9.0, 12.0]


def test_count_net_dest():
    ledger = ClickLedger()
    assert ledger.count_net_dest("netA", "/landing") == 0
    for t in range(3):
        ledger.record(entry(float(t)))
    ledger.record(entry(4.0, dest="/other"))
    ledger.record(entry(5.0, net_id="netB", dest="/other"))
    assert ledger.count_net_dest("netA", "/landing") == 3
    assert ledger.count_net_dest("netA", "/other") == 1
    assert ledger.count_net_dest("netC", "/landing") == 0


def test_has_prior():
    ledger = filled(10.0)
    assert ledger.has_prior(SRC, "/landing")
    assert not ledger.has_prior(SRC, "/other")
    assert not ledger.has_prior(IPv4Address("1.2.3.5"), "/landing")
    ledger.evict_before(100.0)
    assert not ledger.has_prior(SRC, "/landing")


def test_dest_compared_exactly():
    ledger = filled(0.0)
    assert not ledger.has_prior(SRC, "/Landing")
    assert not ledger.has_prior(SRC, "/landing/")
    assert ledger.count_net_dest("netA", "/landing?") == 0


def test_duplicates_kept():
    ledger = ClickLedger()
    ledger.record(entry(7.0, dest="/x"))
    ledger.record(entry(7.0, dest="/x"))
    assert ledger.count_net_dest("netA", "/x") == 2
    assert len(ledger) == 2
    ledger.evict_before(6.0)
    assert ledger.count_net_dest("netA", "/x") == 2
    ledger.evict_before(7.5)
    assert ledger.count_net_dest("netA", "/x") == 0
    assert not ledger.has_prior(SRC, "/x")


def test_record_then_evict():
    ledger = filled(5.0)
    ledger.evict_before(6.0)
    assert ledger.count_net_dest("netA", "/landing") == 0


def test_out_of_order_records_evicted_by_time():
    ledger = filled(30.0, 10.0, 20.0, 15.0)
    assert ledger.evict_before(18.0) == 2
    assert [e.time for e in ledger.entries()] == [20.0, 30.0]


def test_capacity():
    with pytest.raises(ConfigError):
        ClickLedger(capacity=0)
    ledger = ClickLedger(capacity=2)
    ledger.record(entry(1.0))
    ledger.record(entry(2.0))
    assert not ledger.has_capacity()
    with pytest.raises(LedgerCapacityError):
        ledger.record(entry(3.0))
    assert len(ledger) == 2
    assert ledger.count_net_dest("netA", "/landing") == 2
    ledger.evict_before(1.5)
    assert ledger.has_capacity()
    ledger.record(entry(3.0))
    assert len(ledger) == 2


@pytest.mark.parametrize("seed", range(10))
def test_matches_linear_scan(seed):
    rng = random.Random(seed)
    sources = [IPv4Address("10.0.0.%i" % i) for i in range(1, 6)]
    dests = ["/a", "/b", "/c"]
    nets = ["netA", "netB"]
    ledger = ClickLedger()
    naive = NaiveLedger()
    cutoff = 0.0
    for _ in range(2000):
        op = rng.random()
        if op < 0.6:
            row = (
                rng.choice(sources),
                rng.choice(dests),
                rng.choice(nets),
                cutoff + rng.uniform(0.0, 50.0),
            )
            ledger.record(LedgerEntry(*row))
            naive.record(*row)
        elif op < 0.7:
            cutoff += rng.uniform(0.0, 10.0)
            assert ledger.evict_before(cutoff) == naive.evict_before(cutoff)
            assert all(e.time >= cutoff for e in ledger.entries())
        else:
            net, dest = rng.choice(nets), rng.choice(dests)
            source = rng.choice(sources)
            assert ledger.count_net_dest(net, dest) == naive.count_net_dest(net, dest)
            assert ledger.has_prior(source, dest) == naive.has_prior(source, dest)
    assert len(ledger) == len(naive.rows)
