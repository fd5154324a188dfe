import math
import random
from concurrent.futures import ThreadPoolExecutor
from ipaddress import IPv4Address

import pytest

from clickshield.exceptions import (
    ConfigError,
    InvalidAddressError,
    InvalidClickError,
    LedgerCapacityError,
    ModelDomainError,
)
from clickshield.filter_engine import (
    ClickEvent,
    Decision,
    EngineConfig,
    FilterEngine,
    Outcome,
    Reason,
)
from clickshield.net_registry import load_registry

from .reference import NaiveFilter, hosts, random_stream


def click(source, dest="/landing", time=0.0):
    return ClickEvent(source=source, dest=dest, time=time)


def as_tuple(d: Decision):
    return (d.outcome.value, d.reason.value, d.observed_c, d.pool_size, d.loss_bound, d.net_id)


class TestClickEvent:
    def test_parses_source(self):
        event = click("198.51.100.7", time=3)
        assert event.source == IPv4Address("198.51.100.7")
        assert event.time == 3.0
        assert isinstance(event.time, float)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dest": ""},
            {"dest": None},
            {"time": -1.0},
            {"time": math.nan},
            {"time": math.inf},
            {"time": True},
            {"time": "12"},
            {"time": 10**400},
            {"time": -(10**400)},
        ],
    )
    def test_invalid(self, kwargs):
        fields = {"source": "10.0.0.1", "dest": "/x", "time": 1.0}
        fields.update(kwargs)
        with pytest.raises(InvalidClickError):
            ClickEvent(**fields)

    def test_invalid_source(self):
        with pytest.raises(InvalidAddressError):
            click("10.0.0.300")
        with pytest.raises(ValueError):
            click("not-an-ip")

    def test_from_mapping(self):
        event = ClickEvent.from_mapping({"source": "10.0.0.1", "dest": "/x", "time": 5})
        assert event == click("10.0.0.1", "/x", 5.0)
        event = ClickEvent.from_mapping({"source": "10.0.0.1", "dest": "/x"}, 42.0)
        assert event.time == 42.0
        with pytest.raises(InvalidClickError):
            ClickEvent.from_mapping({"source": "10.0.0.1", "dest": "/x"})
        with pytest.raises(InvalidClickError):
            ClickEvent.from_mapping({"dest": "/x", "time": 1})
        with pytest.raises(InvalidClickError):
            ClickEvent.from_mapping({"source": 167772161, "dest": "/x", "time": 1})
        with pytest.raises(InvalidClickError):
            ClickEvent.from_mapping({"source": "10.0.0.1", "time": 1})
        with pytest.raises(InvalidClickError):
            ClickEvent.from_mapping(["10.0.0.1", "/x", 1])


class TestEngineConfig:
    def test_defaults(self):
        config = EngineConfig(window_seconds=60.0)
        assert config.threshold == 0.01
        assert config.fallback_pool_size == 1
        assert config.ledger_capacity is None

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.1, 1.5])
    def test_threshold_range(self, threshold):
        with pytest.raises(ModelDomainError):
            EngineConfig(window_seconds=60.0, threshold=threshold)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"window_seconds": 0.0},
            {"window_seconds": -1.0},
            {"window_seconds": 60.0, "fallback_pool_size": 0},
            {"window_seconds": 60.0, "ledger_capacity": 0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            EngineConfig(**kwargs)


def test_first_click_accepted(make_engine):
    engine = make_engine()
    decision = engine.handle_click(click("198.51.100.4", time=0.0))
    assert decision.outcome is Outcome.ACCEPT
    assert decision.reason is Reason.FIRST_FROM_SOURCE
    assert decision.observed_c == 0
    assert decision.pool_size == 256
    assert decision.loss_bound == 0.0
    assert decision.net_id == "isp"


def test_repeat_below_threshold_discarded(make_engine):
    engine = make_engine(threshold=0.01)
    engine.handle_click(click("198.51.100.4", time=0.0))
    decision = engine.handle_click(click("198.51.100.4", time=60.0))
    assert decision.outcome is Outcome.DISCARD
    assert decision.reason is Reason.REPEAT_BELOW_THRESHOLD_DISCARDED
    assert decision.observed_c == 1
    assert decision.loss_bound == pytest.approx(0.001953, abs=1e-6)
    assert engine.get_counter("/landing") == 1
    assert engine.window_size() == 1


def test_repeat_above_threshold_accepted(make_engine):
    engine = make_engine(threshold=0.01)
    for i, source in enumerate(["203.0.113.5", "203.0.113.6", "203.0.113.7"]):
        engine.handle_click(click(source, time=float(i)))
    decision = engine.handle_click(click("203.0.113.5", time=10.0))
    assert decision.outcome is Outcome.ACCEPT
    assert decision.reason is Reason.REPEAT_ABOVE_THRESHOLD_ACCEPTED
    assert decision.observed_c == 3
    assert decision.pool_size == 100
    assert decision.loss_bound == pytest.approx(0.015)
    assert engine.get_counter("/landing") == 4
    # the accepted repeat counts toward C of the next click
    assert engine.handle_click(click("203.0.113.8", time=11.0)).observed_c == 4


def test_tie_is_accepted(make_engine):
    # 0.5 * 2 / 100 == 0.01
    engine = make_engine(threshold=0.01)
    engine.handle_click(click("203.0.113.1", time=0.0))
    engine.handle_click(click("203.0.113.2", time=1.0))
    decision = engine.handle_click(click("203.0.113.1", time=2.0))
    assert decision.loss_bound == 0.01
    assert decision.reason is Reason.REPEAT_ABOVE_THRESHOLD_ACCEPTED


def test_counters(make_engine):
    engine = make_engine()
    assert engine.get_counter("/x") == 0
    engine.handle_click(click("198.51.100.1", "/x", 0.0))
    assert engine.get_counter("/x") == 1
    engine.handle_click(click("198.51.100.1", "/x", 1.0))
    assert engine.get_counter("/x") == 1
    engine.handle_click(click("198.51.100.1", "/y", 2.0))
    assert engine.counters() == {"/x": 1, "/y": 1}


def test_reset_keeps_window(make_engine):
    engine = make_engine()
    engine.handle_click(click("198.51.100.1", "/x", 0.0))
    engine.handle_click(click("198.51.100.2", "/y", 0.0))
    engine.reset_counters()
    engine.reset_counters()
    assert engine.get_counter("/x") == 0
    assert engine.counters() == {}
    assert engine.window_size() == 2
    decision = engine.handle_click(click("198.51.100.1", "/x", 5.0))
    assert decision.outcome is Outcome.DISCARD
    assert engine.get_counter("/x") == 0


def test_window_expiry(make_engine):
    engine = make_engine(window=100.0)
    engine.handle_click(click("198.51.100.1", time=0.0))
    assert engine.handle_click(click("198.51.100.1", time=100.0)).outcome is Outcome.DISCARD
    decision = engine.handle_click(click("198.51.100.1", time=100.5))
    assert decision.reason is Reason.FIRST_FROM_SOURCE
    assert decision.observed_c == 0


def test_late_click_does_not_resurrect_history(make_engine):
    engine = make_engine(window=100.0)
    engine.handle_click(click("198.51.100.1", time=0.0))
    engine.handle_click(click("198.51.100.2", "/other", time=1000.0))
    late = engine.handle_click(click("198.51.100.1", time=50.0))
    assert late.reason is Reason.FIRST_FROM_SOURCE
    assert late.observed_c == 0


def test_single_source_flood(make_engine):
    engine = make_engine(window=1e9, threshold=0.01)
    decisions = [
        engine.handle_click(click("198.51.100.9", time=float(t))) for t in range(1000)
    ]
    accepted = [d for d in decisions if d.outcome is Outcome.ACCEPT]
    assert len(accepted) == 1
    assert decisions[0].outcome is Outcome.ACCEPT
    # discards never enter the window, so C stays at one
    assert all(d.observed_c == 1 for d in decisions[1:])
    assert engine.get_counter("/landing") == 1


def test_unregistered_source_uses_fallback(registry):
    engine = FilterEngine(registry, EngineConfig(window_seconds=60.0))
    engine.handle_click(click("172.16.0.1", time=0.0))
    decision = engine.handle_click(click("172.16.0.1", time=1.0))
    assert decision.net_id == "host:172.16.0.1"
    assert decision.pool_size == 1
    assert decision.outcome is Outcome.ACCEPT
    assert decision.reason is Reason.REPEAT_ABOVE_THRESHOLD_ACCEPTED

    wide = FilterEngine(registry, EngineConfig(window_seconds=60.0, fallback_pool_size=1000))
    assert wide.registry.fallback_pool_size == 1000
    wide.handle_click(click("172.16.0.1", time=0.0))
    assert wide.handle_click(click("172.16.0.1", time=1.0)).outcome is Outcome.DISCARD


def test_c_counts_whole_net(make_engine):
    engine = make_engine(threshold=0.5)
    engine.handle_click(click("10.1.2.1", time=0.0))
    engine.handle_click(click("10.1.2.2", time=1.0))
    engine.handle_click(click("10.1.9.9", time=2.0))
    decision = engine.handle_click(click("10.1.2.3", time=3.0))
    assert decision.net_id == "netC"
    assert decision.pool_size == 4
    assert decision.observed_c == 2


def test_ledger_capacity(make_engine):
    engine = make_engine(ledger_capacity=2)
    engine.handle_click(click("198.51.100.1", time=0.0))
    engine.handle_click(click("198.51.100.2", time=1.0))
    with pytest.raises(LedgerCapacityError):
        engine.handle_click(click("198.51.100.3", time=2.0))
    assert engine.get_counter("/landing") == 2
    assert engine.window_size() == 2
    # discards need no room in the window
    assert engine.handle_click(click("198.51.100.1", time=3.0)).outcome is Outcome.DISCARD


def test_replace_registry(make_engine):
    engine = make_engine()
    engine.handle_click(click("198.51.100.1", time=0.0))
    engine.replace_registry(load_registry("198.51.100.0/24,tiny,1\n"))
    assert engine.registry.lookup_net("198.51.100.1").net_id == "tiny"
    decision = engine.handle_click(click("198.51.100.1", time=1.0))
    assert decision.net_id == "tiny"
    # the earlier click was recorded under the old net
    assert decision.observed_c == 0
    assert decision.outcome is Outcome.DISCARD


def test_decision_to_dict(make_engine):
    engine = make_engine()
    data = engine.handle_click(click("198.51.100.1", time=0.0)).to_dict()
    assert data == {
        "outcome": "ACCEPT",
        "reason": "FIRST_FROM_SOURCE",
        "observed_c": 0,
        "pool_size": 256,
        "loss_bound": 0.0,
        "net_id": "isp",
    }


def test_concurrent_counters(make_engine):
    engine = make_engine(window=1e9)
    sources = hosts("198.51.100.0/24", 200)
    events = [click(sources[i % 200], "/d%i" % (i % 3), float(i)) for i in range(4000)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        decisions = list(pool.map(engine.handle_click, events))
    for dest in ["/d0", "/d1", "/d2"]:
        accepted = sum(
            1
            for e, d in zip(events, decisions)
            if e.dest == dest and d.outcome is Outcome.ACCEPT
        )
        assert engine.get_counter(dest) == accepted
    assert sum(engine.counters().values()) == engine.window_size()


STREAM_SOURCES = (
    hosts("10.1.2.0/24", 4)
    + hosts("198.51.100.0/24", 6)
    + hosts("192.168.0.0/24", 3)
    + hosts("10.2.0.0/16", 3)
    + hosts("203.0.113.0/24", 4)
    + hosts("172.16.0.0/24", 3)
)
STREAM_DESTS = ["/a", "/b", "/c"]


def check_against_oracle(registry, seed, n_events, threshold):
    rng = random.Random(seed)
    config = EngineConfig(window_seconds=20.0, threshold=threshold)
    engine = FilterEngine(registry, config)
    naive = NaiveFilter(list(registry), 20.0, threshold)
    events = random_stream(rng, n_events, STREAM_SOURCES, STREAM_DESTS)
    for source, dest, time in events:
        decision = engine.handle_click(ClickEvent(source, dest, time))
        assert as_tuple(decision) == naive.handle(source, dest, time)
        if decision.outcome is Outcome.DISCARD:
            assert decision.reason is Reason.REPEAT_BELOW_THRESHOLD_DISCARDED
            assert decision.loss_bound < threshold
        elif decision.reason is Reason.REPEAT_ABOVE_THRESHOLD_ACCEPTED:
            assert decision.loss_bound >= threshold
    assert engine.counters() == naive.counters


@pytest.mark.parametrize("threshold", [0.01, 0.2])
@pytest.mark.parametrize("seed", range(5))
def test_matches_linear_scan(registry, seed, threshold):
    check_against_oracle(registry, seed, 2000, threshold)


@pytest.mark.slow
def test_matches_linear_scan_long_streams(registry):
    for seed in range(100):
        check_against_oracle(registry, 1000 + seed, 10_000, (0.01, 0.2)[seed % 2])
