from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercroc.kernel import ConfigError, Simulator


class Probe:
    def __init__(self, sim, dom=0):
        self.sim = sim
        self.dom = dom
        self.times = []
        self.phases = []

    def tick(self):
        self.times.append(self.sim.now)
        self.phases.append(("tick", self.dom, self.sim.now))

    def commit(self):
        self.phases.append(("commit", self.dom, self.sim.now))


def test_soc_edges_every_10ns():
    sim = Simulator(100_000_000, 200_000_000)
    p = Probe(sim)
    assert sim.register(p) == 0
    sim.run_until(max_soc_cycles=4)
    assert p.times == [0, 10_000, 20_000, 30_000]


def test_phy_edges_every_5ns():
    sim = Simulator(100_000_000, 200_000_000)
    p = Probe(sim, 1)
    sim.register(p, 1)
    sim.run_until(limit_ps=20_001)
    assert p.times == [0, 5_000, 10_000, 15_000, 20_000]


def test_register_unknown_domain():
    sim = Simulator(100_000_000, None)
    with pytest.raises(ConfigError):
        sim.register(Probe(sim), 1)


def test_register_after_start():
    sim = Simulator()
    sim.register(Probe(sim))
    sim.run_until(max_soc_cycles=1)
    with pytest.raises(ConfigError):
        sim.register(Probe(sim))
    with pytest.raises(ConfigError):
        sim.add_domain(1000)


def test_nonpositive_frequency():
    with pytest.raises(ConfigError):
        Simulator(0)


def test_timeout_result():
    sim = Simulator(100_000_000, 200_000_000)
    sim.register(Probe(sim))
    sim.register(Probe(sim, 1), 1)
    r = sim.run_until(max_soc_cycles=100)
    assert r.timed_out and r.exit_code is None
    assert r.final_time == 1_000_000
    assert r.soc_cycles == 100
    assert r.phy_cycles == 200


def test_exit_stops_run():
    sim = Simulator()

    class Exiter:
        def tick(self):
            if sim.soc.cycle_count == 4:
                sim.request_exit(7)

    sim.register(Exiter())
    r = sim.run_until(max_soc_cycles=100)
    assert not r.timed_out
    assert r.exit_code == 7
    assert r.soc_cycles == 5


def test_first_exit_wins():
    sim = Simulator()
    sim.request_exit(3)
    sim.request_exit(4)
    assert sim.exit_code == 3


def test_flash_ratio_one_microsecond():
    sim = Simulator(100_000_000, 166_000_000)
    sim.register(Probe(sim))
    sim.register(Probe(sim, 1), 1)
    r = sim.run_until(limit_ps=1_000_000)
    # oracle: count k with k / f < 1 us using exact rationals
    expect = [sum(1 for k in range(10**4) if Fraction(k, f) < Fraction(1, 10**6)) for f in (100_000_000, 166_000_000)]
    assert (r.soc_cycles, r.phy_cycles) == tuple(expect) == (100, 166)


def test_tick_before_commit_and_soc_first_on_ties():
    sim = Simulator(100_000_000, 200_000_000)
    log = []
    a, b = Probe(sim, 0), Probe(sim, 1)
    a.phases = b.phases = log
    sim.register(b, 1)
    sim.register(a, 0)
    sim.run_until(limit_ps=5_001)
    assert log == [("tick", 0, 0), ("commit", 0, 0), ("tick", 1, 0), ("commit", 1, 0),
                   ("tick", 1, 5_000), ("commit", 1, 5_000)]


def test_resume_continues():
    sim = Simulator()
    p = Probe(sim)
    sim.register(p)
    sim.run_until(max_soc_cycles=3)
    sim.run_until(max_soc_cycles=5)
    assert p.times == [0, 10_000, 20_000, 30_000, 40_000]


@settings(max_examples=40, deadline=None)
@given(st.integers(1_000_000, 500_000_000), st.integers(1_000_000, 500_000_000), st.integers(1, 3_000_000))
def test_edge_order_matches_exact_times(f0, f1, limit):
    sim = Simulator(f0, f1)
    seen = []

    class P:
        def __init__(self, d):
            self.d = d

        def tick(self):
            seen.append((sim.now, self.d))

    sim.register(P(0))
    sim.register(P(1), 1)
    sim.run_until(limit_ps=limit)
    oracle = []
    for d, f in ((0, f0), (1, f1)):
        k = 0
        while Fraction(k * 10**12, f) < limit:
            oracle.append((k * 10**12 // f, d))
            k += 1
    assert seen == sorted(oracle)
