"""Cycle-stepped event kernel for a small set of clock domains.

Every domain has an integer frequency.  Edge ``k`` of a domain happens at
``k * 10**12 // freq_hz`` picoseconds, so edge times never accumulate rounding
drift even when the period is not an integer number of picoseconds.  Edges of
all domains are processed in time order; coincident edges run in domain-id
order (SoC = 0 before the PHY domains).

A component registers with one domain and is ticked on every rising edge.
Each edge is split into two phases: all ``tick()`` handlers of the domain run
first, then all ``commit()`` handlers.  Masters post requests during ``tick``
and shared resources (the crossbar) resolve them during ``commit``, so the
result does not depend on registration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

PS_PER_S = 10**12

SOC_DOMAIN = 0
PHY_DOMAIN = 1


class ConfigError(Exception):
    """Invalid simulator configuration (bad domain, late registration, ...)."""


class ClockDomain:
    def __init__(self, id: int, freq_hz: int, name: str = ""):
        if freq_hz <= 0:
            raise ConfigError(f"domain {id}: frequency must be positive, got {freq_hz}")
        self.id = id
        self.name = name or f"clk{id}"
        self.freq_hz = int(freq_hz)
        self.period_ps = round(PS_PER_S / self.freq_hz)
        # number of rising edges processed so far; while a tick handler runs
        # it equals the index of the current edge
        self.cycle_count = 0

    def edge_time(self, k: int) -> int:
        return k * PS_PER_S // self.freq_hz

    def first_edge_after(self, t_ps: int) -> int:
        """Index of the first edge strictly later than ``t_ps``."""
        # edge_time(k) > t  <=>  k * 1e12 >= (t + 1) * f
        return -((-(t_ps + 1) * self.freq_hz) // PS_PER_S)

    def edges_before(self, t_ps: int) -> int:
        """Number of edges in [0, t_ps)."""
        return -((-t_ps * self.freq_hz) // PS_PER_S)

    def __repr__(self):
        return f"ClockDomain({self.id}, {self.freq_hz} Hz, {self.name!r})"


@dataclass
class RunResult:
    exit_code: int | None
    final_time: int
    soc_cycles: int
    phy_cycles: int
    timed_out: bool = False
    cycles: tuple = ()

    @property
    def exited(self) -> bool:
        return not self.timed_out


class Simulator:
    """Owns the clock domains, the registered components and the exit flag."""

    def __init__(self, soc_freq_hz: int = 100_000_000, phy_freq_hz: int | None = 200_000_000):
        self.domains: list[ClockDomain] = []
        self._ticks: list[list[Callable[[], None]]] = []
        self._commits: list[list[Callable[[], None]]] = []
        self._components: list[tuple[object, int]] = []
        self.now = 0
        self.started = False
        self.exit_code: int | None = None
        self.add_domain(soc_freq_hz, "soc")
        if phy_freq_hz is not None:
            self.add_domain(phy_freq_hz, "phy")

    @property
    def soc(self) -> ClockDomain:
        return self.domains[SOC_DOMAIN]

    def add_domain(self, freq_hz: int, name: str = "") -> int:
        if self.started:
            raise ConfigError("cannot add a clock domain after the run started")
        dom = ClockDomain(len(self.domains), freq_hz, name)
        self.domains.append(dom)
        self._ticks.append([])
        self._commits.append([])
        return dom.id

    def domain(self, domain_id: int) -> ClockDomain:
        if not 0 <= domain_id < len(self.domains):
            raise ConfigError(f"unknown clock domain id {domain_id}")
        return self.domains[domain_id]

    def register(self, component, domain_id: int = SOC_DOMAIN) -> int:
        """Attach ``component`` to a domain; returns its handle.

        The component must provide ``tick()``; ``commit()`` is optional.
        """
        if self.started:
            raise ConfigError(f"cannot register {getattr(component, 'name', component)!r}: run already started")
        self.domain(domain_id)
        tick = getattr(component, "tick", None)
        if tick is not None:
            self._ticks[domain_id].append(tick)
        commit = getattr(component, "commit", None)
        if commit is not None:
            self._commits[domain_id].append(commit)
        self._components.append((component, domain_id))
        return len(self._components) - 1

    def component(self, handle: int):
        return self._components[handle][0]

    def request_exit(self, code: int) -> None:
        if self.exit_code is None:
            self.exit_code = code

    def run_until(self, limit_ps: int | None = None, max_soc_cycles: int | None = None,
                  stop: Callable[[], bool] | None = None) -> RunResult:
        """Process edges until the exit flag is raised or a limit is hit.

        ``limit_ps`` bounds simulated time (edges strictly before it run);
        ``max_soc_cycles`` bounds the SoC domain, which is the same as a time
        limit at the SoC edge with that index.  ``stop`` is polled after every
        edge as an additional exit-flag source.  Calling again resumes.
        """
        if not self._components:
            raise ConfigError("no components registered")
        self.started = True
        soc = self.soc
        limit = limit_ps
        if max_soc_cycles is not None:
            t = soc.edge_time(max_soc_cycles)
            limit = t if limit is None else min(limit, t)

        doms = self.domains
        ticks = self._ticks
        commits = self._commits
        nxt = [d.edge_time(d.cycle_count) for d in doms]
        ndom = len(doms)
        while self.exit_code is None:
            # pick the earliest edge; lower id wins ties
            i = 0
            t = nxt[0]
            for j in range(1, ndom):
                if nxt[j] < t:
                    i, t = j, nxt[j]
            if limit is not None and t >= limit:
                self.now = max(self.now, limit)
                return self._result(None, True)
            self.now = t
            for f in ticks[i]:
                f()
            for f in commits[i]:
                f()
            d = doms[i]
            d.cycle_count += 1
            nxt[i] = d.edge_time(d.cycle_count)
            if stop is not None and self.exit_code is None and stop():
                return self._result(None, False)
        return self._result(self.exit_code, False)

    def _result(self, code, timed_out) -> RunResult:
        cycles = tuple(d.cycle_count for d in self.domains)
        phy = cycles[PHY_DOMAIN] if len(cycles) > 1 else 0
        return RunResult(code, self.now, cycles[SOC_DOMAIN], phy, timed_out, cycles)
