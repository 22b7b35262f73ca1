"""Byte counters per channel and bandwidth reports.

Channels are free-form strings such as ``phy0.read`` or ``dma0.write``.
Besides byte records a channel may carry activity spans (for example a
HyperBus transaction from chip-select assert to release); the default report
window of a channel is its activity span, so protocol overhead counts as time
but not as bytes.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import asdict, dataclass

EXTERNAL = "external"


@dataclass
class BandwidthReport:
    channel: str
    t0_ps: int
    t1_ps: int
    bytes: int
    mb_per_s: float
    words_per_soc_cycle: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)


class _Channel:
    __slots__ = ("times", "cum", "span")

    def __init__(self):
        self.times: list[int] = []
        self.cum: list[int] = []  # cumulative bytes including the record at the same index
        self.span: list[int] | None = None

    def total(self) -> int:
        return self.cum[-1] if self.cum else 0

    def bytes_in(self, t0: int, t1: int) -> int:
        i = bisect.bisect_left(self.times, t0)
        j = bisect.bisect_left(self.times, t1)
        if j <= i:
            return 0
        return self.cum[j - 1] - (self.cum[i - 1] if i else 0)


class PerfCounters:
    def __init__(self, soc_freq_hz: int = 100_000_000):
        self.soc_freq_hz = soc_freq_hz
        self.channels: dict[str, _Channel] = {}

    def _ch(self, name) -> _Channel:
        ch = self.channels.get(name)
        if ch is None:
            ch = self.channels[name] = _Channel()
        return ch

    def record(self, channel: str, t: int, nbytes: int) -> None:
        assert nbytes > 0, f"{channel}: non-positive byte count {nbytes}"
        ch = self._ch(channel)
        assert not ch.times or t >= ch.times[-1], f"{channel}: time went backwards ({t} < {ch.times[-1]})"
        ch.times.append(t)
        ch.cum.append(ch.total() + nbytes)

    def activity(self, channel: str, t0: int, t1: int) -> None:
        """Extend the channel's activity span to cover [t0, t1)."""
        ch = self._ch(channel)
        if ch.span is None:
            ch.span = [t0, t1]
        else:
            ch.span[0] = min(ch.span[0], t0)
            ch.span[1] = max(ch.span[1], t1)

    def total(self, channel: str) -> int:
        ch = self.channels.get(channel)
        return ch.total() if ch else 0

    def span(self, channel: str) -> tuple[int, int] | None:
        ch = self.channels.get(channel)
        if ch is None:
            return None
        if ch.span is not None:
            return ch.span[0], ch.span[1]
        if ch.times:
            return ch.times[0], ch.times[-1] + 1
        return None

    def _report(self, name, chans, t0, t1) -> BandwidthReport:
        nbytes = sum(c.bytes_in(t0, t1) for c in chans)
        dt = t1 - t0
        if dt <= 0:
            return BandwidthReport(name, t0, t1, nbytes, 0.0, 0.0)
        mbps = nbytes / (dt * 1e-12) / 1e6
        soc_cycles = dt * self.soc_freq_hz / 1e12
        return BandwidthReport(name, t0, t1, nbytes, mbps, nbytes / 4 / soc_cycles)

    def report(self, window: tuple[int, int] | None = None) -> list[BandwidthReport]:
        """One report per channel plus the ``external`` aggregate of all PHY channels.

        Without an explicit window each channel uses its own activity span and
        the aggregate uses the union of the PHY spans.
        """
        out = []
        for name in sorted(self.channels):
            ch = self.channels[name]
            w = window or self.span(name) or (0, 0)
            out.append(self._report(name, [ch], *w))
        phys = [n for n in sorted(self.channels) if n.startswith("phy")]
        if window is not None:
            w = window
        else:
            spans = [self.span(n) for n in phys if self.span(n)]
            w = (min(s[0] for s in spans), max(s[1] for s in spans)) if spans else (0, 0)
        out.append(self._report(EXTERNAL, [self.channels[n] for n in phys], *w))
        return out

    def write_report(self, path, window=None) -> list[BandwidthReport]:
        reps = self.report(window)
        with open(path, "w") as f:
            for r in reps:
                f.write(r.to_json() + "\n")
        return reps
