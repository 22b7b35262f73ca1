"""JSON-lines execution trace.

The first line is a header ``{"type": "header", "schema": "hypercroc-trace",
"version": 1, ...}``.  Then one record per event, in simulation order:

    retire  cycle, pc, class (timing class or "nop"), instr
    grant   cycle, master, target, addr, burst
    hyper   phy, t_ps, cs, ca, bytes, phy_cycles, write
    exit    cycle, code

Every record is serialised with sorted keys, so equal runs give equal bytes.
"""

from __future__ import annotations

import json

from .isa import is_nop
from .kernel import ConfigError

SCHEMA = "hypercroc-trace"
VERSION = 1


class TraceWriter:
    def __init__(self, path: str):
        try:
            self.fh = open(path, "w", encoding="ascii", newline="\n")
        except OSError as e:
            raise ConfigError(f"cannot open trace file {path}: {e}") from None
        self.soc = None

    def _emit(self, rec: dict) -> None:
        self.fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    def attach(self, soc) -> None:
        """Write the header and hook the core, crossbar and controllers."""
        self.soc = soc
        cfg = soc.cfg
        self._emit({"type": "header", "schema": SCHEMA, "version": VERSION,
                    "soc_freq_hz": cfg.soc_freq_hz, "phy_count": cfg.phy_count,
                    "phy_freq_hz": [cfg.phy_freq(i) for i in range(cfg.phy_count)],
                    "phy_kind": [getattr(cfg, f"phy{i}_kind") for i in range(cfg.phy_count)],
                    "seed": cfg.seed})
        soc.core.on_retire = self.retire
        soc.xbar.grant_hooks.append(self.grant)
        for ctl in soc.phys:
            ctl.txn_hooks.append(self.hyper)

    def retire(self, r) -> None:
        d = r.instr
        cls = "nop" if is_nop(d) else d.cost
        self._emit({"type": "retire", "cycle": self.soc.sim.soc.cycle_count, "pc": f"{r.pc:#010x}",
                    "class": cls, "instr": d.name})

    def grant(self, cyc, master, target, addr, burst) -> None:
        self._emit({"type": "grant", "cycle": cyc, "master": master, "target": target,
                    "addr": f"{addr:#010x}", "burst": burst})

    def hyper(self, index, txn, cycles) -> None:
        self._emit({"type": "hyper", "phy": index, "t_ps": self.soc.sim.now, "cs": txn.cs,
                    "ca": f"{txn.ca:012x}", "bytes": txn.data_bytes, "phy_cycles": cycles,
                    "write": txn.write})

    def exit(self, code: int) -> None:
        self._emit({"type": "exit", "cycle": self.soc.sim.soc.cycle_count, "code": code})

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()
            self.fh = None


def read_trace(path: str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
