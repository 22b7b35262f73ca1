"""Command-line entry point: ``hypercroc --firmware prog.elf [options]``.

Process exit code: the firmware's exit code, 124 when the cycle limit is
reached first, 125 for configuration, load or usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import RunConfig, dump_config, load_config, set_option
from .core import BusError
from .kernel import ConfigError
from .loader import LoadError, load_firmware
from .periph import Console
from .soc import Soc
from .trace import TraceWriter

EXIT_TIMEOUT = 124
EXIT_CONFIG = 125

FIRMWARE_DIR = Path(__file__).resolve().parent / "firmware"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        v = float(text)
        if v != int(v):
            raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
        return int(v)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypercroc", description="Cycle-approximate HyperCroc SoC simulator.")
    p.add_argument("--config", help="key = value configuration file; flags override it")
    p.add_argument("--firmware", help="ELF or flat binary; bare names resolve to bundled firmware")
    p.add_argument("--format", choices=("elf", "bin"), help="firmware format (default: detect)")
    p.add_argument("--load-addr", type=_int, help="load address of a flat binary")
    p.add_argument("--entry", type=_int, help="override the entry point")
    p.add_argument("--soc-freq", type=_int, help="SoC clock in Hz")
    p.add_argument("--phy-freq", type=_int, help="PHY clock in Hz (all PHYs)")
    p.add_argument("--phys", type=int, choices=(1, 2), help="number of HyperBus PHYs")
    p.add_argument("--flash", action="store_true", help="attach HyperFlash instead of HyperRAM")
    p.add_argument("--max-cycles", type=_int, help="SoC cycle limit (exit 124 when reached)")
    p.add_argument("--trace", help="write a JSON-lines trace")
    p.add_argument("--report", help="write a JSON-lines bandwidth report")
    p.add_argument("--seed", type=_int, help="seed for the RWDS extra-latency model")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="set any config key")
    p.add_argument("--preload", action="append", default=[], metavar="FILE[@ADDR]",
                   help="copy a raw image into memory; ADDR defaults to FILE.offset")
    p.add_argument("--dump", action="append", default=[], metavar="ADDR:LEN:FILE",
                   help="write memory to FILE (and FILE.offset) after the run")
    p.add_argument("--dump-map", action="store_true", help="print the memory map as JSON and exit")
    p.add_argument("--dump-config", metavar="FILE", help="write the effective configuration")
    p.add_argument("-q", "--quiet", action="store_true", help="do not mirror UART output to stdout")
    return p


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        set_option(cfg, k.strip().replace("-", "_"), v)
    simple = {"firmware": "firmware", "format": "format", "load_addr": "load_addr", "entry": "entry",
              "soc_freq": "soc_freq_hz", "phys": "phy_count", "max_cycles": "max_soc_cycles",
              "trace": "trace", "report": "report", "seed": "seed"}
    for arg, key in simple.items():
        v = getattr(args, arg)
        if v is not None:
            setattr(cfg, key, v)
    if args.phy_freq is not None:
        cfg.phy0_freq_hz = cfg.phy1_freq_hz = args.phy_freq
    if args.flash:
        cfg.phy0_kind = cfg.phy1_kind = "flash"
    return cfg.validate()


def resolve_firmware(name: str) -> str:
    p = Path(name)
    if p.exists() or p.parent != Path("."):
        return str(p)
    for cand in (FIRMWARE_DIR / name, FIRMWARE_DIR / f"{name}.elf"):
        if cand.exists():
            return str(cand)
    return str(p)


def _read_offset(path: str) -> int:
    side = Path(path + ".offset")
    try:
        return int(side.read_text().strip(), 0)
    except (OSError, ValueError) as e:
        raise ConfigError(f"no usable offset for {path}: {e}") from None


def _preload(soc: Soc, spec: str) -> None:
    path, _, addr = spec.partition("@")
    a = int(addr, 0) if addr else _read_offset(path)
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    soc.write_mem(a, data)


def _dump(soc: Soc, spec: str) -> None:
    try:
        addr, n, path = spec.split(":", 2)
        a, n = int(addr, 0), int(n, 0)
    except ValueError:
        raise ConfigError(f"--dump expects ADDR:LEN:FILE, got {spec!r}") from None
    Path(path).write_bytes(soc.read_mem(a, n))
    Path(path + ".offset").write_text(f"{a:#x}\n")


def run(cfg: RunConfig, preload=(), dump=(), console: Console | None = None) -> int:
    """Build the SoC, load firmware, run, and return the process exit code."""
    trace = None
    try:
        soc = Soc(cfg, console)
        if cfg.firmware is None:
            raise ConfigError("no firmware given")
        img = load_firmware(resolve_firmware(cfg.firmware), cfg.format, cfg.load_addr, cfg.entry)
        soc.load_image(img)
        for spec in preload:
            _preload(soc, spec)
        if cfg.report:
            open(cfg.report, "w").close()
        if cfg.trace:
            trace = TraceWriter(cfg.trace)
            trace.attach(soc)
    except (ConfigError, LoadError, BusError, OSError) as e:
        print(f"hypercroc: {e}", file=sys.stderr)
        return EXIT_CONFIG

    res = soc.run(cfg.max_soc_cycles)
    soc.console.close()
    if trace is not None:
        if not res.timed_out and res.exit_code is not None:
            trace.exit(res.exit_code)
        trace.close()
    if cfg.report:
        soc.perf.write_report(cfg.report)
    try:
        for spec in dump:
            _dump(soc, spec)
    except (ConfigError, BusError, OSError) as e:
        print(f"hypercroc: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if res.timed_out or res.exit_code is None:
        print(f"hypercroc: cycle limit reached after {res.soc_cycles} SoC cycles", file=sys.stderr)
        return EXIT_TIMEOUT
    return res.exit_code & 0xFF


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        if args.dump_config:
            Path(args.dump_config).write_text(dump_config(cfg))
        if args.dump_map:
            soc = Soc(cfg)
            print(json.dumps(soc.map.as_list(), indent=2))
            return 0
    except (ConfigError, OSError) as e:
        print(f"hypercroc: {e}", file=sys.stderr)
        return EXIT_CONFIG
    console = Console(None if args.quiet else sys.stdout)
    return run(cfg, args.preload, args.dump, console)


if __name__ == "__main__":
    sys.exit(main())
