"""Run configuration and its flat ``key = value`` file format.

Lines look like ``soc_freq_hz = 100000000``; ``#`` starts a comment.
Integers accept any Python literal base (``0x8000_0000``) and an optional
scientific form for frequencies (``166e6``).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .kernel import ConfigError

MiB = 1 << 20

DEFAULT_MAP = {
    "rom": 0x0000_0000,
    "socctrl": 0x0300_0000,
    "uart": 0x0300_2000,
    "timer": 0x0300_3000,
    "idma": 0x0300_5000,
    "hyper_cfg": 0x0300_6000,
    "sram": 0x1000_0000,
    "user": 0x2000_0000,
    "phy0": 0x8000_0000,
    "phy1": 0x9000_0000,
}


@dataclass
class RunConfig:
    soc_freq_hz: int = 100_000_000
    phy_count: int = 1
    phy0_kind: str = "ram"
    phy1_kind: str = "ram"
    phy0_freq_hz: int | None = None  # None: 200 MHz for RAM, 166 MHz for FLASH
    phy1_freq_hz: int | None = None
    phy0_window: int | None = None  # None: derived from the device kind
    phy1_window: int | None = None
    latency_count: int = 6
    tcsm_ns: int = 4000
    max_burst_bytes: int = 1024
    rwds_extra_latency_probability: float = 0.0
    sram_banks: int = 4
    user_size: int = 16 * MiB
    plugin: str = "checksum"
    max_soc_cycles: int | None = 50_000_000
    seed: int = 0
    trace: str | None = None
    report: str | None = None
    firmware: str | None = None
    format: str | None = None
    load_addr: int | None = None
    entry: int | None = None
    map_rom: int = DEFAULT_MAP["rom"]
    map_socctrl: int = DEFAULT_MAP["socctrl"]
    map_uart: int = DEFAULT_MAP["uart"]
    map_timer: int = DEFAULT_MAP["timer"]
    map_idma: int = DEFAULT_MAP["idma"]
    map_hyper_cfg: int = DEFAULT_MAP["hyper_cfg"]
    map_sram: int = DEFAULT_MAP["sram"]
    map_user: int = DEFAULT_MAP["user"]
    map_phy0: int = DEFAULT_MAP["phy0"]
    map_phy1: int = DEFAULT_MAP["phy1"]

    def validate(self) -> "RunConfig":
        if self.phy_count not in (1, 2):
            raise ConfigError(f"phy_count must be 1 or 2, got {self.phy_count}")
        if self.soc_freq_hz <= 0:
            raise ConfigError("soc_freq_hz must be positive")
        for i in range(2):
            kind = getattr(self, f"phy{i}_kind")
            if kind not in ("ram", "flash"):
                raise ConfigError(f"phy{i}_kind must be ram or flash, got {kind!r}")
            f = getattr(self, f"phy{i}_freq_hz")
            if f is not None and f <= 0:
                raise ConfigError(f"phy{i}_freq_hz must be positive")
        if not 1 <= self.sram_banks <= 16:
            raise ConfigError("sram_banks must be within 1..16")
        if self.plugin not in ("none", "checksum"):
            raise ConfigError(f"unknown plugin {self.plugin!r}")
        if self.format not in (None, "elf", "bin"):
            raise ConfigError(f"unknown firmware format {self.format!r}")
        return self

    def phy_freq(self, i: int) -> int:
        f = getattr(self, f"phy{i}_freq_hz")
        if f is not None:
            return f
        return 166_000_000 if getattr(self, f"phy{i}_kind") == "flash" else 200_000_000

    def phy_window(self, i: int) -> int:
        w = getattr(self, f"phy{i}_window")
        if w is not None:
            return w
        # a single flash PHY gets its whole 2 GiB span; otherwise 256 MiB windows
        if getattr(self, f"phy{i}_kind") == "flash" and self.phy_count == 1 and i == 0:
            return 2048 * MiB
        return 256 * MiB


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(key: str, text: str):
    text = text.strip()
    f = _FIELDS[key]
    ty = str(f.type)
    if text.lower() in ("none", ""):
        if "None" not in ty:
            raise ConfigError(f"{key} cannot be empty")
        return None
    if ty.startswith("str"):
        return text
    if ty.startswith("float"):
        return float(text)
    try:
        return int(text, 0)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(v)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        setattr(cfg, key, _parse_value(key, val))
    return cfg


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config_text(text, base)


def set_option(cfg: RunConfig, key: str, value) -> None:
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    if isinstance(value, str):
        value = _parse_value(key, value)
    setattr(cfg, key, value)


def dump_config(cfg: RunConfig) -> str:
    lines = ["# hypercroc effective configuration"]
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            s = "none"
        elif f.name.startswith("map_") or f.name.endswith(("_window", "load_addr", "entry")):
            s = f"{v:#x}"
        else:
            s = str(v)
        lines.append(f"{f.name} = {s}")
    return "\n".join(lines) + "\n"
