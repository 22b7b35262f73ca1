import pytest

from hypercroc.cli import main
from hypercroc.config import RunConfig
from hypercroc.kernel import ConfigError
from hypercroc.loader import FirmwareImage, Segment
from hypercroc.soc import Soc
from hypercroc.trace import read_trace

import rvgen
from test_hyperbus import _latency_oracle


def _prog(words):
    return b"".join(w.to_bytes(4, "little") for w in words)


def _exit_seq(code=0):
    return rvgen.li_pair(7, 0x0300_0000) + [rvgen.enc_i("addi", 8, 0, 2 * code + 1), rvgen.enc_store("sw", 8, 7, 0)]


def test_core_hyperram_load_latency(tmp_path):
    words = rvgen.li_pair(6, 0x8000_0000) + [rvgen.enc_load("lw", 5, 6, 0)] + _exit_seq()
    p = tmp_path / "p.bin"
    p.write_bytes(_prog(words))
    t = tmp_path / "t.jsonl"
    assert main(["--firmware", str(p), "--load-addr", "0x10000000", "--trace", str(t), "-q"]) == 0
    rets = [r for r in read_trace(t) if r["type"] == "retire"]
    i = next(k for k, r in enumerate(rets) if r["instr"] == "lw")
    gap = rets[i]["cycle"] - rets[i - 1]["cycle"]
    wait, _ = _latency_oracle(100_000_000, 200_000_000, 6)
    # one issue cycle, then the round trip through both CDC crossings
    assert gap == 1 + wait == 10


def test_code_runs_from_hyperram():
    soc = Soc()
    code = _prog([rvgen.enc_i("addi", 5, 0, 42)] + _exit_seq(3))
    soc.load_image(FirmwareImage([Segment(0x8000_0100, code)], 0x8000_0100))
    res = soc.run(max_soc_cycles=5000)
    assert res.exit_code == 3
    assert soc.core.x[5] == 42
    assert soc.xbar.grants[(0, "phy0")] >= 4


def test_dual_phy_windows_and_masters():
    soc = Soc(RunConfig(phy_count=2))
    assert soc.map.decode(0x9000_0000).name == "phy1"
    assert [p.id for p in soc.xbar.ports] == [0, 1, 2, 3, 4, 5, 6]
    assert soc.sim.domain(1).freq_hz == soc.sim.domain(2).freq_hz == 200_000_000


def test_window_larger_than_span_rejected():
    with pytest.raises(ConfigError):
        Soc(RunConfig(phy0_window=512 << 20))


def test_overlapping_map_override_rejected():
    with pytest.raises(ConfigError):
        Soc(RunConfig(map_user=0x1000_0000))


def test_fewer_sram_banks():
    soc = Soc(RunConfig(sram_banks=2))
    assert soc.map.decode(0x1000_4000) is None
