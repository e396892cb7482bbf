import subprocess
import sys
import textwrap

import pytest

from raresim.cli import main
from raresim.config import EXPERIMENTS, config_from_mapping, default_config, load_config
from raresim.exceptions import ConfigError, NotFoundError


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_defaults_for_every_experiment():
    for exp in EXPERIMENTS:
        cfg = default_config(exp)
        assert cfg.experiment == exp
        cfg.check_registry()
    assert len(default_config("link").bands) == 1


def test_unit_suffixed_keys_load(tmp_path):
    p = write(tmp_path, """
        experiment = "msac"
        ptx_dbm = [0, 10]
        [sensor]
        practical_offset_db = 3.0
        [channel]
        seed = 9
        trials = 50
        """)
    cfg = load_config(p)
    assert cfg.ptx_dbm == (0.0, 10.0)
    assert cfg.sensor.practical_offset_db == 3.0
    assert cfg.seed == 9 and cfg.with_seed(4).seed == 4


@pytest.mark.parametrize("mapping", [
    {"experiment": "msac", "sensor": {"offset": 3}},
    {"experiment": "msac", "colour": "red"},
    {"experiment": "telepathy"},
    {"experiment": "msac", "channel": {"trials": 0}},
    {"experiment": "msac", "bands": [{"name": "x", "carrier_hz": 1e9}]},
    {"experiment": "msac", "ptx_dbm": []},
    {"sensor": {}},
])
def test_bad_mappings_raise(mapping):
    with pytest.raises(ConfigError):
        config_from_mapping(mapping)


def test_experiment_mismatch_and_missing_file(tmp_path):
    p = write(tmp_path, 'experiment = "msac"\n')
    with pytest.raises(ConfigError):
        load_config(p, "link")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")
    bad = write(tmp_path, "experiment = [", "bad.toml")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_band_missing_from_registry():
    cfg = config_from_mapping({"experiment": "link", "bands": [{
        "name": "c", "carrier_hz": 4e9, "bandwidth_hz": 1e5, "lower": "60D5/2", "upper": "61P3/2"}]})
    with pytest.raises(NotFoundError):
        cfg.check_registry()


def test_five_band_set():
    cfg = config_from_mapping({"experiment": "multiband", "band_set": "five-band"})
    assert len(cfg.bands) == 5 and len({b.if_hz for b in cfg.bands}) == 5
    cfg.check_registry()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["sensitivity", "--out", str(tmp_path / "a")]) == 0
    assert main(["sensitivity", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 2
    assert main(["msac", "--format", "pdf"]) == 2
    assert main(["link", "--seed", "-1", "--out", str(tmp_path)]) == 2
    bad = write(tmp_path, """
        experiment = "vibration"
        [target]
        amplitude_m = 0.0
        """)
    assert main(["vibration", "--config", str(bad), "--out", str(tmp_path / "v")]) == 3
    clash = write(tmp_path, """
        experiment = "multiband"
        [[bands]]
        name = "a"
        carrier_hz = 3.213e9
        bandwidth_hz = 1e5
        lower = "60D5/2"
        upper = "61P3/2"
        if_hz = 2e3
        [[bands]]
        name = "b"
        carrier_hz = 30.618e9
        bandwidth_hz = 1e5
        lower = "60D5/2"
        upper = "62P3/2"
        if_hz = 2e3
        """, "clash.toml")
    assert main(["multiband", "--config", str(clash), "--out", str(tmp_path / "m")]) == 3


def test_global_flags_before_subcommand(tmp_path):
    assert main(["--seed", "3", "--out", str(tmp_path), "--format", "csv+svg", "eit-spectrum"]) == 0
    assert (tmp_path / "eit_spectrum.csv").read_text().startswith("detuning_Hz,transmission\n")
    assert (tmp_path / "eit_spectrum.svg").read_text().startswith("<svg")


def test_sensitivity_csv_schema(tmp_path):
    assert main(["sensitivity", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sensitivity.csv").read_text().splitlines()
    assert lines[0] == "freq_hz,sql_vpm_rthz,halfwave_vpm_rthz,fixed_vpm_rthz"
    assert all(len(line.split(",")) == 4 for line in lines)
    assert (tmp_path / "registry.csv").read_text().startswith("lower,upper,dipole_Cm,freq_Hz\n")


def test_registry_override(tmp_path):
    reg = tmp_path / "reg.csv"
    reg.write_text("lower,upper,dipole_Cm,freq_Hz\n60D5/2,61P3/2,2.04e-26,3.213e9\n")
    cfg = write(tmp_path, """
        experiment = "link"
        registry_path = "reg.csv"
        [link]
        snr_db = [10]
        symbols = 100
        """)
    assert main(["link", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "link.csv").read_text().count("\n") == 2


def test_link_determinism(tmp_path):
    cfg = write(tmp_path, """
        experiment = "link"
        [link]
        snr_db = [0, 6]
        symbols = 300
        """)
    for d in ("a", "b"):
        assert main(["link", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "link.csv").read_bytes() == (tmp_path / "b" / "link.csv").read_bytes()
    assert main(["link", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "link.csv").read_bytes() != (tmp_path / "a" / "link.csv").read_bytes()


def test_console_script_module(tmp_path):
    out = subprocess.run([sys.executable, "-m", "raresim.cli", "sensitivity", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "sensitivity:" in out.stdout
