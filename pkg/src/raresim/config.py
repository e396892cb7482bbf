"""TOML experiment configuration with unit-suffixed keys."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .exceptions import ConfigError, NotFoundError
from .registry import StateRegistry, default_registry, load_registry, multiband_registry

EXPERIMENTS = ("eit-spectrum", "sensitivity", "link", "mimo", "multiband", "msac", "vibration")
MODULATIONS = ("bpsk", "qpsk")


@dataclass(frozen=True)
class BandConfig:
    name: str
    carrier_hz: float
    bandwidth_hz: float
    lower: str
    upper: str
    modulation: str = "qpsk"
    if_hz: float = 2e3
    symbol_rate_hz: float = 1e3
    snr_db: float = 20.0

    def validate(self):
        if not self.carrier_hz > 0 or not self.bandwidth_hz > 0:
            raise ConfigError(f"band {self.name!r}: carrier_hz and bandwidth_hz must be positive")
        if self.modulation not in MODULATIONS:
            raise ConfigError(f"band {self.name!r}: modulation must be one of {MODULATIONS}")
        if not 0 < self.if_hz or not self.symbol_rate_hz > 0:
            raise ConfigError(f"band {self.name!r}: if_hz and symbol_rate_hz must be positive")


@dataclass(frozen=True)
class SensorConfig:
    n_atoms: float = 5e5
    coherence_time_s: float = 225e-6
    # "offset": RARE field-noise floor sits practical_offset_db below the
    # classic thermal floor; "sql": use the shot-noise limit instead.
    rare_floor: str = "offset"
    practical_offset_db: float = 7.2
    od: float = 1.0
    reference_rabi_hz: float = 2e6
    chain: str = "linear"

    def validate(self):
        if not self.n_atoms >= 1 or not self.coherence_time_s > 0:
            raise ConfigError("sensor: n_atoms >= 1 and coherence_time_s > 0 required")
        if self.rare_floor not in ("offset", "sql"):
            raise ConfigError("sensor.rare_floor must be 'offset' or 'sql'")
        if self.chain not in ("linear", "quantum"):
            raise ConfigError("sensor.chain must be 'linear' or 'quantum'")
        if not self.od > 0 or not self.reference_rabi_hz > 0:
            raise ConfigError("sensor: od and reference_rabi_hz must be positive")


@dataclass(frozen=True)
class ChannelConfig:
    seed: int = 0
    trials: int = 10_000
    comm_distance_m: float = 600.0
    sensing_distance_m: float = 10.0
    target_rcs_m2: float = 1.0

    def validate(self):
        if self.trials < 1:
            raise ConfigError("channel.trials must be at least 1")
        if not (self.comm_distance_m > 0 and self.sensing_distance_m > 0 and self.target_rcs_m2 > 0):
            raise ConfigError("channel distances and target_rcs_m2 must be positive")


@dataclass(frozen=True)
class TargetConfig:
    amplitude_m: float = 10e-6
    frequency_hz: float = 20.0
    duration_s: float = 0.5
    trials: int = 20
    lowpass_hz: float = 80.0
    noise_density_vpm_rthz: float = 0.0
    echo_field_vpm: float = 1e-3

    def validate(self):
        if self.amplitude_m < 0 or not self.frequency_hz > 0 or not self.duration_s > 0:
            raise ConfigError("target: amplitude_m >= 0, frequency_hz > 0, duration_s > 0 required")
        if self.trials < 1 or not self.lowpass_hz > 0:
            raise ConfigError("target: trials >= 1 and lowpass_hz > 0 required")
        if self.noise_density_vpm_rthz < 0 or not self.echo_field_vpm > 0:
            raise ConfigError("target: noise density >= 0 and echo field > 0 required")


@dataclass(frozen=True)
class EitConfig:
    rabi_rf_hz: float = 10e6
    span_hz: float = 30e6
    points: int = 2001

    def validate(self):
        if self.rabi_rf_hz < 0 or not self.span_hz > 0 or self.points < 3:
            raise ConfigError("eit: rabi_rf_hz >= 0, span_hz > 0 and points >= 3 required")


@dataclass(frozen=True)
class LinkConfig:
    snr_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    symbols: int = 2000

    def validate(self):
        if len(self.snr_db) == 0 or self.symbols < 1:
            raise ConfigError("link: snr_db non-empty and symbols >= 1 required")


@dataclass(frozen=True)
class MimoConfig:
    receivers: int = 16
    users: int = 4
    trials: int = 100
    reference_scale: float = 3.0
    branches: tuple = (1, 2, 4, 8)
    simo_snr_db: float = 10.0
    simo_symbols: int = 10_000

    def validate(self):
        if not self.receivers >= self.users >= 1:
            raise ConfigError("mimo: receivers >= users >= 1 required")
        if self.trials < 1 or self.simo_symbols < 1 or not self.branches:
            raise ConfigError("mimo: trials, simo_symbols and branches must be positive")
        if not self.reference_scale > 0:
            raise ConfigError("mimo.reference_scale must be positive")


@dataclass(frozen=True)
class SensitivityConfig:
    fmin_hz: float = 1e9
    fmax_hz: float = 100e9
    frequencies_hz: tuple | None = None
    dipole_length_m: float = 0.01
    efficiency: float = 0.5

    def validate(self):
        if not 0 < self.fmin_hz < self.fmax_hz:
            raise ConfigError("sensitivity: need 0 < fmin_hz < fmax_hz")


MSAC_BANDS = (
    BandConfig("comm", 3.213e9, 500e3, "60D5/2", "61P3/2", "qpsk", 2e3, 1e3, 20.0),
    BandConfig("sensing", 30.618e9, 100e3, "60D5/2", "62P3/2", "bpsk", 5e3, 1e3, 20.0),
)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    registry_path: str | None = None
    bands: tuple = MSAC_BANDS
    ptx_dbm: tuple = tuple(float(p) for p in range(-10, 11, 2))
    sensor: SensorConfig = field(default_factory=SensorConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    eit: EitConfig = field(default_factory=EitConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    mimo: MimoConfig = field(default_factory=MimoConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if len(self.ptx_dbm) == 0:
            raise ConfigError("power grid ptx_dbm must not be empty")
        if len(self.bands) == 0:
            raise ConfigError("at least one band is required")
        for part in (self.sensor, self.channel, self.target, self.eit, self.link, self.mimo,
                     self.sensitivity, *self.bands):
            part.validate()

    @property
    def seed(self) -> int:
        return self.channel.seed

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, channel=dataclasses.replace(self.channel, seed=int(seed)))

    def registry(self) -> StateRegistry:
        if self.registry_path is not None:
            return load_registry(self.registry_path)
        if self.experiment == "multiband" and any(b.carrier_hz not in _msac_carriers()
                                                  for b in self.bands):
            return multiband_registry()
        return default_registry()

    def check_registry(self, reg: StateRegistry | None = None) -> StateRegistry:
        """Every band's transition must exist in the registry (NotFoundError)."""
        reg = reg or self.registry()
        for b in self.bands:
            t = reg.lookup(b.lower, b.upper)
            if abs(t.frequency - b.carrier_hz) > 1e-6 * b.carrier_hz:
                raise NotFoundError(
                    f"band {b.name!r}: {b.lower}->{b.upper} is at {t.frequency:.6g} Hz, "
                    f"not {b.carrier_hz:.6g} Hz"
                )
        return reg


def _msac_carriers():
    return {b.carrier_hz for b in MSAC_BANDS}


def _multiband_bands() -> tuple:
    reg = multiband_registry()
    ifs = (2e3, 5e3, 11e3, 17e3, 23e3)
    return tuple(
        BandConfig(f"band{k}", t.frequency, 100e3, t.lower.label, t.upper.label, "bpsk",
                   ifs[k], 1e3, 20.0)
        for k, t in enumerate(sorted(reg, key=lambda t: t.frequency))
    )


def default_config(experiment: str) -> ExperimentConfig:
    if experiment == "multiband":
        return ExperimentConfig(experiment, bands=MSAC_BANDS)
    if experiment == "link":
        return ExperimentConfig(experiment, bands=MSAC_BANDS[:1])
    return ExperimentConfig(experiment)


_SECTIONS = {
    "sensor": SensorConfig,
    "channel": ChannelConfig,
    "target": TargetConfig,
    "eit": EitConfig,
    "link": LinkConfig,
    "mimo": MimoConfig,
    "sensitivity": SensitivityConfig,
}


def _build(cls, data: Mapping[str, Any], where: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for k, v in data.items():
        kwargs[k] = tuple(v) if isinstance(v, list) else v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def config_from_mapping(data: Mapping[str, Any], experiment: str | None = None,
                        base_dir: Path | None = None) -> ExperimentConfig:
    data = dict(data)
    exp = data.pop("experiment", None) or experiment
    if exp is None:
        raise ConfigError("config does not name an experiment")
    if experiment is not None and exp != experiment:
        raise ConfigError(f"config is for {exp!r}, not {experiment!r}")
    base = default_config(exp)
    kwargs: dict[str, Any] = {"experiment": exp}
    for key in list(data):
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], data.pop(key), key)
    if "bands" in data:
        bands = data.pop("bands")
        if not isinstance(bands, list):
            raise ConfigError("bands must be an array of tables")
        kwargs["bands"] = tuple(_build(BandConfig, b, f"bands.{i}") for i, b in enumerate(bands))
    elif exp == "multiband" and data.pop("band_set", None) == "five-band":
        kwargs["bands"] = _multiband_bands()
    else:
        kwargs["bands"] = base.bands
    if "ptx_dbm" in data:
        kwargs["ptx_dbm"] = tuple(float(p) for p in data.pop("ptx_dbm"))
    if "registry_path" in data:
        p = Path(data.pop("registry_path"))
        kwargs["registry_path"] = str(p if p.is_absolute() or base_dir is None else base_dir / p)
    if data:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(data))}")
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text())
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping(data, experiment, path.parent)
