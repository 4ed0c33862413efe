"""Flat-sectioned key=value run configuration.

The format is a deliberately small INI subset: ``[section]`` headers,
``key = value`` lines, ``#`` comments, blank lines.  Every key carries
its SI unit as a name suffix (``length_m``, ``bin_spacing_hz``) so files
stay unit-unambiguous and diff-friendly.  Unknown sections or keys are
rejected with file:line precision rather than ignored, because a typo'd
key silently falling back to a default is the worst failure mode a batch
run can have.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .biphoton import DispersionMap, FrequencyGrid, PumpSpec
from .crystal import CombSpec
from .measurement import SpectrometerSpec

__all__ = ["ConfigError", "RunConfig", "parse_config", "default_config"]


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


# Section -> key -> default.  The default's type drives value parsing;
# tuples mark comma-separated float lists (the tuple holds the default).
_SCHEMA: dict[str, dict[str, object]] = {
    "crystal": {
        "length_m": defaults.CRYSTAL_LENGTH,
        "domain_width_m": defaults.DOMAIN_WIDTH,
        "pair_count": defaults.PAIR_COUNT,
        "bin_spacing_hz": defaults.BIN_SPACING_HZ,
        "peak_width_m": 0.0,  # 0 = derive as length/4.5
        "bin_purity": defaults.DESIGN_BIN_PURITY,
        "source": "comb",  # comb | designed
    },
    "pump": {
        "wavelength_m": defaults.PUMP_WAVELENGTH,
        "fwhm_duration_s": defaults.PUMP_FWHM_DURATION,
    },
    "grid": {
        "points": defaults.GRID_POINTS,
        "half_span_hz": defaults.GRID_HALF_SPAN_HZ,
    },
    "spectrometer": {
        "dispersion_ps_per_nm_km": 20.0,
        "fiber_length_km": 20.0,
        "jitter_fwhm_s": 50e-12,
        "time_bin_s": 25e-12,
        "window_s": 12.5e-9,
        "reference_wavelength_m": defaults.DEGENERATE_WAVELENGTH,
        "events": 43_000_000,
        "max_alias_fraction": 0.02,
        "resamples": 1000,
    },
    "tomography": {
        "events_per_projection": 20_000_000,
        "gate_width_s": 1.52e-9,
        "phases_rad": (0.0,),
        "drift_rad": (0.0,),
        "resamples": 1000,
    },
    "hom": {
        "tau_min_s": -5e-12,
        "tau_max_s": 5e-12,
        "points": 81,
        "counts_per_point": 0,
    },
    "run": {
        "seed": 0,
        "threads": 0,
        "input": "",
    },
}


def _parse_value(raw: str, default, where: str):
    if isinstance(default, tuple):
        try:
            return tuple(float(tok) for tok in raw.split(","))
        except ValueError as exc:
            raise ConfigError(f"{where}: expected comma-separated numbers, got {raw!r}") from exc
    if isinstance(default, bool):
        raise AssertionError("no boolean keys in schema")
    if isinstance(default, int):
        try:
            value = int(raw.replace("_", ""), 0) if raw.lstrip("+-").isdigit() or "_" in raw else int(float(raw))
            if float(raw.replace("_", "")) != value:
                raise ValueError
            return value
        except ValueError as exc:
            raise ConfigError(f"{where}: expected an integer, got {raw!r}") from exc
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: expected a number, got {raw!r}") from exc
    return raw


@dataclass
class RunConfig:
    """Parsed configuration with every key resolved (defaults included)."""

    sections: dict = field(default_factory=dict)
    path: str = "<defaults>"

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    # --- builders -------------------------------------------------------

    def peak_width(self) -> float:
        cfg = self.sections["crystal"]
        return cfg["peak_width_m"] or cfg["length_m"] / 4.5

    def gvm_slope(self) -> float:
        cfg = self.sections["crystal"]
        purity = cfg["bin_purity"]
        if not 0.0 < purity < 1.0:
            raise ConfigError(f"{self.path}: bin_purity must lie in (0, 1)")
        ratio = (1.0 - np.sqrt(1.0 - purity**2)) / purity
        return 1.0 / (self.peak_width() * ratio * self.pump_spec().sigma)

    def comb_spec(self) -> CombSpec:
        cfg = self.sections["crystal"]
        center = np.pi / cfg["domain_width_m"]
        spacing = 4.0 * np.pi * self.gvm_slope() * cfg["bin_spacing_hz"]
        return CombSpec(
            pair_count=cfg["pair_count"],
            spacing=spacing,
            peak_width=self.peak_width(),
            center=center,
            length=cfg["length_m"],
        )

    def pump_spec(self) -> PumpSpec:
        cfg = self.sections["pump"]
        return PumpSpec.from_duration(cfg["wavelength_m"], cfg["fwhm_duration_s"])

    def dispersion_map(self) -> DispersionMap:
        return DispersionMap(
            slope=self.gvm_slope(),
            center=np.pi / self.sections["crystal"]["domain_width_m"],
        )

    def frequency_grid(self) -> FrequencyGrid:
        cfg = self.sections["grid"]
        return FrequencyGrid.symmetric(cfg["points"], cfg["half_span_hz"])

    def spectrometer_spec(self) -> SpectrometerSpec:
        cfg = self.sections["spectrometer"]
        return SpectrometerSpec(
            dispersion_ps_per_nm_km=cfg["dispersion_ps_per_nm_km"],
            fiber_length_km=cfg["fiber_length_km"],
            jitter_fwhm=cfg["jitter_fwhm_s"],
            time_bin=cfg["time_bin_s"],
            window=cfg["window_s"],
            reference_wavelength=cfg["reference_wavelength_m"],
        )

    def bin_values(self, key: str, n_bins: int) -> np.ndarray:
        """Per-bin list keys: a single value broadcasts to every bin."""
        values = self.sections["tomography"][key]
        if len(values) == 1:
            return np.full(n_bins, values[0])
        if len(values) != n_bins:
            raise ConfigError(
                f"{self.path}: {key} needs 1 or {n_bins} comma-separated values, got {len(values)}"
            )
        return np.asarray(values, dtype=float)

    def resolved_text(self) -> str:
        """Manifest echo: every section and key, defaults included."""
        lines = []
        for section in _SCHEMA:
            lines.append(f"[{section}]")
            for key, value in self.sections[section].items():
                if isinstance(value, tuple):
                    rendered = ",".join(f"{v:.12g}" for v in value)
                elif isinstance(value, float):
                    rendered = f"{value:.12g}"
                else:
                    rendered = str(value)
                lines.append(f"{key} = {rendered}")
            lines.append("")
        return "\n".join(lines)


def default_config() -> RunConfig:
    return RunConfig(sections={s: dict(kv) for s, kv in _SCHEMA.items()})


def parse_config(path) -> RunConfig:
    """Parse and validate a config file; every diagnostic carries file:line."""
    cfg = default_config()
    cfg.path = str(path)
    seen: set[tuple[str, str]] = set()
    section = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ConfigError(f"{where}: unterminated section header {line!r}")
                name = line[1:-1].strip()
                if name not in _SCHEMA:
                    raise ConfigError(f"{where}: unknown section [{name}]")
                section = name
                continue
            if "=" not in line:
                raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
            if section is None:
                raise ConfigError(f"{where}: key outside any [section]")
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key '{key}' in [{section}]")
            if (section, key) in seen:
                raise ConfigError(f"{where}: duplicate key '{key}' in [{section}]")
            seen.add((section, key))
            cfg.sections[section][key] = _parse_value(
                value, _SCHEMA[section][key], where
            )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    crystal = cfg.sections["crystal"]
    if crystal["source"] not in ("comb", "designed"):
        raise ConfigError(f"{cfg.path}: crystal source must be 'comb' or 'designed'")
    for section, key in (
        ("crystal", "length_m"),
        ("crystal", "domain_width_m"),
        ("pump", "wavelength_m"),
        ("pump", "fwhm_duration_s"),
        ("grid", "half_span_hz"),
    ):
        if cfg.sections[section][key] <= 0:
            raise ConfigError(f"{cfg.path}: {key} must be > 0")
    if crystal["pair_count"] < 1:
        raise ConfigError(f"{cfg.path}: pair_count must be >= 1")
    # a zero bin spacing collapses the comb to one peak, legal only for a
    # single pair; CombSpec enforces the pairing rule itself
    if crystal["bin_spacing_hz"] < 0:
        raise ConfigError(f"{cfg.path}: bin_spacing_hz must be >= 0")
    if cfg.sections["grid"]["points"] < 2:
        raise ConfigError(f"{cfg.path}: grid points must be >= 2")
    if cfg.sections["hom"]["points"] < 2:
        raise ConfigError(f"{cfg.path}: hom points must be >= 2")
    if cfg.sections["hom"]["tau_max_s"] <= cfg.sections["hom"]["tau_min_s"]:
        raise ConfigError(f"{cfg.path}: hom range must have tau_max_s > tau_min_s")
    for key in ("events",):
        if cfg.sections["spectrometer"][key] < 0:
            raise ConfigError(f"{cfg.path}: {key} must be >= 0")
    tomo = cfg.sections["tomography"]
    if tomo["events_per_projection"] < 0:
        raise ConfigError(f"{cfg.path}: events_per_projection must be >= 0")
    if tomo["resamples"] < 0:
        raise ConfigError(f"{cfg.path}: resamples must be >= 0")
