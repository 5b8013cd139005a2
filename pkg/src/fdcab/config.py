"""Scenario parameters shared by every part of the simulator."""

from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "FDCAB_"


class ConfigError(ValueError):
    """Raised when a scenario violates one of its invariants."""


@dataclass(frozen=True)
class SystemConfig:
    """One scenario of the full-duplex broadcast system.

    Noise variance is fixed at 1, so ``P`` is the linear SNR.
    """

    M: int = 8              # BS antennas == single-antenna users
    T: int = 2000           # coherence block length (symbols)
    P: float = 10.0         # BS transmit power, linear
    f: float = 0.1          # user pilot power as a fraction of P
    alpha: float = 0.1      # INI strength; INI power is alpha * f * P
    trials: int = 1000      # Monte Carlo blocks
    seed: int = 20150628

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.P)

    @property
    def n_cycles(self) -> int:
        """Whole training cycles that fit in one block."""
        return self.T // self.M

    @property
    def pilot_energy(self) -> float:
        """Per-pilot energy f*P."""
        return self.f * self.P

    @property
    def ini_power(self) -> float:
        return self.alpha * self.f * self.P

    def replace(self, **changes: Any) -> "SystemConfig":
        return validate(dataclasses.replace(self, **changes))

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def validate(cfg: SystemConfig) -> SystemConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError."""
    if not isinstance(cfg.M, int) or cfg.M < 2:
        raise ConfigError("M must be ≥ 2")
    if not isinstance(cfg.T, int) or cfg.T < 2 * cfg.M:
        raise ConfigError("T must be ≥ 2M")
    if not (cfg.P > 0 and math.isfinite(cfg.P)):
        raise ConfigError("P must be > 0")
    if not (0 < cfg.f <= 1):
        raise ConfigError("f must be in (0, 1]")
    if not (cfg.alpha >= 0 and math.isfinite(cfg.alpha)):
        raise ConfigError("alpha must be ≥ 0")
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ConfigError("trials must be ≥ 1")
    if not isinstance(cfg.seed, int) or not (0 <= cfg.seed < 2**64):
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return cfg


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def round_to_cycle(t: float, M: int, T: int | None = None, lo: int | None = None) -> int:
    """Nearest whole number of cycles, in symbols, clamped to ``[lo, T - M]``.

    The upper clamp is the largest multiple of ``M`` not above ``T - M``,
    so the result always lies on the brute-force grid.
    """
    lo = M if lo is None else lo
    n = int(math.floor(t / M + 0.5)) * M
    if T is not None:
        n = min(n, (T - M) // M * M)
    return max(n, lo)


# Field name -> parser, used for config files, env vars and CLI overrides.
_FIELD_TYPES = {
    "M": int,
    "T": int,
    "P": float,
    "f": float,
    "alpha": float,
    "trials": int,
    "seed": int,
}


def _coerce(key: str, value: Any) -> tuple[str, Any]:
    if key in ("snr_db", "snr-db"):
        return "P", db_to_linear(float(value))
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    typ = _FIELD_TYPES[key]
    if typ is int:
        return key, int(str(value), 0) if isinstance(value, str) else int(value)
    return key, typ(value)


def from_mapping(values: Mapping[str, Any], base: SystemConfig | None = None) -> SystemConfig:
    """Build a validated config from loose key/value pairs (``snr_db`` allowed)."""
    fields = (base or SystemConfig()).as_dict()
    for key, value in values.items():
        if value is None:
            continue
        k, v = _coerce(key, value)
        fields[k] = v
    return validate(SystemConfig(**fields))


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Read a ``key = value`` file. A ``[scenario]`` header is optional."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep M and T upper-case
    if not text.lstrip().startswith("["):
        text = "[scenario]\n" + text
    parser.read_string(text)
    section = "scenario" if parser.has_section("scenario") else parser.sections()[0]
    return dict(parser.items(section))


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Collect ``FDCAB_<FIELD>`` variables, e.g. ``FDCAB_SEED=7`` or ``FDCAB_SNR_DB=0``."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):]
        if key.lower() in ("alpha", "trials", "seed", "snr_db"):
            key = key.lower()
        elif key.lower() == "f":
            key = "f"
        elif key.upper() in ("M", "T", "P"):
            key = key.upper()
        else:
            continue
        out[key] = value
    return out


def load_config(
    path: str | os.PathLike | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> SystemConfig:
    """Defaults < config file < environment < explicit overrides."""
    merged: dict[str, Any] = {}
    layers = [
        read_config_file(path) if path is not None else {},
        env_overrides(environ),
        overrides or {},
    ]
    for layer in layers:
        for key, value in layer.items():
            if value is None:
                continue
            k, v = _coerce(key, value)
            merged[k] = v
    return from_mapping(merged)
