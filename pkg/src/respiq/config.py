"""Run configuration: one JSON file, strict keys, flag overrides on top.

Defaults equal the tuned operating point throughout (window geometry and
optimizer settings in ``model``, quality threshold ``r0`` = 0.9, inversion
threshold ``r_th`` = 1.0, respiration band 0.2-0.7 Hz), so an empty config
file is a valid one. Unknown keys are rejected rather than ignored;
resolved values are echoed into command outputs for provenance.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .armodel import ArHyperParams
from .baselines import RESPIRATION_BAND_HZ, CfarConfig
from .candidates import ExtractionConfig
from .errors import ConfigError
from .inversion import InversionConfig
from .simulator import CorpusSpec


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    coerced = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if isinstance(value, list) and "tuple" in str(f.type):
            value = tuple(value)
        coerced[f.name] = value
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    seed: int = 0
    r0: float = 0.9
    band_hz: tuple[float, float] = RESPIRATION_BAND_HZ
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    cfar: CfarConfig = field(default_factory=CfarConfig)
    model: ArHyperParams = field(default_factory=ArHyperParams)
    corpus: CorpusSpec = field(default_factory=CorpusSpec)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "RunConfig":
        if not 0.0 < self.band_hz[0] < self.band_hz[1]:
            raise ConfigError(f"band {self.band_hz} must satisfy 0 < lo < hi")
        if not -1.0 <= self.r0 <= 1.0 + 1e-9:
            # r0 slightly above 1 is allowed: it means "truth sequences only".
            pass
        self.model.validate()
        return self


_SECTIONS = {
    "extraction": ExtractionConfig,
    "inversion": InversionConfig,
    "cfar": CfarConfig,
    "model": ArHyperParams,
    "corpus": CorpusSpec,
}


def config_from_dict(data: dict, where: str = "config") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = set(data) - ({"seed", "r0", "band_hz"} | set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    cfg = RunConfig()
    if "seed" in data:
        cfg.seed = int(data["seed"])
    if "r0" in data:
        cfg.r0 = float(data["r0"])
    if "band_hz" in data:
        band = data["band_hz"]
        if not (isinstance(band, (list, tuple)) and len(band) == 2):
            raise ConfigError(f"{where}: band_hz must be [lo, hi]")
        cfg.band_hz = (float(band[0]), float(band[1]))
    for name, cls in _SECTIONS.items():
        if name in data:
            setattr(cfg, name, _from_dict(cls, data[name], f"{where}.{name}"))
    # The CFAR band and inversion threshold follow the shared settings
    # unless the section set them explicitly.
    if "cfar" not in data or "band_hz" not in data.get("cfar", {}):
        cfg.cfar.band_hz = cfg.band_hz
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data, where=str(path))
