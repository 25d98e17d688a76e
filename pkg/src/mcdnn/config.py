"""Plain-text ``key = value`` run configuration.

Blank lines and lines starting with ``#`` are ignored. Unknown keys are
an error. Example::

    descriptor = 1x29x29-20C4-MP2-40C5-MP3-150N-10N
    train = mnist/train-images-idx3-ubyte,mnist/train-labels-idx1-ubyte
    preprocessors = W10; W12; W14; W16; W18; W20; pad(29,29)
    columns = 5
    eta_start = 0.001
    eta_factor = 0.993
    eta_min = 0.00003
    max_epochs = 800
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .augment import DistortionParams
from .descriptor import parse_descriptor
from .preprocess import parse_chain
from .trainer import TrainConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


def _fill(v: str):
    return v if v == "edge" else float(v)


def _optional_float(v: str):
    return None if v.lower() in ("", "none") else float(v)


# key -> (parser, default)
KEYS = {
    "descriptor": (str, None),
    "train": (str, None),
    "validation": (str, ""),
    "test": (str, ""),
    "train_limit": (int, 0),
    "preprocessors": (str, "original"),
    "columns": (int, 1),
    "eta_start": (float, 0.001),
    "eta_factor": (float, 0.993),
    "eta_min": (float, 0.00003),
    "max_epochs": (int, 800),
    "seed": (int, 0),
    "max_translate": (float, 0.0),
    "max_rotate": (float, 0.0),
    "max_scale": (float, 0.0),
    "elastic_sigma": (_optional_float, None),
    "elastic_alpha": (float, 0.0),
    "fill": (_fill, -1.0),
    "validation_fraction": (float, 0.1),
    "threads": (int, 1),
    "output": (str, "models"),
}
REQUIRED = ("descriptor", "train")


@dataclass
class RunConfig:
    values: dict
    text: str = ""
    base: Path = field(default_factory=Path)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def path(self, key: str) -> str:
        """Dataset-style path value with relative parts resolved against the config file."""
        raw = self.values[key]
        parts = []
        for p in raw.split(","):
            p = Path(p.strip())
            parts.append(str(p if p.is_absolute() else self.base / p))
        return ",".join(parts)

    @property
    def chains(self) -> list[str]:
        return [c.strip() for c in self.values["preprocessors"].split(";") if c.strip()]

    @property
    def distortion(self) -> DistortionParams:
        v = self.values
        return DistortionParams(v["max_translate"], v["max_rotate"], v["max_scale"],
                                v["elastic_sigma"], v["elastic_alpha"], v["fill"])

    def train_config(self, seed: int) -> TrainConfig:
        v = self.values
        return TrainConfig(v["eta_start"], v["eta_factor"], v["eta_min"], v["max_epochs"], seed,
                           self.distortion, v["validation_fraction"])


def parse_config(text: str, base=".") -> RunConfig:
    values = {k: d for k, (_, d) in KEYS.items()}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError("unknown key", lineno, key)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", lineno, key)
        seen[key] = lineno
        try:
            values[key] = KEYS[key][0](value)
        except ValueError as e:
            raise ConfigError(f"bad value {value!r}: {e}", lineno, key) from None

    for key in REQUIRED:
        if not values[key]:
            raise ConfigError("missing required key", None, key)
    cfg = RunConfig(values, text, Path(base))

    def check(key, fn):
        try:
            fn()
        except ValueError as e:
            raise ConfigError(str(e), seen.get(key), key) from None

    check("descriptor", lambda: parse_descriptor(values["descriptor"]))
    for chain in cfg.chains:
        check("preprocessors", lambda: parse_chain(chain))
    if not cfg.chains:
        raise ConfigError("no preprocessors listed", seen.get("preprocessors"), "preprocessors")
    if values["columns"] < 1:
        raise ConfigError("must be >= 1", seen.get("columns"), "columns")
    if values["threads"] < 1:
        raise ConfigError("must be >= 1", seen.get("threads"), "threads")
    if values["train_limit"] < 0:
        raise ConfigError("must be >= 0", seen.get("train_limit"), "train_limit")
    check("max_translate", lambda: cfg.distortion)
    check("eta_start", lambda: cfg.train_config(values["seed"]))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base=path.parent)
