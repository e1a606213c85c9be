"""Run configuration in a flat ``key = value`` text format.

Precedence is command-line flags, then ``--set`` overrides, then the config
file, then the defaults below. Environment variables are never consulted
(``WCT_SEED`` included), so a run is fully described by its config echo.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(" ", "").split(",") if p)


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


# key -> (parser, default); order here is the order of the config echo
DEFAULTS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "seed": (int, 0),
    "block.size": (int, 32),
    "block.stride": (int, 32),
    "glcm.distance": (int, 1),
    "glcm.angles": (_int_tuple, (0, 45, 90, 135)),
    "glcm.levels": (int, 64),
    "features.include_level1": (_bool, False),
    "experiment.domain": (str, "wavelet"),
    "experiment.classifier": (str, "svm"),
    "experiment.selection": (str, "ga"),
    "experiment.subset": (_int_tuple, ()),
    "cv.scheme": (str, "kfold"),
    "cv.folds": (int, 10),
    "cv.stratified": (_bool, True),
    "ga.population_size": (int, 30),
    "ga.crossover_prob": (float, 1.0),
    "ga.mutation_rate": (float, 0.1),
    "ga.penalty_w": (float, 0.5),
    "ga.target_size": (int, 4),
    "ga.generations": (int, 100),
    "ga.penalty_mode": (str, "signed"),
    "ga.inner_folds": (int, 5),
    "svm.kernel": (str, "gaussian"),
    "svm.gamma": (float, 1.0),
    "svm.degree": (int, 3),
    "svm.coef0": (float, 1.0),
    "svm.C": (float, 10.0),
    "svm.tol": (float, 1e-3),
    "svm.max_passes": (int, 20),
    "bpn.learning_rate": (float, 0.4),
    "bpn.momentum": (float, 0.2),
    "bpn.target_error": (float, 0.01),
    "bpn.max_epochs": (int, 5000),
    "bpn.init_range": (float, 0.5),
    "bpn.hidden": (int, 0),  # 0 means 2 * inputs + 1
    "synth.n_normal": (int, 50),
    "synth.n_abnormal": (int, 50),
    "synth.size": (int, 128),
}


@dataclass(frozen=True)
class Config:
    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in DEFAULTS.items()})

    def __getitem__(self, key: str):
        return self.values[key]

    def with_values(self, **overrides) -> Config:
        """Override by key; dots in keys are written as double underscores (``svm__C``)."""
        merged = dict(self.values)
        for raw, value in overrides.items():
            key = raw.replace("__", ".")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            if value is not None:
                merged[key] = value
        return Config(merged)

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in DEFAULTS)


def parse_config(text: str, source: str = "<config>") -> Config:
    values = {k: d for k, (_, d) in DEFAULTS.items()}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        try:
            values[key] = DEFAULTS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{line_no}: bad value for {key}: {exc}") from exc
    return Config(values)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc.strerror or exc}") from exc
    return parse_config(text, str(p))
