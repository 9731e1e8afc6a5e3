"""Experiment configuration: INI files with dotted section names.

Example::

    [experiment]
    seed = 0
    model = lenet5
    dtype = float32
    probe_size = 5000

    [data]
    kind = mnist
    path = data/mnist

    [train]
    mode = adversarial
    epochs = 20

    [attack]
    epsilon = 45/255
    alpha = 8/255
    steps = 7

    [estimator.kde]
    sigma2 = auto

Numbers accept fractions (``45/255``); lists are comma separated; ``auto``
selects the batch-relative default for the estimator scales. Unknown
sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .attacks import AttackConfig
from .training import TrainConfig

PROFILES = {"desk": {"epochs": 20}, "paper": {"epochs": 200}}


@dataclass(frozen=True)
class DataConfig:
    kind: str = "mnist"  # mnist | blobs
    path: str = "data/mnist"
    train_limit: int = 0  # 0 keeps the full split
    test_limit: int = 0
    n_per_class: int = 200
    classes: int = 2
    dim: int = 2
    separation: float = 10.0
    test_per_class: int = 100


@dataclass(frozen=True)
class EstimatorConfig:
    estimators: tuple[str, ...] = ("kde_lower", "kde_upper", "binning")
    sigma2: float | None = None  # None: sigma2_factor * mean coordinate variance
    sigma2_factor: float = 0.1
    bin_size: float | None = None  # None: batch range / bins
    bins: int = 30


@dataclass(frozen=True)
class SweepConfig:
    saturation: tuple[float, ...] = (2, 8, 16, 64, 1024)
    patch_grids: tuple[int, ...] = (0, 2, 4, 8)
    bounds: tuple[str, ...] = ("lower",)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    model: str = "lenet5"
    dtype: str = "float32"
    probe_size: int = 5000
    eval_batch: int = 500
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    attack: AttackConfig = field(default_factory=lambda: AttackConfig(45 / 255, 8 / 255, 7, random_start=True))
    eval_random_start: bool = False
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def with_profile(self, profile: str) -> "ExperimentConfig":
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        return replace(self, train=replace(self.train, **PROFILES[profile]))

    @property
    def eval_attack(self) -> AttackConfig:
        return replace(self.attack, random_start=self.eval_random_start)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {k: _fmt(getattr(self, k)) for k in _TOP_KEYS}
        for section, (attr, _) in _SECTIONS.items():
            obj = getattr(self, attr)
            keys = _SECTION_KEYS.get(section, [f.name for f in fields(obj)])
            cp[section] = {k: _fmt(getattr(obj, _KEY_ALIASES.get((section, k), k))) for k in keys}
        cp["attack"]["eval_random_start"] = _fmt(self.eval_random_start)
        from io import StringIO

        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


_TOP_KEYS = ["seed", "model", "dtype", "probe_size", "eval_batch"]
_SECTIONS = {
    "data": ("data", DataConfig),
    "train": ("train", TrainConfig),
    "attack": ("attack", AttackConfig),
    "estimator.kde": ("estimator", EstimatorConfig),
    "estimator.binning": ("estimator", EstimatorConfig),
    "estimator": ("estimator", EstimatorConfig),
    "sweep": ("sweep", SweepConfig),
}
_SECTION_KEYS = {
    "estimator.kde": ["sigma2", "sigma2_factor"],
    "estimator.binning": ["bin_size", "bins"],
    "estimator": ["estimators"],
}
_KEY_ALIASES: dict[tuple[str, str], str] = {}


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse_number(text: str) -> float:
    return float(Fraction(text.strip()))


def _coerce(text: str, like, name: str):
    text = text.strip()
    if isinstance(like, bool):
        if text.lower() not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"{name}: expected a boolean, got {text!r}")
        return text.lower() in ("true", "yes", "1")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return _parse_number(text)
    if isinstance(like, tuple):
        parts = [p for p in (s.strip() for s in text.split(",")) if p]
        if like and isinstance(like[0], (int, float)) and not isinstance(like[0], bool):
            return tuple(_parse_number(p) if isinstance(like[0], float) or "." in p or "/" in p else int(p) for p in parts)
        if name.endswith("milestones"):
            return tuple(int(p) for p in parts)
        return tuple(parts)
    if like is None:
        return None if text.lower() == "auto" else _parse_number(text)
    return text


def parse_ini(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    top = {}
    updates: dict[str, dict] = {}
    for section in cp.sections():
        items = dict(cp[section])
        if section == "experiment":
            for k, v in items.items():
                if k not in _TOP_KEYS:
                    raise KeyError(f"[experiment] unknown key {k!r}")
                top[k] = _coerce(v, getattr(cfg, k), k)
            continue
        if section not in _SECTIONS:
            raise KeyError(f"unknown section [{section}]")
        attr, _ = _SECTIONS[section]
        current = getattr(cfg, attr)
        allowed = _SECTION_KEYS.get(section, [f.name for f in fields(current)])
        for k, v in items.items():
            if section == "attack" and k == "eval_random_start":
                top["eval_random_start"] = _coerce(v, True, k)
                continue
            if k not in allowed:
                raise KeyError(f"[{section}] unknown key {k!r}")
            like = getattr(current, k)
            if k in ("sigma2", "bin_size"):
                like = None
            updates.setdefault(attr, {})[k] = _coerce(v, like, f"{section}.{k}")
    for attr, kv in updates.items():
        top[attr] = replace(getattr(cfg, attr), **kv)
    return replace(cfg, **top)


def load_config(path=None, profile: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Defaults, then the profile, then the file, then explicit overrides."""
    cfg = ExperimentConfig()
    if profile:
        cfg = cfg.with_profile(profile)
    if path:
        cfg = parse_ini(Path(path).read_text(), cfg)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg
