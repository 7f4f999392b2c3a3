"""Run configuration: a flat INI file with one section per module."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import DataError, InvalidConfig
from .eval import LENGTH_SWEEP_DEPTHS, SWEEP_LENGTHS_MS
from .lld import FEATURE_SETS
from .nn_core import SWEEP_DEPTHS, ModelConfig
from .train import TrainConfig

DEFAULT_CONFIG = """\
[data]
manifest = manifest.csv
feature_set = IS10
# empty: transcript utterances; a number: fixed windows of that many ms
length_ms =
cache_dir =

[model]
arch = gcnn
depth = 8
kernels = 64
# empty: 3 for cnn, 2 for gcnn
window =
hidden = 256
dropout = 0.5

[train]
max_epochs = 200
batch_size = 32
learning_rate = 0.001
# empty: early stopping off
early_stop_patience =
validation_fraction = 0.1
seed = 0
standardize = true

[cv]
k = 10
fold_seed = 0
threads = 1

[sweep]
archs = cnn,gcnn
depths = 1,2,3,4,6,8,10
lengths_ms = 500,1000,2000,4000,4295
length_depths = 6,8,10
feature_sets = IS09,IS10
smo = true
smo_mode = utterance

[output]
dir = run
"""


def _opt(value: str):
    value = value.strip()
    return None if value == "" or value.lower() == "none" else value


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(",") if v.strip())


@dataclass
class SweepConfig:
    archs: tuple[str, ...] = ("cnn", "gcnn")
    depths: tuple[int, ...] = SWEEP_DEPTHS
    lengths_ms: tuple[float, ...] = SWEEP_LENGTHS_MS
    length_depths: tuple[int, ...] = LENGTH_SWEEP_DEPTHS
    feature_sets: tuple[str, ...] = ("IS09", "IS10")
    smo: bool = True
    smo_mode: str = "utterance"


@dataclass
class RunConfig:
    manifest: Path
    feature_set: str = "IS10"
    length_ms: float | None = None
    cache_dir: Path | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    k: int = 10
    fold_seed: int = 0
    threads: int = 1
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: Path = Path("run")

    def validate(self, need_manifest: bool = True) -> "RunConfig":
        if self.feature_set not in FEATURE_SETS:
            raise InvalidConfig(f"feature_set must be one of {sorted(FEATURE_SETS)}")
        if self.length_ms is not None and self.length_ms <= 0:
            raise InvalidConfig("length_ms must be positive")
        if self.k < 2:
            raise InvalidConfig("k must be >= 2")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        if self.sweep.smo_mode not in ("utterance", "subject"):
            raise InvalidConfig("smo_mode must be 'utterance' or 'subject'")
        for fs in self.sweep.feature_sets:
            if fs not in FEATURE_SETS:
                raise InvalidConfig(f"unknown feature set in sweep: {fs}")
        self.model.validate()
        if need_manifest and not Path(self.manifest).is_file():
            raise DataError(f"manifest not found: {self.manifest}")
        return self

    @property
    def cache(self) -> Path:
        return self.cache_dir if self.cache_dir is not None else self.output_dir / "cache"

    def to_dict(self) -> dict:
        return {
            "data": {
                "manifest": Path(self.manifest).name,
                "feature_set": self.feature_set,
                "length_ms": self.length_ms,
            },
            "model": self.model.to_dict(),
            "train": asdict(self.train),
            "cv": {"k": self.k, "fold_seed": self.fold_seed},
            "sweep": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.sweep).items()},
        }

    def hash(self) -> str:
        """Hash of everything that affects results (threads and paths to outputs excluded)."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def parse_config(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=None)
    cp.read_string(DEFAULT_CONFIG)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfig(f"malformed config: {exc}") from exc
    known = configparser.ConfigParser()
    known.read_string(DEFAULT_CONFIG)
    for section in cp.sections():
        if not known.has_section(section):
            raise InvalidConfig(f"unknown config section [{section}]")
        for key in cp[section]:
            if not known.has_option(section, key):
                raise InvalidConfig(f"unknown config key {section}.{key}")
    base = Path(base_dir)
    try:
        d, m, t, cv, sw, out = (cp[s] for s in ("data", "model", "train", "cv", "sweep", "output"))
        window = _opt(m["window"])
        patience = _opt(t["early_stop_patience"])
        length = _opt(d["length_ms"])
        cache = _opt(d["cache_dir"])
        model = ModelConfig(
            arch=m["arch"].strip(),
            depth=int(m["depth"]),
            kernels=int(m["kernels"]),
            window=int(window) if window else None,
            hidden=int(m["hidden"]),
            dropout=float(m["dropout"]),
        )
        train = TrainConfig(
            max_epochs=int(t["max_epochs"]),
            batch_size=int(t["batch_size"]),
            learning_rate=float(t["learning_rate"]),
            early_stop_patience=int(patience) if patience else None,
            validation_fraction=float(t["validation_fraction"]),
            seed=int(t["seed"]),
            standardize=t.getboolean("standardize"),
        )
        sweep = SweepConfig(
            archs=tuple(a.strip() for a in sw["archs"].split(",") if a.strip()),
            depths=_ints(sw["depths"]),
            lengths_ms=tuple(float(v) for v in sw["lengths_ms"].split(",") if v.strip()),
            length_depths=_ints(sw["length_depths"]),
            feature_sets=tuple(v.strip() for v in sw["feature_sets"].split(",") if v.strip()),
            smo=sw.getboolean("smo"),
            smo_mode=sw["smo_mode"].strip(),
        )
        return RunConfig(
            manifest=base / d["manifest"].strip(),
            feature_set=d["feature_set"].strip(),
            length_ms=float(length) if length else None,
            cache_dir=base / cache if cache else None,
            model=model,
            train=train,
            k=int(cv["k"]),
            fold_seed=int(cv["fold_seed"]),
            threads=int(cv["threads"]),
            sweep=sweep,
            output_dir=base / out["dir"].strip(),
        )
    except ValueError as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(f"bad config value: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"config file not found: {path}")
    return parse_config(path.read_text(), path.parent)


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Apply command-line overrides; ``None`` values are ignored."""
    model, train = cfg.model, cfg.train
    if kw.get("arch") is not None:
        model = replace(model, arch=kw["arch"], window=None)
    if kw.get("depth") is not None:
        model = replace(model, depth=kw["depth"])
    if kw.get("seed") is not None:
        train = replace(train, seed=kw["seed"])
        cfg = replace(cfg, fold_seed=kw["seed"])
    cfg = replace(cfg, model=model, train=train)
    if kw.get("feature_set") is not None:
        cfg = replace(cfg, feature_set=kw["feature_set"])
    if kw.get("length_ms") is not None:
        cfg = replace(cfg, length_ms=float(kw["length_ms"]))
    if kw.get("threads") is not None:
        cfg = replace(cfg, threads=kw["threads"])
    return cfg
