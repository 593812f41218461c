"""Run configuration: a flat dataclass that reads and writes ``key = value`` text."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Mapping


class ConfigError(ValueError):
    pass


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    text = str(text).strip()
    return tuple(int(v) for v in text.split(",") if v.strip()) if text else ()


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _eps(text):
    return "auto" if str(text).strip().lower() == "auto" else float(text)


_PARSERS = {"int": int, "float": float, "str": str, "bool": _bool, "tuple": _ints,
            "object": _eps}


def _coerce(type_name: str, value):
    if type_name == "int" and isinstance(value, float) and not value.is_integer():
        raise ValueError("expected an integer")
    return _PARSERS[type_name](value)


@dataclass
class RunConfig:
    seed: int = 0
    # data
    data_format: str = "synth"          # idx | csv | synth
    data_path: str = ""
    labels_path: str = ""
    csv_labels: bool = True
    subsample: int = 0                  # 0 keeps every sample
    subsample_balanced: bool = False
    synth_k: int = 3
    synth_n_per: int = 200
    synth_dim: int = 10
    synth_sep: float = 0.3
    synth_noise: float = 0.03
    # clustering
    K: int = 3
    m: float = 1.4
    M: int = 5
    fcm_tol: float = 1e-7
    fcm_max_iter: int = 300
    eta0: float = 0.5
    delta_eta: float = 0.1
    eta_cap: float = 1.0
    delta: float = 1e-5
    n_max: int = 20
    lr: float = 0.001
    batch: int = 256
    inner_epochs: int = 1
    eps_smooth: float = 0.05
    # feature extractor
    latent_dim: int = 10
    ae_hidden: tuple = (500, 100)
    pretrain_epochs: int = 100
    pretrain_batch: int = 256
    pretrain_lr: float = 0.01
    pretrain_momentum: float = 0.9
    # classifier
    clf_hidden: tuple = (256, 128)
    clf_epochs: int = 30
    clf_batch: int = 128
    clf_lr: float = 0.01
    clf_momentum: float = 0.9
    clf_fresh: bool = False
    # boundary cleaning and augmentation
    projection: str = "tsne"            # tsne | pca
    tsne_perplexity: float = 30.0
    tsne_iters: int = 500
    min_pts: int = 5
    dbscan_eps: object = "auto"
    aug_base_count: int = 1
    aug_rotation: float = 15.0
    aug_shift: float = 2.0
    aug_noise: float = 0.02
    # outputs
    checkpoints: bool = True
    dump_projections: bool = False

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            try:
                setattr(self, f.name, _coerce(f.type, value))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {f.name}: {value!r} ({exc})") from None
        problems = []
        if self.m <= 1:
            problems.append("m must be > 1")
        if not 0 < self.eta0 <= 1:
            problems.append("eta0 must be in (0, 1]")
        if self.delta <= 0:
            problems.append("delta must be > 0")
        if self.n_max < 1:
            problems.append("n_max must be >= 1")
        if self.K < 2:
            problems.append("K must be >= 2")
        if self.data_format not in ("idx", "csv", "synth"):
            problems.append("data_format must be idx, csv or synth")
        if self.projection not in ("tsne", "pca"):
            problems.append("projection must be tsne or pca")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "RunConfig":
        unknown = sorted(set(values) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown keys {unknown}; valid keys: {', '.join(cls.keys())}")
        return cls(**values)

    def replace(self, **changes) -> "RunConfig":
        return RunConfig.from_mapping({**self.as_dict(), **changes})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def snapshot(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            if isinstance(value, tuple):
                text = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def parse_lines(lines: Iterable[str]) -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = value
    return out


def load_config(path=None, overrides: Iterable[str] = ()) -> RunConfig:
    """File values first, then ``KEY=VALUE`` overrides."""
    values: dict[str, str] = {}
    if path:
        with open(path) as f:
            values.update(parse_lines(f))
    values.update(parse_lines(overrides))
    return RunConfig.from_mapping(values)
