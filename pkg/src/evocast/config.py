"""Run configuration: a flat ``key = value`` text format, defaults, and
validation. CLI flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError

ABLATION_FLAGS = ("no_alignment", "no_fusion", "no_ice", "no_global_graph", "no_temporal_loss")


@dataclass
class RunConfig:
    train_path: str = ""
    valid_path: str = ""
    test_path: str = ""
    dim: int = 200
    learning_rate: float = 0.01
    batch_size: int = 16
    n_clusters: int = 6
    n_layers: int = 2
    window: int = 7
    lambda_weight: float = 0.2
    beta: float = 0.5
    fuzzifier: float = 2.0
    cluster_tol: float = 1e-6
    cluster_max_iter: int = 100
    decoder_channels: int = 50
    decoder_kernel: int = 3
    dropout: float = 0.2
    seed: int = 0
    epochs: int = 30
    patience: int = 10
    dtype: str = "float32"
    out_dir: str = "runs"
    ablation: tuple[str, ...] = field(default_factory=tuple)

    def validate(self) -> None:
        if not 0.0 <= self.lambda_weight <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_weight}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.fuzzifier <= 1.0:
            raise ConfigError("fuzzifier must be > 1")
        for name in (
            "dim",
            "batch_size",
            "n_clusters",
            "n_layers",
            "window",
            "cluster_max_iter",
            "decoder_channels",
            "decoder_kernel",
            "epochs",
            "patience",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.cluster_tol <= 0:
            raise ConfigError("learning_rate and cluster_tol must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype}")
        for flag in self.ablation:
            if flag not in ABLATION_FLAGS:
                raise ConfigError(
                    f"unknown ablation flag {flag!r}; valid: {', '.join(ABLATION_FLAGS)}"
                )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            key = "lambda" if f.name == "lambda_weight" else f.name
            if f.name == "ablation":
                value = ",".join(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


_KEY_TO_FIELD = {("lambda" if f.name == "lambda_weight" else f.name): f.name for f in fields(RunConfig)}


def parse_ablation(raw: str) -> tuple[str, ...]:
    flags = tuple(part.strip().lower() for part in raw.split(",") if part.strip())
    for flag in flags:
        if flag not in ABLATION_FLAGS:
            raise ConfigError(f"unknown ablation flag {flag!r}; valid: {', '.join(ABLATION_FLAGS)}")
    return flags


def config_from_pairs(pairs: dict[str, str]) -> RunConfig:
    cfg = RunConfig()
    type_map = {f.name: f.type for f in fields(RunConfig)}
    for key, raw in pairs.items():
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"unknown config key {key!r}")
        name = _KEY_TO_FIELD[key]
        if name == "ablation":
            setattr(cfg, name, parse_ablation(raw))
            continue
        kind = type_map[name]
        try:
            if kind == "int":
                setattr(cfg, name, int(raw))
            elif kind == "float":
                setattr(cfg, name, float(raw))
            else:
                setattr(cfg, name, raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} has invalid value {raw!r}") from None
    cfg.validate()
    return cfg


def parse_kv_file(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, raw = stripped.partition("=")
            pairs[key.strip()] = raw.strip()
    return pairs


def load_config(path: str) -> RunConfig:
    return config_from_pairs(parse_kv_file(path))
