"""Pipeline configuration: one YAML file drives every command.

Unknown keys are rejected with their dotted path; every key has a documented
default (see DEFAULT_YAML in the README). A sha256 hash of the resolved
configuration is stamped into every output manifest so reruns can be checked
for staleness.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import ModelConfig
from .motifs import BUILTIN_MOTIFS, MotifPattern
from .synth import SynthConfig
from .training import TrainConfig

__all__ = ["PipelineConfig", "load_config", "config_hash"]


@dataclass(frozen=True)
class DatasetSection:
    edges: str = ""
    features: str = ""
    labels: str = ""
    num_nodes: int = 0


@dataclass(frozen=True)
class MotifSection:
    name: str = ""
    size: int = 0
    edges: tuple = ()


@dataclass(frozen=True)
class SemanticSection:
    top_k: int = 5


@dataclass(frozen=True)
class ViewSection:
    ppr_alpha: float = 0.2
    drop_rate: float = 0.3
    dense_solve_limit: int = 5000
    sparsify_threshold: float = 1e-4
    perturb_semantic_edges: bool = False


@dataclass(frozen=True)
class ModelSection:
    dim: int = 512
    encoder_layers: int = 1
    predictor_layers: int = 1
    beta: float = 1.0
    motif_weights: tuple = ()
    prelu_init: float = 0.25


@dataclass(frozen=True)
class TrainSection:
    gamma: float = 1.0
    tau: float = 0.996
    eta_b: float = 1e-3
    n_w: int = 100
    n_total: int = 1000
    weight_decay: float = 1e-5
    fixed_augmentation: bool = False
    infonce_temperature: float = 0.5


@dataclass(frozen=True)
class AblationSection:
    uniform_w: bool = False
    no_slow: bool = False
    no_semantic_graphs: bool = False
    topk_only: bool = False
    no_L_semantic: bool = False
    no_L_holistic: bool = False


@dataclass(frozen=True)
class EvalSection:
    mode: str = "logistic"
    knn: int = 10
    smoothing: float = 1.0
    repeats: int = 5
    exact_match: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    motifs: tuple = ()
    semantic: SemanticSection = field(default_factory=SemanticSection)
    view: ViewSection = field(default_factory=ViewSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    ablation: AblationSection = field(default_factory=AblationSection)
    synth: SynthConfig = field(default_factory=SynthConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0
    out_dir: str = "runs/out"

    def motif_patterns(self) -> list[MotifPattern]:
        """Configured motifs; an empty list falls back to the built-in trio."""
        if not self.motifs:
            return [BUILTIN_MOTIFS["triangle"], BUILTIN_MOTIFS["4-clique"],
                    BUILTIN_MOTIFS["4-cycle"]]
        out = []
        for spec in self.motifs:
            if spec.edges:
                out.append(MotifPattern(
                    spec.name, spec.size,
                    tuple((int(u), int(v)) for u, v in spec.edges)))
            elif spec.name in BUILTIN_MOTIFS:
                out.append(BUILTIN_MOTIFS[spec.name])
            else:
                raise ConfigError(
                    f"motif {spec.name!r} is not built in and defines no edges")
        return out

    def model_config(self, feature_dim: int, num_semantic: int) -> ModelConfig:
        return ModelConfig(
            feature_dim=feature_dim,
            num_semantic=num_semantic,
            dim=self.model.dim,
            encoder_layers=self.model.encoder_layers,
            predictor_layers=self.model.predictor_layers,
            beta=self.model.beta,
            motif_weights=tuple(float(w) for w in self.model.motif_weights),
            prelu_init=self.model.prelu_init,
        )

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            gamma=self.train.gamma,
            tau=self.train.tau,
            eta_b=self.train.eta_b,
            n_w=self.train.n_w,
            n_total=self.train.n_total,
            weight_decay=self.train.weight_decay,
            seed=self.seed if seed is None else seed,
            drop_rate=self.view.drop_rate,
            ppr_alpha=self.view.ppr_alpha,
            fixed_augmentation=self.train.fixed_augmentation,
            perturb_semantic_edges=self.view.perturb_semantic_edges,
            infonce_temperature=self.train.infonce_temperature,
            uniform_w=self.ablation.uniform_w,
            no_slow=self.ablation.no_slow,
            no_semantic_graphs=self.ablation.no_semantic_graphs,
            topk_only=self.ablation.topk_only,
            no_L_semantic=self.ablation.no_L_semantic,
            no_L_holistic=self.ablation.no_L_holistic,
        )


def _coerce(value, target_type, path: str):
    origin = getattr(target_type, "__origin__", None)
    if dataclasses.is_dataclass(target_type):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return _from_dict(target_type, value, path)
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if target_type is tuple or origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    raise ConfigError(f"{path}: unsupported config type {target_type}")


def _from_dict(cls, data: dict, path: str = ""):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        where = path or "top level"
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {where}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        sub_path = f"{path}.{name}" if path else name
        value = data[name]
        if name == "motifs":
            if not isinstance(value, list):
                raise ConfigError(f"{sub_path}: expected a list of motif mappings")
            kwargs[name] = tuple(
                _from_dict(MotifSection, item, f"{sub_path}[{i}]")
                for i, item in enumerate(value))
            continue
        kwargs[name] = _coerce(value, _resolve(f), sub_path)
    return cls(**kwargs)


def _resolve(f) -> type:
    # annotations are strings here (future annotations); every field carries
    # a default, so its concrete type is authoritative
    if f.default is not dataclasses.MISSING:
        return type(f.default)
    return type(f.default_factory())


def load_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Load and validate a YAML config; ``overrides`` (e.g. from CLI flags)
    replace top-level scalar keys after the file is parsed."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = loaded
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return _from_dict(PipelineConfig, data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(cfg: PipelineConfig) -> str:
    """Stable sha256 of the fully resolved configuration."""
    payload = json.dumps(dataclasses.asdict(cfg), sort_keys=True, default=list)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
