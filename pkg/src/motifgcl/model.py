"""Semantic-wise encoder stack: one GCN per structure, a weighted combiner,
per-index projectors, and (online network only) per-index predictors.

The online and target networks share this architecture; the target never
carries a predictor and its forward records no gradients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import ContractViolation, InputDataError
from .graphs import SparseGraph

__all__ = [
    "ModelConfig",
    "EncodedBundle",
    "Network",
    "normalize_structure",
    "gcn_encode",
    "combine",
    "project",
    "predict",
    "init_params",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters shared by both networks."""

    feature_dim: int
    num_semantic: int                 # number of semantic structures per view
    dim: int = 512
    encoder_layers: int = 1
    predictor_layers: int = 1
    beta: float = 1.0
    motif_weights: tuple[float, ...] = ()
    prelu_init: float = 0.25

    def __post_init__(self):
        if self.motif_weights and len(self.motif_weights) != self.num_semantic:
            raise InputDataError(
                f"{len(self.motif_weights)} motif weights for "
                f"{self.num_semantic} semantic graphs")

    def weights(self) -> tuple[float, ...]:
        if self.motif_weights:
            return self.motif_weights
        if self.num_semantic == 0:
            return ()
        return (1.0 / self.num_semantic,) * self.num_semantic


@dataclass
class EncodedBundle:
    """Per-view outputs: embeddings Z_0..Z_{T+1} (holistic, semantics,
    combined), their projections, and the online network's predictions."""

    embeddings: list[Tensor]
    projected: list[Tensor]
    predicted: list[Tensor] | None


def normalize_structure(struct: SparseGraph | np.ndarray):
    """Self-loops plus two-sided degree normalization for the propagation
    step: D_row^{-1/2} (S + I) D_col^{-1/2}.

    Row and column degrees are tracked separately so asymmetric (row-wise
    top-k) structures normalize sensibly; for symmetric inputs this is the
    usual symmetric normalization. Nonpositive degrees scale to zero.
    """

    def inv_sqrt(d: np.ndarray) -> np.ndarray:
        out = np.zeros_like(d)
        pos = d > 0
        out[pos] = 1.0 / np.sqrt(d[pos])
        return out

    if isinstance(struct, SparseGraph):
        mat = struct.to_scipy() + sp.identity(struct.n, format="csr")
        dr = inv_sqrt(np.asarray(mat.sum(axis=1)).ravel())
        dc = inv_sqrt(np.asarray(mat.sum(axis=0)).ravel())
        return SparseGraph.from_scipy(sp.diags(dr) @ mat @ sp.diags(dc))
    mat = np.asarray(struct, dtype=np.float64) + np.eye(struct.shape[0])
    dr = inv_sqrt(mat.sum(axis=1))
    dc = inv_sqrt(mat.sum(axis=0))
    return dr[:, None] * mat * dc[None, :]


def gcn_encode(
    structure,
    features: Tensor,
    layer_params: Sequence[tuple[Tensor, Tensor]],
    normalized: bool = False,
) -> Tensor:
    """Stacked propagation layers: H <- act(S_norm @ H @ W) per layer.

    ``layer_params`` holds (weight, activation slope) per layer. Pass
    ``normalized=True`` when the structure was normalized up front (the
    trainer does this once instead of every step).
    """
    if not normalized:
        structure = normalize_structure(structure)
    h = features
    for weight, slope in layer_params:
        h = ad.prelu(ad.spmm(structure, ad.matmul(h, weight)), slope)
    return h


def combine(
    holistic: Tensor,
    semantics: Sequence[Tensor],
    weights: Sequence[float],
    beta: float,
) -> Tensor:
    """Weighted sum of semantic embeddings folded onto the holistic one:
    beta * sum_i w_i Z_i + Z_0."""
    if len(semantics) != len(weights):
        raise ContractViolation(
            f"{len(semantics)} semantic embeddings vs {len(weights)} weights")
    out = holistic
    for z, w in zip(semantics, weights):
        out = ad.add(out, ad.scale(z, beta * w))
    return out


def project(z: Tensor, weight: Tensor, bias: Tensor, slope: Tensor) -> Tensor:
    """Single nonlinear projection layer."""
    return ad.prelu(ad.add_bias(ad.matmul(z, weight), bias), slope)


def predict(q: Tensor, layer_params: Sequence[tuple[Tensor, Tensor, Tensor]]) -> Tensor:
    """Stacked prediction layers (online network's asymmetric head)."""
    h = q
    for weight, bias, slope in layer_params:
        h = ad.prelu(ad.add_bias(ad.matmul(h, weight), bias), slope)
    return h


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(cfg: ModelConfig, rng: np.random.Generator,
                with_predictor: bool) -> dict[str, np.ndarray]:
    """Fresh parameter values in a deterministic creation order."""
    t = cfg.num_semantic
    values: dict[str, np.ndarray] = {}
    for i in range(t + 1):
        d_in = cfg.feature_dim
        for layer in range(cfg.encoder_layers):
            values[f"enc{i}/layer{layer}/weight"] = _glorot(rng, d_in, cfg.dim)
            values[f"enc{i}/layer{layer}/slope"] = np.full((1, 1), cfg.prelu_init)
            d_in = cfg.dim
    for i in range(t + 2):
        values[f"proj{i}/weight"] = _glorot(rng, cfg.dim, cfg.dim)
        values[f"proj{i}/bias"] = np.zeros((1, cfg.dim))
        values[f"proj{i}/slope"] = np.full((1, 1), cfg.prelu_init)
    if with_predictor:
        for i in range(t + 2):
            for layer in range(cfg.predictor_layers):
                values[f"pred{i}/layer{layer}/weight"] = _glorot(rng, cfg.dim, cfg.dim)
                values[f"pred{i}/layer{layer}/bias"] = np.zeros((1, cfg.dim))
                values[f"pred{i}/layer{layer}/slope"] = np.full((1, 1), cfg.prelu_init)
    return values


@dataclass
class Network:
    """One of the two training networks: parameter values plus role.

    The online network's forward mounts parameters as differentiable leaves;
    the target network's forward mounts constants, so nothing it computes is
    recorded on the tape (stop-gradient by construction).
    """

    cfg: ModelConfig
    values: dict[str, np.ndarray]
    role: str  # "online" | "target"

    def __post_init__(self):
        if self.role not in ("online", "target"):
            raise ContractViolation(f"unknown network role {self.role!r}")
        if self.role == "target" and any(k.startswith("pred") for k in self.values):
            raise ContractViolation("target network must not carry predictor parameters")

    @staticmethod
    def initialize(cfg: ModelConfig, rng: np.random.Generator, role: str) -> "Network":
        return Network(cfg, init_params(cfg, rng, with_predictor=role == "online"), role)

    def mount(self, tape: Tape) -> dict[str, Tensor]:
        wrap = tape.leaf if self.role == "online" else tape.constant
        return {name: wrap(value) for name, value in self.values.items()}

    def forward(
        self,
        features: np.ndarray,
        structures: Sequence,
        tape: Tape,
        normalized: bool = False,
        params: dict[str, Tensor] | None = None,
    ) -> tuple[EncodedBundle, dict[str, Tensor]]:
        """Encode every structure, combine, project, and (online) predict.

        Pass ``params`` (a previous ``mount`` result) to run several forwards
        against the same leaves so their gradients accumulate together.
        """
        t = self.cfg.num_semantic
        if len(structures) != t + 1:
            raise ContractViolation(
                f"expected {t + 1} structures, got {len(structures)}")
        if params is None:
            params = self.mount(tape)
        x = tape.constant(features)
        embeddings = []
        for i, structure in enumerate(structures):
            layer_params = [
                (params[f"enc{i}/layer{l}/weight"], params[f"enc{i}/layer{l}/slope"])
                for l in range(self.cfg.encoder_layers)
            ]
            embeddings.append(gcn_encode(structure, x, layer_params, normalized=normalized))
        embeddings.append(
            combine(embeddings[0], embeddings[1:], self.cfg.weights(), self.cfg.beta))
        projected = [
            project(z, params[f"proj{i}/weight"], params[f"proj{i}/bias"],
                    params[f"proj{i}/slope"])
            for i, z in enumerate(embeddings)
        ]
        predicted = None
        if self.role == "online":
            predicted = [
                predict(q, [
                    (params[f"pred{i}/layer{l}/weight"],
                     params[f"pred{i}/layer{l}/bias"],
                     params[f"pred{i}/layer{l}/slope"])
                    for l in range(self.cfg.predictor_layers)
                ])
                for i, q in enumerate(projected)
            ]
        return EncodedBundle(embeddings, projected, predicted), params

    def encode_combined(self, features: np.ndarray, structures: Sequence,
                        normalized: bool = False) -> np.ndarray:
        """Inference pass: the combined embedding only, no gradient state."""
        frozen = Network(
            self.cfg,
            {k: v for k, v in self.values.items() if not k.startswith("pred")},
            "target")
        bundle, _ = frozen.forward(features, structures, Tape(), normalized=normalized)
        return bundle.embeddings[-1].value


def save_params(values: dict[str, np.ndarray], path_prefix: str | Path) -> None:
    """Write a flat little-endian float64 blob plus a JSON manifest of
    names/shapes/offsets (``<prefix>.bin`` / ``<prefix>.json``)."""
    prefix = Path(path_prefix)
    names = sorted(values)
    manifest = {"dtype": "<f8", "entries": []}
    offset = 0
    with open(prefix.with_suffix(".bin"), "wb") as fh:
        for name in names:
            arr = np.ascontiguousarray(values[name], dtype="<f8")
            fh.write(arr.tobytes())
            manifest["entries"].append(
                {"name": name, "shape": list(arr.shape), "offset": offset})
            offset += arr.size
    with open(prefix.with_suffix(".json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_params(path_prefix: str | Path) -> dict[str, np.ndarray]:
    prefix = Path(path_prefix)
    with open(prefix.with_suffix(".json")) as fh:
        manifest = json.load(fh)
    flat = np.fromfile(prefix.with_suffix(".bin"), dtype=manifest["dtype"])
    values = {}
    for entry in manifest["entries"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        chunk = flat[entry["offset"]:entry["offset"] + size]
        values[entry["name"]] = chunk.reshape(entry["shape"]).astype(np.float64)
    return values
