"""Bootstrap-style training: symmetrized negative-free cosine objectives,
AdamW on the online network, slow-moving-average target updates, and a
warmup-plus-cosine learning-rate schedule.

The ``no_slow`` ablation swaps the whole mechanism for a temperature-scaled
softmax contrastive loss with all other nodes as negatives (an approximation;
the variant is defined only loosely). Structure ablations substitute the
semantic graphs before any encoding happens.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import ContractViolation, InputDataError, NumericError
from .graphs import SparseGraph
from .model import EncodedBundle, ModelConfig, Network, normalize_structure
from .semantic import SemanticGraphSet, dense_topk_cosine
from .views import edge_dropout, feature_dropout, step_rng, view_structures

__all__ = [
    "TrainConfig",
    "TrainResult",
    "cosine_pair_loss",
    "joint_loss",
    "symmetrized_loss",
    "infonce_loss",
    "ema_update",
    "lr_schedule",
    "AdamW",
    "train",
]


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of the optimization loop, ablation switches included."""

    gamma: float = 1.0
    tau: float = 0.996
    eta_b: float = 1e-3
    n_w: int = 100
    n_total: int = 1000
    weight_decay: float = 1e-5
    seed: int = 0
    drop_rate: float = 0.3
    ppr_alpha: float = 0.2
    fixed_augmentation: bool = False
    perturb_semantic_edges: bool = False
    infonce_temperature: float = 0.5
    # ablation switches
    uniform_w: bool = False
    no_slow: bool = False
    no_semantic_graphs: bool = False
    topk_only: bool = False
    no_L_semantic: bool = False
    no_L_holistic: bool = False

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise InputDataError(f"tau must lie in [0, 1], got {self.tau}")
        if self.n_w > self.n_total:
            raise InputDataError(f"warmup {self.n_w} exceeds total steps {self.n_total}")
        if self.gamma < 0.0:
            raise InputDataError(f"gamma must be nonnegative, got {self.gamma}")


@dataclass
class TrainResult:
    embeddings: np.ndarray
    online: dict[str, np.ndarray]
    target: dict[str, np.ndarray]
    trace: list[dict]


def cosine_pair_loss(p: Tensor, q: Tensor) -> Tensor:
    """Mean negative row-wise cosine between predictions and (gradient-free)
    targets; -1 at perfect alignment, +1 at anti-alignment."""
    if p.shape != q.shape:
        raise ContractViolation(f"shape mismatch {p.shape} vs {q.shape}")
    if q.requires_grad:
        raise ContractViolation("target side of the pair loss must not carry gradients")
    sims = ad.rowwise_dot(ad.row_l2_normalize(p), ad.row_l2_normalize(q))
    return ad.scale(ad.mean(sims), -1.0)


def joint_loss(
    online: EncodedBundle,
    target: EncodedBundle,
    gamma: float,
    no_L_semantic: bool = False,
    no_L_holistic: bool = False,
) -> tuple[Tensor, dict]:
    """Weighted sum of the per-index pair losses: gamma times the semantic
    terms plus the holistic (index 0) and combined (index T+1) terms.

    Returns the loss tensor and a float breakdown for tracing; terms zeroed
    by an ablation flag still appear in the breakdown but not in the sum.
    """
    if online.predicted is None:
        raise ContractViolation("joint loss needs the online network's predictions")
    preds, projs = online.predicted, target.projected
    count = len(preds)
    terms = [cosine_pair_loss(p, q) for p, q in zip(preds, projs)]
    parts = {
        "holistic": float(terms[0].value[0, 0]),
        "combine": float(terms[-1].value[0, 0]),
        "semantic": [float(t.value[0, 0]) for t in terms[1:-1]],
    }
    total = terms[-1]
    if not no_L_holistic:
        total = ad.add(total, terms[0])
    if not no_L_semantic and count > 2:
        semantic = terms[1]
        for t in terms[2:-1]:
            semantic = ad.add(semantic, t)
        total = ad.add(total, ad.scale(semantic, gamma))
    return total, parts


def symmetrized_loss(
    view1: tuple[np.ndarray, tuple],
    view2: tuple[np.ndarray, tuple],
    online: Network,
    target: Network,
    gamma: float,
    tape: Tape,
    normalized: bool = False,
    no_L_semantic: bool = False,
    no_L_holistic: bool = False,
) -> tuple[Tensor, dict, dict[str, Tensor]]:
    """Joint loss plus its mirror with the views swapped between networks.

    Views are (features, structures) pairs. The online parameters are
    mounted once so both passes write gradients into the same leaves; the
    mounted map is returned so callers can read those gradients.
    """
    x1, s1 = view1
    x2, s2 = view2
    mounted = online.mount(tape)
    b1, _ = online.forward(x1, s1, tape, normalized=normalized, params=mounted)
    t2, _ = target.forward(x2, s2, tape, normalized=normalized)
    la, pa = joint_loss(b1, t2, gamma, no_L_semantic, no_L_holistic)
    b2, _ = online.forward(x2, s2, tape, normalized=normalized, params=mounted)
    t1, _ = target.forward(x1, s1, tape, normalized=normalized)
    lb, pb = joint_loss(b2, t1, gamma, no_L_semantic, no_L_holistic)
    parts = {
        "holistic": pa["holistic"] + pb["holistic"],
        "combine": pa["combine"] + pb["combine"],
        "semantic": [a + b for a, b in zip(pa["semantic"], pb["semantic"])],
    }
    return ad.add(la, lb), parts, mounted


def infonce_loss(q1: Tensor, q2: Tensor, temperature: float) -> Tensor:
    """Symmetric softmax contrastive loss over cosine similarities; node v's
    positive is its own row in the other view, all others are negatives."""
    sims = ad.matmul(ad.row_l2_normalize(q1), ad.transpose(ad.row_l2_normalize(q2)))
    logits = ad.scale(sims, 1.0 / temperature)
    return ad.add(ad.cross_entropy_diag(logits),
                  ad.cross_entropy_diag(ad.transpose(logits)))


def negative_sampling_loss(
    view1: tuple[np.ndarray, tuple],
    view2: tuple[np.ndarray, tuple],
    online: Network,
    gamma: float,
    temperature: float,
    tape: Tape,
    normalized: bool = False,
    no_L_semantic: bool = False,
    no_L_holistic: bool = False,
) -> tuple[Tensor, dict, dict[str, Tensor]]:
    """The ``no_slow`` objective: both views through the online network,
    per-index symmetric contrastive terms on the projected embeddings."""
    x1, s1 = view1
    x2, s2 = view2
    mounted = online.mount(tape)
    b1, _ = online.forward(x1, s1, tape, normalized=normalized, params=mounted)
    b2, _ = online.forward(x2, s2, tape, normalized=normalized, params=mounted)
    terms = [infonce_loss(p, q, temperature)
             for p, q in zip(b1.projected, b2.projected)]
    parts = {
        "holistic": float(terms[0].value[0, 0]),
        "combine": float(terms[-1].value[0, 0]),
        "semantic": [float(t.value[0, 0]) for t in terms[1:-1]],
    }
    total = terms[-1]
    if not no_L_holistic:
        total = ad.add(total, terms[0])
    if not no_L_semantic and len(terms) > 2:
        semantic = terms[1]
        for t in terms[2:-1]:
            semantic = ad.add(semantic, t)
        total = ad.add(total, ad.scale(semantic, gamma))
    return total, parts, mounted


def ema_update(xi: dict[str, np.ndarray], theta: dict[str, np.ndarray],
               tau: float) -> dict[str, np.ndarray]:
    """Slow-moving average xi <- tau * xi + (1 - tau) * theta, in place.

    Predictor parameters have no target counterpart and are skipped by
    construction (xi simply has no such keys).
    """
    for key, value in xi.items():
        if key not in theta:
            raise ContractViolation(f"target parameter {key!r} missing from online set")
        if value.shape != theta[key].shape:
            raise ContractViolation(f"shape mismatch for {key!r}")
        value *= tau
        value += (1.0 - tau) * theta[key]
    return xi


def lr_schedule(i: int, eta_b: float, n_w: int, n_total: int) -> float:
    """Linear warmup to eta_b over n_w steps, then half-cosine decay to zero
    at n_total. Endpoints are exact: 0 at step 0, eta_b at n_w, 0 at n_total."""
    if not 0 <= i <= n_total:
        raise ContractViolation(f"step {i} outside [0, {n_total}]")
    if n_w > 0 and i <= n_w:
        return (i / n_w) * eta_b
    if n_total == n_w:
        return eta_b
    frac = (i - n_w) / (n_total - n_w)
    return eta_b * (1.0 + math.cos(frac * math.pi)) * 0.5


class AdamW:
    """Adaptive-moment optimizer with decoupled weight decay."""

    def __init__(self, values: dict[str, np.ndarray], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.values = values
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(v) for k, v in values.items()}
        self.v = {k: np.zeros_like(v) for k, v in values.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for key, value in self.values.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= lr * ((m / c1) / (np.sqrt(v / c2) + self.eps)
                           + self.weight_decay * value)


def _apply_structure_ablations(
    g: SparseGraph, x: np.ndarray, sg: SemanticGraphSet, cfg: TrainConfig,
) -> SemanticGraphSet:
    if cfg.no_semantic_graphs and cfg.topk_only:
        raise InputDataError("no_semantic_graphs and topk_only are mutually exclusive")
    if cfg.no_semantic_graphs:
        return SemanticGraphSet(tuple(g for _ in sg.graphs), sg.k, sg.motif_names)
    if cfg.topk_only:
        flat = dense_topk_cosine(x, sg.k)
        return SemanticGraphSet(tuple(flat for _ in sg.graphs), sg.k, sg.motif_names)
    return sg


def train(
    g: SparseGraph,
    x: np.ndarray,
    sg: SemanticGraphSet,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
) -> TrainResult:
    """Run the full optimization and return final combined embeddings
    (computed from unperturbed features on the first view's structures),
    both parameter sets, and the per-step loss trace."""
    if model_cfg.num_semantic != len(sg.graphs):
        raise ContractViolation(
            f"model expects {model_cfg.num_semantic} semantic graphs, got {len(sg.graphs)}")
    effective_model = model_cfg
    if cfg.uniform_w:
        effective_model = replace(model_cfg, motif_weights=())

    sg = _apply_structure_ablations(g, x, sg, cfg)
    structs1, structs2 = view_structures(g, sg, cfg.ppr_alpha)
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    if cfg.perturb_semantic_edges:
        sem1 = tuple(edge_dropout(s, cfg.drop_rate, np.random.Generator(
            np.random.PCG64(seeds[2]))) for s in sg.graphs)
        sem2 = tuple(edge_dropout(s, cfg.drop_rate, np.random.Generator(
            np.random.PCG64(seeds[3]))) for s in sg.graphs)
    else:
        sem1 = sem2 = sg.graphs
    norm_sem1 = tuple(normalize_structure(s) for s in sem1)
    norm_sem2 = norm_sem1 if sem2 is sem1 else tuple(
        normalize_structure(s) for s in sem2)
    norm1 = (normalize_structure(structs1[0]),) + norm_sem1
    norm2 = (normalize_structure(structs2[0]),) + norm_sem2

    online = Network.initialize(effective_model, np.random.Generator(
        np.random.PCG64(seeds[0])), "online")
    target = Network.initialize(effective_model, np.random.Generator(
        np.random.PCG64(seeds[1])), "target")

    optimizer = AdamW(online.values, weight_decay=cfg.weight_decay)
    trace: list[dict] = []

    if cfg.fixed_augmentation:
        fixed1 = feature_dropout(x, cfg.drop_rate, step_rng(cfg.seed, 0, 0))
        fixed2 = feature_dropout(x, cfg.drop_rate, step_rng(cfg.seed, 0, 1))

    for step in range(1, cfg.n_total + 1):
        lr = lr_schedule(step, cfg.eta_b, cfg.n_w, cfg.n_total)
        if cfg.fixed_augmentation:
            x1, x2 = fixed1, fixed2
        else:
            x1 = feature_dropout(x, cfg.drop_rate, step_rng(cfg.seed, step, 0))
            x2 = feature_dropout(x, cfg.drop_rate, step_rng(cfg.seed, step, 1))

        tape = Tape()
        try:
            if cfg.no_slow:
                loss, parts, mounted = negative_sampling_loss(
                    (x1, norm1), (x2, norm2), online, cfg.gamma,
                    cfg.infonce_temperature, tape, normalized=True,
                    no_L_semantic=cfg.no_L_semantic, no_L_holistic=cfg.no_L_holistic)
            else:
                loss, parts, mounted = symmetrized_loss(
                    (x1, norm1), (x2, norm2), online, target, cfg.gamma, tape,
                    normalized=True, no_L_semantic=cfg.no_L_semantic,
                    no_L_holistic=cfg.no_L_holistic)
        except NumericError as exc:
            raise NumericError(f"step {step}: {exc}") from exc
        total = float(loss.value[0, 0])
        if not math.isfinite(total):
            raise NumericError(f"step {step}: loss is not finite ({total})")

        tape.backward(loss)
        grads = {name: leaf.grad for name, leaf in mounted.items()}
        optimizer.step(grads, lr)
        if not cfg.no_slow:
            ema_update(target.values, online.values, cfg.tau)

        trace.append({"step": step, "lr": lr, "total": total, **parts})

    embeddings = online.encode_combined(x, norm1, normalized=True)
    return TrainResult(embeddings, online.values, target.values, trace)
