"""Minimal reverse-mode autodiff over dense 2-D float64 arrays.

A Tape records operations in execution order; backward replays them in
exact reverse, accumulating gradients into every tensor that requires them.
Sparse matrices appear only as constant left operands of spmm. One tape
serves one forward/backward pass; tapes are cheap, make a new one per step.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, NumericError
from .graphs import SparseGraph

__all__ = [
    "Tape",
    "Tensor",
    "matmul",
    "spmm",
    "add",
    "add_bias",
    "scale",
    "prelu",
    "row_l2_normalize",
    "rowwise_dot",
    "mean",
    "total_sum",
    "transpose",
    "cross_entropy_diag",
]

NORM_EPS = 1e-12


class Tensor:
    """A 2-D float64 value plus its gradient slot."""

    __slots__ = ("value", "grad", "tape", "requires_grad")

    def __init__(self, value: np.ndarray, tape: "Tape", requires_grad: bool):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2:
            raise ContractViolation(f"tensors are 2-D, got shape {value.shape}")
        self.value = value
        self.tape = tape
        self.requires_grad = requires_grad
        # leaves expose zeros immediately so untouched parameters read as
        # zero-gradient after backward
        self.grad: np.ndarray | None = np.zeros_like(value) if requires_grad else None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    def _bump(self, delta: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += delta


class Tape:
    """Ordered record of operations; reverse order is the backward pass."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self._consumed = False

    def leaf(self, value: np.ndarray) -> Tensor:
        return Tensor(value, self, requires_grad=True)

    def constant(self, value: np.ndarray) -> Tensor:
        return Tensor(value, self, requires_grad=False)

    def _record(self, name: str, out_value: np.ndarray,
                parents: tuple[Tensor, ...], backward) -> Tensor:
        if not np.all(np.isfinite(out_value)):
            raise NumericError(f"operation {name!r} produced non-finite values")
        needs = any(p.requires_grad for p in parents)
        out = Tensor(out_value, self, requires_grad=needs)
        if needs:
            self._nodes.append((out, parents, backward))
        return out

    def backward(self, loss: Tensor) -> None:
        """Populate gradients of every tensor ``loss`` depends on."""
        if self._consumed:
            raise ContractViolation("backward called twice on the same tape")
        if loss.tape is not self:
            raise ContractViolation("loss belongs to a different tape")
        if loss.shape != (1, 1):
            raise ContractViolation(f"loss must be scalar (1, 1), got {loss.shape}")
        self._consumed = True
        loss._bump(np.ones((1, 1)))
        for out, parents, backward in reversed(self._nodes):
            if out.grad is None:
                continue  # not on any path to the loss
            backward(out.grad)


def _same_tape(*tensors: Tensor) -> Tape:
    tape = tensors[0].tape
    for t in tensors[1:]:
        if t.tape is not tape:
            raise ContractViolation("operands recorded on different tapes")
    return tape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul shape mismatch {a.shape} x {b.shape}")
    tape = _same_tape(a, b)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._bump(g @ b.value.T)
        if b.requires_grad:
            b._bump(a.value.T @ g)

    return tape._record("matmul", a.value @ b.value, (a, b), backward)


def spmm(structure: SparseGraph | sp.spmatrix | np.ndarray, x: Tensor) -> Tensor:
    """Constant (sparse or dense) matrix times tensor; gradients flow into
    the tensor operand only."""
    mat = structure.to_scipy() if isinstance(structure, SparseGraph) else structure
    rows = mat.shape[0]
    if mat.shape[1] != x.shape[0]:
        raise ContractViolation(f"spmm shape mismatch {mat.shape} x {x.shape}")

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x._bump(np.asarray(mat.T @ g))

    out = np.asarray(mat @ x.value).reshape(rows, x.shape[1])
    return x.tape._record("spmm", out, (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ContractViolation(f"add shape mismatch {a.shape} vs {b.shape}")
    tape = _same_tape(a, b)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._bump(g)
        if b.requires_grad:
            b._bump(g)

    return tape._record("add", a.value + b.value, (a, b), backward)


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Row-vector bias broadcast: (n, d) + (1, d)."""
    if bias.shape != (1, a.shape[1]):
        raise ContractViolation(f"bias shape {bias.shape} does not broadcast over {a.shape}")
    tape = _same_tape(a, bias)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._bump(g)
        if bias.requires_grad:
            bias._bump(g.sum(axis=0, keepdims=True))

    return tape._record("add_bias", a.value + bias.value, (a, bias), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._bump(factor * g)

    return a.tape._record("scale", factor * a.value, (a,), backward)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Piecewise-linear activation with one learnable scalar slope for the
    negative half-line (slope tensor shape (1, 1))."""
    if slope.shape != (1, 1):
        raise ContractViolation(f"prelu slope must be (1, 1), got {slope.shape}")
    tape = _same_tape(x, slope)
    pos = x.value > 0
    s = slope.value[0, 0]
    out = np.where(pos, x.value, s * x.value)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x._bump(g * np.where(pos, 1.0, s))
        if slope.requires_grad:
            slope._bump(np.array([[np.sum(g * np.where(pos, 0.0, x.value))]]))

    return tape._record("prelu", out, (x, slope), backward)


def row_l2_normalize(x: Tensor) -> Tensor:
    """Rows scaled to unit L2 norm, with NORM_EPS added to denominators so
    dropout-zeroed rows stay finite (they map to zero)."""
    norms = np.linalg.norm(x.value, axis=1, keepdims=True)
    denom = norms + NORM_EPS
    out = x.value / denom

    def backward(g: np.ndarray) -> None:
        if not x.requires_grad:
            return
        # d(x/d)/dx = I/d - x x^T / (d^2 r); drop the second term on exactly
        # zero rows where it is 0/0
        dot = np.sum(g * x.value, axis=1, keepdims=True)
        safe_r = np.where(norms > 0, norms, 1.0)
        correction = np.where(norms > 0, dot / (denom * denom * safe_r), 0.0)
        x._bump(g / denom - x.value * correction)

    return x.tape._record("row_l2_normalize", out, (x,), backward)


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner product, returning an (n, 1) column."""
    if a.shape != b.shape:
        raise ContractViolation(f"rowwise_dot shape mismatch {a.shape} vs {b.shape}")
    tape = _same_tape(a, b)
    out = np.sum(a.value * b.value, axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._bump(g * b.value)
        if b.requires_grad:
            b._bump(g * a.value)

    return tape._record("rowwise_dot", out, (a, b), backward)


def mean(x: Tensor) -> Tensor:
    size = x.value.size

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x._bump(np.full_like(x.value, g[0, 0] / size))

    return x.tape._record("mean", np.array([[x.value.mean()]]), (x,), backward)


def total_sum(x: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x._bump(np.full_like(x.value, g[0, 0]))

    return x.tape._record("total_sum", np.array([[x.value.sum()]]), (x,), backward)


def transpose(x: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x._bump(g.T)

    return x.tape._record("transpose", x.value.T.copy(), (x,), backward)


def cross_entropy_diag(logits: Tensor) -> Tensor:
    """Mean softmax cross-entropy of an (n, n) logit matrix where row v's
    target class is column v. The workhorse of the negative-sampling loss."""
    n = logits.shape[0]
    if logits.shape != (n, n):
        raise ContractViolation(f"cross_entropy_diag needs a square matrix, got {logits.shape}")
    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    softmax = expv / expv.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(expv.sum(axis=1, keepdims=True))
    value = -np.mean(np.diag(log_probs))

    def backward(g: np.ndarray) -> None:
        if logits.requires_grad:
            logits._bump(g[0, 0] * (softmax - np.eye(n)) / n)

    return logits.tape._record(
        "cross_entropy_diag", np.array([[value]]), (logits,), backward)
