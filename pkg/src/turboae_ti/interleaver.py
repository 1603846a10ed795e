"""Trainable interleaver: relaxed permutation matrix, penalty, projection, hardening.

The interleaver is represented two ways: a soft L x L matrix living on the
permutation polytope (trained by gradient descent) and a hard permutation
extracted from it for inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

NORM_EPS = 1e-12


class InterleaverError(ValueError):
    """Contract violation on interleaver inputs."""


@dataclass(frozen=True)
class HardInterleaver:
    """A discrete permutation pi of {0, ..., L-1} together with its inverse."""

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        L = perm.shape[0]
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(L)):
            raise InterleaverError("perm must be a bijection on {0..L-1}")
        object.__setattr__(self, "perm", perm)

    @property
    def size(self) -> int:
        return self.perm.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.size)
        return inv

    def as_matrix(self) -> np.ndarray:
        """Permutation matrix M with M @ s == apply(self, s)."""
        m = np.zeros((self.size, self.size))
        m[np.arange(self.size), self.perm] = 1.0
        return m

    @classmethod
    def identity(cls, size: int) -> "HardInterleaver":
        return cls(np.arange(size))

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "HardInterleaver":
        return cls(rng.permutation(size))


@dataclass
class SoftInterleaver:
    """Relaxed permutation matrix T, entries in [0,1], rows summing to 1."""

    entries: np.ndarray = field()

    def __post_init__(self):
        t = np.asarray(self.entries, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise InterleaverError("T must be square")
        if not np.all(np.isfinite(t)):
            raise InterleaverError("T must have finite entries")
        self.entries = t

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def validate(self, tol: float = 1e-6) -> None:
        if np.min(self.entries) < 0:
            raise InterleaverError("T has negative entries")
        if np.max(np.abs(self.entries.sum(axis=1) - 1.0)) > tol:
            raise InterleaverError("T rows do not sum to 1")

    @classmethod
    def uniform(cls, size: int) -> "SoftInterleaver":
        return cls(np.full((size, size), 1.0 / size))

    @classmethod
    def from_hard(cls, hard: HardInterleaver) -> "SoftInterleaver":
        return cls(hard.as_matrix())

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "SoftInterleaver":
        return project(rng.uniform(size=(size, size)))

    @classmethod
    def identity_plus_noise(cls, size: int, rng: np.random.Generator,
                            noise: float = 0.1) -> "SoftInterleaver":
        raw = np.eye(size) + noise * rng.uniform(size=(size, size))
        return project(raw)


def _as_matrix(t) -> np.ndarray:
    if isinstance(t, SoftInterleaver):
        t = t.entries
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise InterleaverError("expected a square matrix")
    if not np.all(np.isfinite(t)):
        raise InterleaverError("expected finite entries")
    return t


def penalty(t) -> float:
    """l1-l2 matrix penalty: sum over rows and columns of ||.||_1 - ||.||_2.

    Zero exactly when every row and column has at most one nonzero entry,
    which drives T toward a permutation matrix.
    """
    t = _as_matrix(t)
    return float(penalty_tensor(torch.from_numpy(t)))


def penalty_tensor(t: torch.Tensor) -> torch.Tensor:
    """Differentiable penalty on a torch matrix (used inside the training loss)."""
    row_l1 = t.abs().sum(dim=1)
    col_l1 = t.abs().sum(dim=0)
    # clamped sum-of-squares keeps the gradient finite at all-zero rows/cols
    row_l2 = torch.sqrt(torch.clamp((t * t).sum(dim=1), min=NORM_EPS**2))
    col_l2 = torch.sqrt(torch.clamp((t * t).sum(dim=0), min=NORM_EPS**2))
    return (row_l1 - row_l2).sum() + (col_l1 - col_l2).sum()


def penalty_gradient(t) -> np.ndarray:
    """Closed-form gradient of penalty; subgradient 0 at zero entries."""
    t = _as_matrix(t)
    sign = np.sign(t)
    row_l2 = np.maximum(np.linalg.norm(t, axis=1, keepdims=True), NORM_EPS)
    col_l2 = np.maximum(np.linalg.norm(t, axis=0, keepdims=True), NORM_EPS)
    return 2.0 * sign - t / row_l2 - t / col_l2


def project(raw) -> SoftInterleaver:
    """Project a raw matrix onto (approximate) doubly-stochastic form.

    Order matters: clip negatives, normalize columns, then normalize rows, so
    row sums are exactly 1 on exit.  An epsilon added to every entry keeps the
    map total on degenerate (all-zero row/column) inputs.
    """
    t = _as_matrix(raw)
    t = np.maximum(t, 0.0) + NORM_EPS
    t = t / t.sum(axis=0, keepdims=True)
    t = t / t.sum(axis=1, keepdims=True)
    return SoftInterleaver(t)


def project_tensor_(t: torch.Tensor) -> torch.Tensor:
    """In-place projection of a torch matrix; same steps as :func:`project`."""
    with torch.no_grad():
        t.clamp_(min=0.0)
        t.add_(NORM_EPS)
        t.div_(t.sum(dim=0, keepdim=True))
        t.div_(t.sum(dim=1, keepdim=True))
    return t


def harden(t, tie_tol: float = 1e-9) -> HardInterleaver:
    """Extract the permutation maximizing sum_i T[i, perm(i)].

    Solved as an optimal assignment; among optima (within tie_tol) the
    lexicographically smallest permutation is returned, so e.g. a uniform
    matrix hardens to the identity.
    """
    t = _as_matrix(t)
    L = t.shape[0]
    rows, cols = linear_sum_assignment(t, maximize=True)
    best = float(t[rows, cols].sum())

    perm = np.empty(L, dtype=np.int64)
    free = list(range(L))
    prefix = 0.0
    for i in range(L):
        chosen = None
        for j in free:
            rest_rows = np.arange(i + 1, L)
            rest_cols = [c for c in free if c != j]
            if rest_rows.size:
                sub = t[np.ix_(rest_rows, rest_cols)]
                r, c = linear_sum_assignment(sub, maximize=True)
                rest = float(sub[r, c].sum())
            else:
                rest = 0.0
            if prefix + t[i, j] + rest >= best - tie_tol:
                chosen = j
                break
        if chosen is None:  # numerical fallback: keep the assignment solution
            chosen = min(c for c in free)
        perm[i] = chosen
        prefix += t[i, chosen]
        free.remove(chosen)
    return HardInterleaver(perm)


def apply(pi, s: np.ndarray) -> np.ndarray:
    """Interleave: hard pi gathers s[perm(i)]; soft T is the product T @ s."""
    s = np.asarray(s, dtype=np.float64)
    if isinstance(pi, HardInterleaver):
        if s.shape[-1] != pi.size:
            raise InterleaverError("sequence length does not match interleaver size")
        return s[..., pi.perm]
    t = _as_matrix(pi)
    if s.shape[-1] != t.shape[0]:
        raise InterleaverError("sequence length does not match interleaver size")
    return s @ t.T


def inverse_apply(pi, s: np.ndarray) -> np.ndarray:
    """De-interleave; exact inverse of apply for hard pi, T^t for soft T."""
    s = np.asarray(s, dtype=np.float64)
    if isinstance(pi, HardInterleaver):
        if s.shape[-1] != pi.size:
            raise InterleaverError("sequence length does not match interleaver size")
        return s[..., pi.inverse]
    t = _as_matrix(pi)
    if s.shape[-1] != t.shape[0]:
        raise InterleaverError("sequence length does not match interleaver size")
    return s @ t


def interleave_tensor(t: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Soft-interleave a batch: x is (B, L) or (B, L, F); out[b, i] = sum_j T[i, j] x[b, j]."""
    if x.dim() == 2:
        return x @ t.transpose(0, 1)
    return torch.einsum("ij,bjf->bif", t, x)


def deinterleave_tensor(t: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Transpose-product de-interleave, the soft counterpart of pi^{-1}."""
    if x.dim() == 2:
        return x @ t
    return torch.einsum("ji,bjf->bif", t, x)
