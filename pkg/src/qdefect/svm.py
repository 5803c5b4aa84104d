"""Kernel SVM solvers: SMO on a precomputed Gram matrix and kernelized Pegasos.

Labels are ``+1`` / ``-1`` inside this module. The public ``fit_*`` and
``predict*`` helpers speak the commit convention (0 = clean, 1 = buggy).

Batch and single-row prediction must agree bit for bit, so every kernel
cell and every decision value is computed by an elementwise expression
followed by a reduction over a contiguous last axis, never by BLAS.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataio import ScalingParams
from .qkernel import FeatureMapSpec, gram

log = logging.getLogger(__name__)

_RBF_BLOCK = 1 << 22


@dataclass(frozen=True)
class KernelBinding:
    """Either a quantum fidelity kernel or a classical RBF kernel."""

    kind: str
    feature_map: Optional[FeatureMapSpec] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind == "quantum":
            if self.feature_map is None:
                raise ValueError("quantum kernel needs a FeatureMapSpec")
        elif self.kind == "rbf":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("rbf kernel needs gamma > 0")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def quantum(cls, spec: FeatureMapSpec) -> "KernelBinding":
        return cls("quantum", feature_map=spec)

    @classmethod
    def rbf(cls, gamma: float) -> "KernelBinding":
        return cls("rbf", gamma=float(gamma))

    def matrix(self, A, B=None) -> np.ndarray:
        if self.kind == "quantum":
            return gram(self.feature_map, A, B)
        return rbf_matrix(A, A if B is None else B, self.gamma)

    def to_dict(self) -> dict:
        if self.kind == "quantum":
            return {"kind": "quantum", "feature_map": self.feature_map.to_dict()}
        return {"kind": "rbf", "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelBinding":
        if d["kind"] == "quantum":
            return cls.quantum(FeatureMapSpec.from_dict(d["feature_map"]))
        return cls.rbf(d["gamma"])


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column mismatch: {A.shape[1]} vs {B.shape[1]}")
    K = np.empty((A.shape[0], B.shape[0]))
    rows = max(1, _RBF_BLOCK // max(1, B.shape[0] * B.shape[1]))
    for r in range(0, A.shape[0], rows):
        diff = A[r : r + rows, None, :] - B[None, :, :]
        K[r : r + rows] = np.exp(-gamma * (diff * diff).sum(axis=-1))
    return K


def default_rbf_gamma(X) -> float:
    """``1 / (d * mean per-feature variance)``; 1.0 for a zero-variance set."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    var = float(X.var(axis=0).mean())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def to_signed(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0/1")
    return np.where(labels == 1, 1.0, -1.0)


def _check_signed(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or not np.all((y == 1) | (y == -1)):
        raise ValueError("labels must be a sequence of +1/-1")
    if np.all(y == 1) or np.all(y == -1):
        raise ValueError("labels contain a single class")
    return y


# -- SMO ---------------------------------------------------------------------


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    converged: bool
    iterations: int
    gap: float  # max violating-pair gap at exit


def dual_objective(alpha, y, K) -> float:
    """Soft-margin dual ``sum(alpha) - 1/2 sum_ij a_i a_j y_i y_j K_ij``."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ np.asarray(K) @ ay)


def _bias(u: np.ndarray, alpha: np.ndarray, y: np.ndarray, C: float) -> float:
    # u_i = y_i - sum_j a_j y_j K_ij
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(u[free].mean())
    lower = ((y > 0) & (alpha == 0)) | ((y < 0) & (alpha == C))
    upper = ~lower
    lo = u[lower].max() if lower.any() else u[upper].min()
    hi = u[upper].min() if upper.any() else u[lower].max()
    return float(0.5 * (lo + hi))


def train_svc(gram_matrix, labels, C: float = 1.0, tol: float = 1e-3,
              max_passes: int = 200) -> DualSolution:
    """Solve the soft-margin SVM dual with two-variable SMO.

    Working pairs use maximal-violation selection for the first index and
    second-order gain for the second. The loop stops when the largest KKT
    gap drops below ``tol`` or after ``max_passes * n`` pair updates, in
    which case the last iterate is returned with ``converged=False``.
    """
    K = np.asarray(gram_matrix, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"gram must be square, got shape {K.shape}")
    if not np.allclose(K, K.T, atol=1e-10, rtol=0):
        raise ValueError("gram must be symmetric")
    y = _check_signed(labels)
    if y.shape[0] != K.shape[0]:
        raise ValueError("labels and gram sizes differ")
    if not C > 0 or not tol > 0:
        raise ValueError("C and tol must be positive")

    n = K.shape[0]
    Q = K * np.outer(y, y)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    max_iter = max(1, max_passes) * n
    converged = False
    gap = np.inf
    it = 0
    while it < max_iter:
        u = -y * G
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            converged, gap = True, 0.0
            break
        u_up = np.where(up, u, -np.inf)
        i = int(np.argmax(u_up))
        m = u_up[i]
        gap = m - np.where(low, u, np.inf).min()
        if gap < tol:
            converged = True
            break
        b = m - u
        cand = low & (b > 0)
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, 1e-12)
        gain = np.where(cand, b * b / a, -np.inf)
        j = int(np.argmax(gain))

        bound_i = C - alpha[i] if pos[i] else alpha[i]
        bound_j = alpha[j] if pos[j] else C - alpha[j]
        t = b[j] / a[j]
        if t >= bound_i:
            t = bound_i
            new_i = C if pos[i] else 0.0
        else:
            new_i = alpha[i] + y[i] * t
        if t >= bound_j:
            t = bound_j
            new_j = 0.0 if pos[j] else C
            if t < bound_i:
                new_i = alpha[i] + y[i] * t
        else:
            new_j = alpha[j] - y[j] * t
        d_i = new_i - alpha[i]
        d_j = new_j - alpha[j]
        alpha[i] = new_i
        alpha[j] = new_j
        G += Q[:, i] * d_i + Q[:, j] * d_j
        it += 1

    if not converged:
        log.warning("SMO stopped after %d updates with gap %.3g > tol %.3g", it, gap, tol)
    bias = _bias(-y * G, alpha, y, C)
    return DualSolution(alpha=alpha, bias=bias, converged=converged, iterations=it,
                        gap=float(gap))


def kkt_violations(alpha, y, K, bias: float, C: float) -> np.ndarray:
    """Per-point violation of the soft-margin optimality conditions."""
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    yf = y * (np.asarray(K) @ (alpha * y) + bias)
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~at_zero & ~at_c
    v = np.zeros_like(alpha)
    v[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    v[at_c] = np.maximum(0.0, yf[at_c] - 1.0)
    v[free] = np.abs(yf[free] - 1.0)
    return v


# -- trained models ----------------------------------------------------------


@dataclass
class TrainedSvm:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    C: float
    kernel: KernelBinding
    scaling: Optional[ScalingParams] = None
    converged: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def num_features(self) -> int:
        return self.support_vectors.shape[1]


@dataclass
class PegasosModel:
    support_vectors: np.ndarray
    support_labels: np.ndarray  # +1 / -1
    counts: np.ndarray
    steps: int
    C: float
    n_train: int
    kernel: KernelBinding
    seed: int
    bias: float = 0.0
    scaling: Optional[ScalingParams] = None
    metadata: dict = field(default_factory=dict)

    @property
    def num_features(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def lam(self) -> float:
        return 1.0 / (self.C * self.n_train)


def fit_svc(X, labels, kernel: KernelBinding, C: float = 1.0, tol: float = 1e-3,
            max_passes: int = 200, scaling: Optional[ScalingParams] = None,
            metadata: Optional[dict] = None) -> TrainedSvm:
    """Train an SVC on features ``X`` with 0/1 labels."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = to_signed(labels)
    sol = train_svc(kernel.matrix(X), y, C=C, tol=tol, max_passes=max_passes)
    sv = sol.alpha > 0
    return TrainedSvm(
        support_vectors=X[sv].copy(),
        dual_coefs=(sol.alpha * y)[sv],
        bias=sol.bias,
        C=float(C),
        kernel=kernel,
        scaling=scaling,
        converged=sol.converged,
        metadata=dict(metadata or {}),
    )


def _as_samples(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return X.reshape(0, d)
    X = np.atleast_2d(X)
    if X.shape[1] != d:
        raise ValueError(f"expected {d} feature columns, got {X.shape[1]}")
    return X


def decision_function(model: TrainedSvm, kernel_row) -> float:
    """``sum_i dual_coefs[i] * kernel_row[i] + bias`` for one sample."""
    row = np.asarray(kernel_row, dtype=float)
    if row.shape != model.dual_coefs.shape:
        raise ValueError(
            f"kernel row has length {row.size}, model has {model.dual_coefs.size} supports"
        )
    return float((row * model.dual_coefs).sum() + model.bias)


def decision_values(model: TrainedSvm, X) -> np.ndarray:
    X = _as_samples(X, model.num_features)
    if X.shape[0] == 0:
        return np.zeros(0)
    if model.dual_coefs.size == 0:
        return np.full(X.shape[0], model.bias)
    K = model.kernel.matrix(X, model.support_vectors)
    return (K * model.dual_coefs).sum(axis=1) + model.bias


def predict(model: TrainedSvm, X) -> np.ndarray:
    """0/1 labels; a decision value of exactly 0 counts as buggy."""
    return (decision_values(model, X) >= 0).astype(np.int64)


# -- Pegasos -----------------------------------------------------------------


def train_pegasos(X, labels, kernel: KernelBinding, C: float = 1000.0,
                  steps: int = 1000, seed: int = 0,
                  scaling: Optional[ScalingParams] = None,
                  metadata: Optional[dict] = None) -> PegasosModel:
    """Kernelized Pegasos with 0/1 labels; deterministic for a given seed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_signed(to_signed(labels))
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not C > 0:
        raise ValueError("C must be positive")
    n = X.shape[0]
    lam = 1.0 / (C * n)
    picks = np.random.default_rng(seed).integers(0, n, size=steps)
    counts = np.zeros(n, dtype=np.int64)
    score = np.zeros(n)  # sum_j counts_j y_j K(x_j, x_i)
    columns: dict[int, np.ndarray] = {}
    for t, i in enumerate(picks, start=1):
        margin = y[i] * score[i] / (lam * t)
        if margin < 1:
            if i not in columns:
                columns[i] = kernel.matrix(X, X[i : i + 1])[:, 0]
            counts[i] += 1
            score += y[i] * columns[i]
    keep = counts > 0
    return PegasosModel(
        support_vectors=X[keep].copy(),
        support_labels=y[keep],
        counts=counts[keep],
        steps=int(steps),
        C=float(C),
        n_train=n,
        kernel=kernel,
        seed=int(seed),
        scaling=scaling,
        metadata=dict(metadata or {}),
    )


def pegasos_decision_values(model: PegasosModel, X) -> np.ndarray:
    X = _as_samples(X, model.num_features)
    if X.shape[0] == 0:
        return np.zeros(0)
    K = model.kernel.matrix(X, model.support_vectors)
    w = model.counts * model.support_labels
    return (K * w).sum(axis=1) / (model.lam * model.steps) + model.bias


def predict_pegasos(model: PegasosModel, X) -> np.ndarray:
    return (pegasos_decision_values(model, X) >= 0).astype(np.int64)


def model_scores(model, X) -> np.ndarray:
    """Decision values for either model type."""
    if isinstance(model, PegasosModel):
        return pegasos_decision_values(model, X)
    return decision_values(model, X)


def model_predict(model, X) -> np.ndarray:
    if isinstance(model, PegasosModel):
        return predict_pegasos(model, X)
    return predict(model, X)
