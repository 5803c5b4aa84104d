"""Fidelity kernels from simulated Z / ZZ feature-map circuits.

Two routes compute the same kernel value:

* a dense statevector simulator that applies the circuit gate by gate to
  ``2**n`` amplitudes (exact for both kinds, capped at ``MAX_DENSE_QUBITS``);
* a product-state fast path for the Z map, which has no entangling gates, so
  every qubit can be simulated on its own with two amplitudes.

Each rep of the circuit is a Hadamard on every qubit, a phase ``2 * x_i`` on
qubit ``i`` and, for the ZZ map, a CX / phase / CX sandwich on every entangled
pair with angle ``2 * (pi - x_i) * (pi - x_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

MAX_DENSE_QUBITS = 20
# cap on complex cells materialised per block in the batched kernels
_BLOCK_CELLS = 1 << 22

_SQRT1_2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class FeatureMapSpec:
    """Declarative description of a feature-map circuit."""

    kind: str = "Z"
    num_features: int = 1
    reps: int = 2
    entanglement: str = "linear"

    def __post_init__(self):
        if self.kind not in ("Z", "ZZ"):
            raise ValueError(f"unknown feature map kind {self.kind!r}")
        if int(self.num_features) < 1:
            raise ValueError("num_features must be >= 1")
        if int(self.reps) < 1:
            raise ValueError("reps must be >= 1")
        if self.entanglement not in ("linear", "full"):
            raise ValueError(f"unknown entanglement {self.entanglement!r}")

    @property
    def num_qubits(self) -> int:
        return self.num_features

    def pairs(self) -> list[tuple[int, int]]:
        """Entangled qubit pairs, in gate order. Empty for the Z map."""
        if self.kind == "Z" or self.num_features < 2:
            return []
        if self.entanglement == "linear":
            return [(i, i + 1) for i in range(self.num_features - 1)]
        return list(combinations(range(self.num_features), 2))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "num_features": int(self.num_features),
            "reps": int(self.reps),
            "entanglement": self.entanglement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMapSpec":
        return cls(
            kind=d["kind"],
            num_features=int(d["num_features"]),
            reps=int(d["reps"]),
            entanglement=d.get("entanglement", "linear"),
        )


def _check_vector(spec: FeatureMapSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != spec.num_features:
        raise ValueError(
            f"expected a vector of length {spec.num_features}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("feature vector contains non-finite values")
    return x


def _check_matrix(spec: FeatureMapSpec, X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and spec.num_features == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != spec.num_features:
        raise ValueError(
            f"{name}: expected {spec.num_features} columns, got shape {X.shape}"
        )
    if X.shape[0] == 0:
        raise ValueError(f"{name}: empty sample matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name}: non-finite values")
    return X


# -- dense statevector simulation ------------------------------------------
# Qubit q is bit q of the basis index (little-endian).


def _apply_h(state: np.ndarray, q: int, n: int) -> None:
    s = state.reshape(1 << (n - 1 - q), 2, 1 << q)
    a0 = s[:, 0, :].copy()
    a1 = s[:, 1, :]
    s[:, 0, :] = (a0 + a1) * _SQRT1_2
    s[:, 1, :] = (a0 - a1) * _SQRT1_2


def _apply_phase(state: np.ndarray, q: int, theta: float, n: int) -> None:
    s = state.reshape(1 << (n - 1 - q), 2, 1 << q)
    s[:, 1, :] *= np.exp(1j * theta)


def _apply_cx(state: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    flip = ((idx >> control) & 1) << target
    return state[idx ^ flip]


def encode(spec: FeatureMapSpec, x) -> np.ndarray:
    """Statevector of the feature-map circuit applied to ``|0...0>``."""
    x = _check_vector(spec, x)
    n = spec.num_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(
            f"dense simulation refused for {n} qubits (cap {MAX_DENSE_QUBITS}); "
            "use fidelity_fast_z / gram with a Z map, which has no qubit cap"
        )
    state = np.zeros(1 << n, dtype=complex)
    state[0] = 1.0
    pairs = spec.pairs()
    for _ in range(spec.reps):
        for q in range(n):
            _apply_h(state, q, n)
        for q in range(n):
            _apply_phase(state, q, 2.0 * x[q], n)
        for i, j in pairs:
            angle = 2.0 * (np.pi - x[i]) * (np.pi - x[j])
            state = _apply_cx(state, i, j, n)
            _apply_phase(state, j, angle, n)
            state = _apply_cx(state, i, j, n)
    return state


def fidelity(spec: FeatureMapSpec, x, y) -> float:
    """``|<encode(y)|encode(x)>|**2`` by dense simulation."""
    sx = encode(spec, x)
    sy = encode(spec, y)
    return float(abs(np.vdot(sy, sx)) ** 2)


# -- product-state path for the Z map --------------------------------------


def z_qubit_states(spec: FeatureMapSpec, X: np.ndarray) -> np.ndarray:
    """Per-qubit amplitudes for the Z map, shape ``(m, num_qubits, 2)``."""
    if spec.kind != "Z":
        raise ValueError("per-qubit states only exist for the Z feature map")
    X = np.asarray(X, dtype=float)
    phase = np.exp(2j * X)
    a0 = np.ones(X.shape, dtype=complex)
    a1 = np.zeros(X.shape, dtype=complex)
    for _ in range(spec.reps):
        a0, a1 = (a0 + a1) * _SQRT1_2, (a0 - a1) * _SQRT1_2
        a1 = a1 * phase
    return np.stack([a0, a1], axis=-1)


def fidelity_fast_z(spec: FeatureMapSpec, x, y) -> float:
    """Z-map fidelity as a product of per-qubit overlaps."""
    if spec.kind != "Z":
        raise ValueError("fidelity_fast_z requires kind='Z'")
    x = _check_vector(spec, x)
    y = _check_vector(spec, y)
    sx = z_qubit_states(spec, x[None, :])[0]
    sy = z_qubit_states(spec, y[None, :])[0]
    ov = np.conj(sy[:, 0]) * sx[:, 0] + np.conj(sy[:, 1]) * sx[:, 1]
    return float(np.prod(np.abs(ov) ** 2))


def _z_block(sl: np.ndarray, sr: np.ndarray) -> np.ndarray:
    # sl (a, q, 2), sr (b, q, 2) -> (a, b); every cell is computed by the
    # same elementwise sequence, whatever the block shape
    ov = (
        np.conj(sr[None, :, :, 0]) * sl[:, None, :, 0]
        + np.conj(sr[None, :, :, 1]) * sl[:, None, :, 1]
    )
    p = ov.real**2 + ov.imag**2
    out = p[:, :, 0].copy()
    for q in range(1, p.shape[2]):
        out *= p[:, :, q]
    return out


def _dense_block(sl: np.ndarray, sr: np.ndarray) -> np.ndarray:
    ov = (np.conj(sr)[None, :, :] * sl[:, None, :]).sum(axis=-1)
    return ov.real**2 + ov.imag**2


def _cross(block, sl: np.ndarray, sr: np.ndarray) -> np.ndarray:
    width = int(np.prod(sl.shape[1:]))
    cols = max(1, min(sr.shape[0], _BLOCK_CELLS // width))
    rows = max(1, _BLOCK_CELLS // (cols * width))
    K = np.empty((sl.shape[0], sr.shape[0]))
    for r in range(0, sl.shape[0], rows):
        for c in range(0, sr.shape[0], cols):
            K[r : r + rows, c : c + cols] = block(sl[r : r + rows], sr[c : c + cols])
    return K


def _states(spec: FeatureMapSpec, X: np.ndarray, method: str) -> np.ndarray:
    if method == "fast":
        return z_qubit_states(spec, X)
    return np.stack([encode(spec, row) for row in X])


def _resolve_method(spec: FeatureMapSpec, method: str) -> str:
    if method == "auto":
        return "fast" if spec.kind == "Z" else "dense"
    if method not in ("fast", "dense"):
        raise ValueError(f"unknown gram method {method!r}")
    if method == "fast" and spec.kind != "Z":
        raise ValueError("fast gram path requires kind='Z'")
    return method


def gram(spec: FeatureMapSpec, left, right=None, method: str = "auto") -> np.ndarray:
    """Kernel matrix ``K[i, j] = fidelity(left[i], right[j])``.

    With ``right`` omitted the self-Gram is built from its upper triangle and
    mirrored. ``method='auto'`` uses the product-state path for Z maps and
    dense simulation otherwise. Values are clamped into ``[0, 1]``.
    """
    method = _resolve_method(spec, method)
    L = _check_matrix(spec, left, "left")
    sl = _states(spec, L, method)
    block = _z_block if method == "fast" else _dense_block

    if right is None:
        n = L.shape[0]
        K = np.empty((n, n))
        for i in range(n):
            K[i, i:] = _cross(block, sl[i : i + 1], sl[i:])[0]
            K[i:, i] = K[i, i:]
    else:
        R = _check_matrix(spec, right, "right")
        K = _cross(block, sl, _states(spec, R, method))
    np.clip(K, 0.0, 1.0, out=K)
    return K


def min_eigenvalue(K) -> float:
    """Smallest eigenvalue of a symmetric Gram matrix (PSD diagnostic)."""
    K = np.asarray(K, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])
