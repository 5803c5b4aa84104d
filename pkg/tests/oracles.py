"""Independent reference implementations used only by the tests.

None of these share code with the package: the statevector oracle builds
full 2^n x 2^n gate matrices with Kronecker products, the QP oracle is an
accelerated projected-gradient solver, and the threshold and separator
oracles are brute-force searches.
"""
import itertools
import math
from fractions import Fraction

import numpy as np

H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
I2 = np.eye(2, dtype=complex)


def _phase(theta):
    return np.diag([1.0, np.exp(1j * theta)])


def _on_qubit(gate, q, n):
    # qubit 0 is the least significant bit, i.e. the rightmost Kronecker factor
    m = np.array([[1.0]], dtype=complex)
    for k in reversed(range(n)):
        m = np.kron(m, gate if k == q else I2)
    return m


def _cx(control, target, n):
    dim = 2 ** n
    m = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        out = b ^ (1 << target) if (b >> control) & 1 else b
        m[out, b] = 1.0
    return m


def feature_state(kind, x, reps, entanglement="linear"):
    """Statevector of the Z or ZZ feature map applied to |0...0>."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if entanglement == "linear":
        pairs = [(i, i + 1) for i in range(n - 1)]
    else:
        pairs = list(itertools.combinations(range(n), 2))
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for _ in range(reps):
        for q in range(n):
            psi = _on_qubit(H, q, n) @ psi
        for q in range(n):
            psi = _on_qubit(_phase(2.0 * x[q]), q, n) @ psi
        if kind == "ZZ":
            for i, j in pairs:
                theta = 2.0 * (math.pi - x[i]) * (math.pi - x[j])
                psi = _cx(i, j, n) @ psi
                psi = _on_qubit(_phase(theta), j, n) @ psi
                psi = _cx(i, j, n) @ psi
    return psi


def kernel_value(kind, x, y, reps, entanglement="linear"):
    a = feature_state(kind, x, reps, entanglement)
    b = feature_state(kind, y, reps, entanglement)
    return float(abs(np.vdot(b, a)) ** 2)


def _project(z, y, C):
    """Euclidean projection onto {0 <= a <= C, y.a = 0} by bisection on the multiplier."""
    def g(nu):
        return float(y @ np.clip(z - nu * y, 0.0, C))

    lo, hi = -1.0, 1.0
    while g(lo) < 0:
        lo *= 2
    while g(hi) > 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(z - 0.5 * (lo + hi) * y, 0.0, C)


def qp_dual(K, y, C, tol=1e-8, max_iter=200000):
    """Maximise sum(a) - a'Qa/2 over the box-and-hyperplane set; returns (alpha, objective)."""
    y = np.asarray(y, dtype=float)
    Q = np.asarray(K) * np.outer(y, y)
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    a = np.zeros(len(y))
    z, t = a.copy(), 1.0
    for _ in range(max_iter):
        a_new = _project(z - (Q @ z - 1.0) / L, y, C)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = a_new + (t - 1) / t_new * (a_new - a)
        step = np.max(np.abs(a_new - a))
        a, t = a_new, t_new
        if step < tol:
            break
    return a, float(a.sum() - 0.5 * a @ Q @ a)


def best_threshold_f1(fractions, labels, n):
    """Max F1 over tau in {k/n} U {0}, as an exact fraction of raw counts."""
    fractions = np.asarray(fractions, dtype=float)
    labels = np.asarray(labels)
    best = Fraction(0)
    for k in range(n + 1):
        tau = k / n
        pred = fractions >= tau - 1e-12
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        fn = int(np.sum(~pred & (labels == 1)))
        f1 = Fraction(2 * tp, 2 * tp + fp + fn) if tp else Fraction(0)
        best = max(best, f1)
    return best


def best_random_hyperplane(X, y, n_planes=10_000, seed=0):
    """Best training accuracy over random directions, each with its optimal offset."""
    rng = np.random.default_rng(seed)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    W = rng.standard_normal((n_planes, X.shape[1]))
    proj = W @ X.T
    order = np.argsort(proj, axis=1)
    ys = y[order]
    n = y.size
    # predict 1 for points above the cut: cut after position k (k = 0..n)
    ones_below = np.concatenate([np.zeros((n_planes, 1)), np.cumsum(ys, axis=1)], axis=1)
    zeros_below = np.arange(n + 1)[None, :] - ones_below
    ones_total = ones_below[:, -1:]
    correct = zeros_below + (ones_total - ones_below)
    # either orientation of the normal
    acc = np.maximum(correct, n - correct) / n
    return float(acc.max())
