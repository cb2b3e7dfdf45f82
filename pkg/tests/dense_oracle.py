"""Dense reference implementation of the forward model, written from the formulas."""

import numpy as np


def incidence(n, hyperedges):
    H = np.zeros((n, len(hyperedges)))
    for k, e in enumerate(hyperedges):
        H[list(e), k] = 1.0
    return H


def theta(n, hyperedges, W, U):
    H = incidence(n, hyperedges)
    W = np.diag(W)
    U = np.diag(U)
    dv = H @ np.diag(W)
    de = H.T @ np.diag(U)
    inv = np.array([1 / np.sqrt(x) if x > 0 else 0.0 for x in dv])
    Dv = np.diag(inv)
    return Dv @ U @ H @ W @ np.diag(1 / de) @ H.T @ U @ Dv


def theta_sum(T, K, gamma):
    return sum(gamma ** (k - 1) * np.linalg.matrix_power(T, k) for k in range(1, K + 1))


def sym_norm(n, edges):
    A = np.eye(n)
    for u, v in edges:
        A[u, v] = A[v, u] = 1.0
    d = A.sum(axis=1)
    return A / np.sqrt(np.outer(d, d))


def relu(x):
    return np.maximum(x, 0.0)


def forward(g, line_edges, params, K, gamma):
    n = g.node_count
    S = theta_sum(theta(n, g.hyperedges, g.hyperedge_weights, g.node_weights), K, gamma)
    prop = S - np.diag(np.diag(S)) + np.eye(n)
    Ap = sym_norm(n, g.pairwise_edges)
    xh = xp = g.features
    for P in params.hyper_layers:
        xh = relu(prop @ xh @ P.data)
    for P in params.pair_layers:
        xp = relu(Ap @ xp @ P.data)
    R = np.hstack([xh, xp])
    H = incidence(n, g.hyperedges)
    L = sym_norm(len(g.hyperedges), line_edges)
    xc = H.T @ R
    for P in params.line_layers:
        xc = relu(L @ xc @ P.data)
    star = H @ xc
    z = np.hstack([star, xh, xp])
    w0, b0, w1, b1 = (t.data for t in params.decoder)
    xhat = relu(z @ w0 + b0) @ w1 + b1
    return {"R_h": xh, "R_p": xp, "R_encode": R, "X_circ": xc, "R_star": star, "X_hat": xhat}
