"""Influence-flow forward model.

Hypergraph branch: Theta_sum propagation with self-influence reset to one.
Pairwise branch: symmetric-normalized adjacency with self-loops.
Line-graph branch: member sums -> one layer on the line graph -> broadcast back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .graph import (GraphError, Hypergraph, IncidenceMatrix, LineGraph,
                    normalized_adjacency, pairwise_adjacency)
from .rng import stream

DENSE_LIMIT = 2000


def theta(H: IncidenceMatrix, W, U) -> sp.csr_matrix:
    """Dv^-1/2 U H W De^-1 H^T U Dv^-1/2, zero rows for uncovered nodes."""
    W = np.asarray(W, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    dv = H.node_degrees
    inv_sqrt_dv = np.zeros_like(dv)
    covered = dv > 0
    inv_sqrt_dv[covered] = 1.0 / np.sqrt(dv[covered])
    left = sp.diags(inv_sqrt_dv * U) @ H.entries
    middle = sp.diags(W / H.edge_degrees)
    out = (left @ middle @ left.T).tocsr()
    # symmetrize away rounding differences between the two triangular halves
    return ((out + out.T) * 0.5).tocsr()


def theta_sum(T, K: int = 2, gamma: float = 0.5):
    """sum_{k=1..K} gamma^(k-1) T^k, materialized."""
    if K < 1:
        raise ValueError("hop count K must be >= 1")
    dense = not sp.issparse(T)
    power = T.copy()
    acc = T.copy()
    for k in range(2, K + 1):
        power = power @ T
        acc = acc + (gamma ** (k - 1)) * power
    return acc if dense else sp.csr_matrix(acc)


class Propagator:
    """Linear map (Theta_sum - Diag(Theta_sum) + I) applied without densifying.

    Small graphs materialize the matrix; large ones apply Theta repeatedly.
    """

    def __init__(self, T: sp.csr_matrix, K: int = 2, gamma: float = 0.5,
                 dense_limit: int = DENSE_LIMIT):
        if K < 1:
            raise ValueError("hop count K must be >= 1")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("decay gamma must lie in [0, 1]")
        self.n = T.shape[0]
        self.K, self.gamma = K, gamma
        self.theta = sp.csr_matrix(T)
        if self.n <= dense_limit:
            S = theta_sum(self.theta.toarray(), K, gamma)
            self.matrix = S - np.diag(np.diag(S)) + np.eye(self.n)
            self.diag = np.diag(S).copy()
        else:
            self.matrix = None
            self.diag = self._sum_diagonal()

    def _sum_diagonal(self) -> np.ndarray:
        # diag(T^k) = rowsum(T^a o T^b) for a + b = k, using symmetry of T
        powers = {0: sp.identity(self.n, format="csr"), 1: self.theta}
        half = (self.K + 1) // 2
        for a in range(2, half + 1):
            powers[a] = (powers[a - 1] @ self.theta).tocsr()
        diag = np.zeros(self.n)
        for k in range(1, self.K + 1):
            a = (k + 1) // 2
            b = k - a
            dk = np.asarray(powers[a].multiply(powers[b]).sum(axis=1)).ravel()
            diag += self.gamma ** (k - 1) * dk
        return diag

    def dot(self, x: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ x
        acc = np.zeros_like(x, dtype=np.float64)
        power = x
        for k in range(1, self.K + 1):
            power = self.theta @ power
            acc += self.gamma ** (k - 1) * power
        return acc - self.diag[:, None] * x + x

    @property
    def T(self) -> "Propagator":
        # symmetric operator
        return self

    def toarray(self) -> np.ndarray:
        return self.dot(np.eye(self.n))


@dataclass
class ModelConfig:
    hyper_dims: tuple[int, ...] = (16, 16)
    pair_dims: tuple[int, ...] = (16, 16)
    K: int = 2
    gamma: float = 0.5
    activation: str = "relu"


@dataclass
class ModelParams:
    hyper_layers: list[ad.Tensor]
    pair_layers: list[ad.Tensor]
    line_layers: list[ad.Tensor]
    decoder: list[ad.Tensor]
    activation: str = "relu"
    K: int = 2
    gamma: float = 0.5
    extra: dict[str, ad.Tensor] = field(default_factory=dict)

    @classmethod
    def init(cls, in_dim: int, cfg: ModelConfig, seed: int = 0,
             ops: "Operators | None" = None) -> "ModelParams":
        """Glorot-uniform weights, zero biases.

        With ``ops`` given, each propagation layer's weights are divided by the
        infinity norm of the operator it follows, so unnormalized influence
        operators do not blow up the initial activations.
        """
        if not cfg.hyper_dims or not cfg.pair_dims:
            raise ValueError("at least one layer per encoder branch is required")
        if len(cfg.hyper_dims) != len(cfg.pair_dims):
            raise ValueError("hypergraph and pairwise branches need the same depth")
        rng = stream(seed, "model.init")

        scale = ops.init_scales() if ops is not None else {}

        def glorot(a, b, name, gain=1.0):
            lim = np.sqrt(6.0 / (a + b))
            return ad.Tensor(gain * rng.uniform(-lim, lim, (a, b)), requires_grad=True,
                             name=name)

        def chain(prefix, dims):
            sizes = (in_dim,) + tuple(dims)
            return [glorot(sizes[i], sizes[i + 1], f"{prefix}.{i}", scale.get(prefix, 1.0))
                    for i in range(len(dims))]

        enc = cfg.hyper_dims[-1] + cfg.pair_dims[-1]
        dec_in = 2 * enc
        hidden = max(1, dec_in // 2)
        return cls(
            hyper_layers=chain("hyper", cfg.hyper_dims),
            pair_layers=chain("pair", cfg.pair_dims),
            line_layers=[glorot(enc, enc, "line.0", scale.get("line", 1.0))],
            decoder=[glorot(dec_in, hidden, "decoder.w0"),
                     ad.Tensor(np.zeros(hidden), requires_grad=True, name="decoder.b0"),
                     glorot(hidden, in_dim, "decoder.w1"),
                     ad.Tensor(np.zeros(in_dim), requires_grad=True, name="decoder.b1")],
            activation=cfg.activation, K=cfg.K, gamma=cfg.gamma,
        )

    def tensors(self) -> list[ad.Tensor]:
        return [*self.hyper_layers, *self.pair_layers, *self.line_layers, *self.decoder,
                *self.extra.values()]

    def named(self) -> dict[str, ad.Tensor]:
        return {t.name: t for t in self.tensors()}

    def state(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, t in self.named().items():
            if name not in state:
                raise KeyError(f"checkpoint lacks tensor {name!r}")
            if state[name].shape != t.shape:
                raise ValueError(f"{name}: checkpoint shape {state[name].shape} != {t.shape}")
            t.data = np.array(state[name], dtype=np.float64)


@dataclass
class EmbeddingSet:
    R_h: np.ndarray
    R_p: np.ndarray
    R_encode: np.ndarray
    X_circ: np.ndarray
    R_star: np.ndarray
    X_hat: np.ndarray


def _check_finite(x: ad.Tensor, what: str):
    if not np.all(np.isfinite(x.data)):
        raise FloatingPointError(f"non-finite values in {what}")


def hyper_layer(X, propagator, P, activation: str = "relu") -> ad.Tensor:
    X = ad.as_tensor(X)
    _check_finite(X, "hyper_layer input")
    return ad.activation(activation)(ad.matmul(ad.spmm(propagator, X), P))


def pair_layer(X, A_norm, P, activation: str = "relu") -> ad.Tensor:
    X = ad.as_tensor(X)
    _check_finite(X, "pair_layer input")
    return ad.activation(activation)(ad.matmul(ad.spmm(A_norm, X), P))


@dataclass
class Operators:
    """Constant operators of one hypergraph, built once per run."""

    propagator: Propagator
    pair_norm: sp.csr_matrix
    incidence: sp.csr_matrix
    line_norm: sp.csr_matrix

    @classmethod
    def build(cls, g: Hypergraph, H: IncidenceMatrix, lg: LineGraph, K: int = 2,
              gamma: float = 0.5, dense_limit: int = DENSE_LIMIT) -> "Operators":
        if lg.node_count != H.shape[1]:
            raise GraphError("line graph must have one node per hyperedge")
        T = theta(H, g.hyperedge_weights, g.node_weights)
        A, D = pairwise_adjacency(g, add_self_loops=True)
        LA, LD = lg.adjacency(add_self_loops=True)
        return cls(Propagator(T, K, gamma, dense_limit), normalized_adjacency(A, D),
                   H.entries.tocsr(), normalized_adjacency(LA, LD))

    def init_scales(self) -> dict[str, float]:
        def inv_norm(apply, n):
            # infinity norm = largest row sum of |op|; ops here are nonnegative
            return 1.0 / max(1.0, float(np.max(apply(np.ones((n, 1))))))

        n, m = self.incidence.shape
        line = lambda x: self.incidence @ (self.line_norm @ (self.incidence.T @ x))
        return {"hyper": inv_norm(self.propagator.dot, n),
                "pair": inv_norm(self.pair_norm.dot, n),
                "line": inv_norm(line, n)}


def encode(X, ops: Operators, params: ModelParams):
    if not params.hyper_layers or not params.pair_layers:
        raise ValueError("at least one layer per encoder branch is required")
    xh = xp = ad.as_tensor(X)
    for P in params.hyper_layers:
        xh = hyper_layer(xh, ops.propagator, P, params.activation)
    for P in params.pair_layers:
        xp = pair_layer(xp, ops.pair_norm, P, params.activation)
    return xh, xp, ad.concat([xh, xp], axis=1)


def line_propagate(R_encode, ops: Operators, params: ModelParams):
    if ops.incidence.shape[1] == 0:
        raise GraphError("line propagation needs at least one hyperedge")
    x_circ = ad.spmm(ops.incidence.T.tocsr(), R_encode)
    for P in params.line_layers:
        x_circ = pair_layer(x_circ, ops.line_norm, P, params.activation)
    return x_circ, ad.spmm(ops.incidence, x_circ)


def reconstruct(R_star, R_h, R_p, params: ModelParams) -> ad.Tensor:
    z = ad.concat([R_star, R_h, R_p], axis=1)
    if z.shape[1] != params.decoder[0].shape[0]:
        raise ValueError(f"decoder expects width {params.decoder[0].shape[0]}, got {z.shape[1]}")
    layers = list(zip(params.decoder[::2], params.decoder[1::2]))
    for i, (w, b) in enumerate(layers):
        z = ad.matmul(z, w) + b
        if i < len(layers) - 1:
            z = ad.relu(z)
    return z


def forward(X, ops: Operators, params: ModelParams) -> dict[str, ad.Tensor]:
    R_h, R_p, R_enc = encode(X, ops, params)
    X_circ, R_star = line_propagate(R_enc, ops, params)
    X_hat = reconstruct(R_star, R_h, R_p, params)
    return {"R_h": R_h, "R_p": R_p, "R_encode": R_enc, "X_circ": X_circ,
            "R_star": R_star, "X_hat": X_hat}


REPRESENTATIONS = ("full", "encode", "star")


def representation(out: dict, kind: str = "full") -> np.ndarray:
    """User representation used for analysis: R*+R^h+R^p, R_encode, or R*."""
    def arr(key):
        v = out[key]
        return v.data if isinstance(v, ad.Tensor) else v

    if kind == "full":
        return np.hstack([arr("R_star"), arr("R_h"), arr("R_p")])
    if kind == "encode":
        return np.array(arr("R_encode"))
    if kind == "star":
        return np.array(arr("R_star"))
    raise ValueError(f"unknown representation {kind!r}; choose from {REPRESENTATIONS}")


def embed(X, ops: Operators, params: ModelParams) -> EmbeddingSet:
    out = forward(X, ops, params)
    return EmbeddingSet(**{k: v.data.copy() for k, v in out.items()})
