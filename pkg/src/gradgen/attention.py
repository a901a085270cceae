"""Multi-head graph attention restricted to 1-ring neighborhoods.

The layer maps per-node features through per-head query/key/value MLPs,
attends over each node's neighbors in the scaffold, projects concatenated
heads back to the input width, and applies two residual + layer-norm stages
with a feed-forward block in between. Nodes with empty neighborhoods receive
a zero attention update but still pass through the residual path.
"""

from __future__ import annotations

import numpy as np

from .tensorcore import engine as eng
from .tensorcore.engine import Tensor

__all__ = ["NeighborMask", "GaParams", "ga_forward", "init_ga_params"]

LN_EPS = 1e-5


class NeighborMask:
    """Symmetric boolean adjacency with an empty diagonal.

    ``matrix[i, j]`` is True when node j belongs to node i's neighborhood.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray, validate: bool = True):
        matrix = np.asarray(matrix, dtype=bool)
        if validate:
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError("neighbor mask must be square")
            if matrix.trace() != 0:
                raise ValueError("nodes cannot neighbor themselves")
            if not np.array_equal(matrix, matrix.T):
                raise ValueError("neighborhoods must be symmetric")
        self.matrix = matrix

    @classmethod
    def from_edges(cls, n: int, edges) -> "NeighborMask":
        m = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            m[u, v] = m[v, u] = True
        return cls(m, validate=False)

    @classmethod
    def complete(cls, n: int) -> "NeighborMask":
        m = np.ones((n, n), dtype=bool)
        np.fill_diagonal(m, False)
        return cls(m, validate=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[i])


class GaParams:
    """Learnable tensors of one graph-attention layer.

    Query/key/value MLPs are stored stacked over heads (leading axis H); the
    head projection is a single (H * d_s, d_in) matrix without bias.
    """

    FIELDS = (
        "wq1", "bq1", "wq2", "bq2",
        "wk1", "bk1", "wk2", "bk2",
        "wv1", "bv1", "wv2", "bv2",
        "wp",
        "ww1", "bw1", "ww2", "bw2",
        "ln1_g", "ln1_b", "ln2_g", "ln2_b",
    )

    def __init__(self, **tensors):
        missing = [f for f in self.FIELDS if f not in tensors]
        if missing:
            raise ValueError(f"GaParams missing fields: {missing}")
        for f in self.FIELDS:
            setattr(self, f, tensors[f])
        self.heads = self.wq1.shape[0]
        self.d_in = self.wq1.shape[1]
        self.d_s = self.wq2.shape[2]

    def tensors(self):
        for f in self.FIELDS:
            yield f, getattr(self, f)


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_ga_params(
    rng: np.random.Generator,
    d_in: int,
    d_s: int,
    heads: int,
    zero_final: bool = False,
) -> GaParams:
    """Glorot-initialized layer; ``zero_final`` zeroes the output layer-norm
    gain so the layer starts as the zero map (used by the flow's transforms)."""
    hq = 2 * d_in
    hf = 4 * d_in
    t = {}
    for role in ("q", "k", "v"):
        t[f"w{role}1"] = Tensor(_glorot(rng, (heads, d_in, hq), d_in, hq), requires_grad=True)
        t[f"b{role}1"] = Tensor(np.zeros((heads, 1, hq)), requires_grad=True)
        t[f"w{role}2"] = Tensor(_glorot(rng, (heads, hq, d_s), hq, d_s), requires_grad=True)
        t[f"b{role}2"] = Tensor(np.zeros((heads, 1, d_s)), requires_grad=True)
    t["wp"] = Tensor(_glorot(rng, (heads * d_s, d_in), heads * d_s, d_in), requires_grad=True)
    t["ww1"] = Tensor(_glorot(rng, (d_in, hf), d_in, hf), requires_grad=True)
    t["bw1"] = Tensor(np.zeros(hf), requires_grad=True)
    t["ww2"] = Tensor(_glorot(rng, (hf, d_in), hf, d_in), requires_grad=True)
    t["bw2"] = Tensor(np.zeros(d_in), requires_grad=True)
    t["ln1_g"] = Tensor(np.ones(d_in), requires_grad=True)
    t["ln1_b"] = Tensor(np.zeros(d_in), requires_grad=True)
    t["ln2_g"] = Tensor(np.zeros(d_in) if zero_final else np.ones(d_in), requires_grad=True)
    t["ln2_b"] = Tensor(np.zeros(d_in), requires_grad=True)
    return GaParams(**t)


def _head_mlp(z: Tensor, w1, b1, w2, b2) -> Tensor:
    # (m, d) -> (H, m, out) via broadcasting over the head axis
    return eng.linear(eng.relu(eng.linear(z, w1, b1)), w2, b2)


def ga_forward(z: Tensor, mask: NeighborMask, params: GaParams) -> Tensor:
    """One GA layer over ``m`` nodes; output matches the input width."""
    m = z.shape[0]
    if mask.n != m:
        raise ValueError(f"mask covers {mask.n} nodes, features have {m}")
    q = _head_mlp(z, params.wq1, params.bq1, params.wq2, params.bq2)
    k = _head_mlp(z, params.wk1, params.bk1, params.wk2, params.bk2)
    v = _head_mlp(z, params.wv1, params.bv1, params.wv2, params.bv2)
    logits = eng.attention_scores(q, k, params.d_s**-0.5)
    attn = eng.masked_softmax(logits, mask.matrix)
    mixed = eng.matmul(attn, v)  # (H, m, d_s); zero rows where no neighbors
    stacked = eng.reshape(eng.transpose(mixed, (1, 0, 2)), (m, params.heads * params.d_s))
    delta = eng.linear(stacked, params.wp)
    normed = eng.layer_norm(z + delta, params.ln1_g, params.ln1_b, eps=LN_EPS)
    ff = eng.linear(eng.relu(eng.linear(normed, params.ww1, params.bw1)), params.ww2, params.bw2)
    return eng.layer_norm(normed + ff, params.ln2_g, params.ln2_b, eps=LN_EPS)
