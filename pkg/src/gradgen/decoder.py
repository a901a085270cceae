"""Block-sequential auto-decoder: scaffold construction, Bernoulli-mixture edge
distributions, teacher-forced likelihood, joint training of parameters and
per-node latent codes, and graph sampling.

Per step the decoder sees the previously generated edges plus putative edges
from each new node to every other node, refines features with stacked GA
layers, and emits a C-component multivariate-Bernoulli mixture over the new
lower-triangular rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import GaParams, NeighborMask, ga_forward, init_ga_params
from .config import RunConfig
from .graphdata.core import OrderedLower, reconstruct
from .graphdata.core import Graph
from .tensorcore import engine as eng
from .tensorcore.engine import NonFiniteError, Tensor
from .tensorcore.optim import AdamState, adam_step, lr_schedule, sgd_project_step

__all__ = [
    "DecoderParams",
    "LatentStore",
    "BlockParams",
    "GenState",
    "Mlp3",
    "build_scaffold",
    "block_params",
    "block_log_prob",
    "graph_nll",
    "dataset_nll",
    "train_autodecoder",
    "sample_block",
    "sample_graph",
    "init_decoder_params",
    "prepare_steps",
]


class Mlp3:
    """Three-layer perceptron with ReLU nonlinearities."""

    FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")

    def __init__(self, **tensors):
        for f in self.FIELDS:
            setattr(self, f, tensors[f])

    def __call__(self, x: Tensor) -> Tensor:
        h = eng.relu(eng.linear(x, self.w1, self.b1))
        h = eng.relu(eng.linear(h, self.w2, self.b2))
        return eng.linear(h, self.w3, self.b3)

    def tensors(self):
        for f in self.FIELDS:
            yield f, getattr(self, f)


class DecoderParams:
    """All learnable tensors of the auto-decoder."""

    def __init__(self, gas: list[GaParams], f_lam: Mlp3, f_pi: Mlp3):
        self.gas = gas
        self.f_lam = f_lam
        self.f_pi = f_pi

    def tensors(self):
        for i, ga in enumerate(self.gas):
            for name, t in ga.tensors():
                yield f"ga{i}/{name}", t
        for name, t in self.f_lam.tensors():
            yield f"lam/{name}", t
        for name, t in self.f_pi.tensors():
            yield f"pi/{name}", t

    def as_dict(self) -> dict[str, Tensor]:
        return dict(self.tensors())


def _init_mlp3(rng: np.random.Generator, d_in: int, hidden: int, d_out: int) -> Mlp3:
    def glorot(fan_in, fan_out):
        b = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-b, b, size=(fan_in, fan_out))

    return Mlp3(
        w1=Tensor(glorot(d_in, hidden), requires_grad=True),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=Tensor(glorot(hidden, hidden), requires_grad=True),
        b2=Tensor(np.zeros(hidden), requires_grad=True),
        w3=Tensor(glorot(hidden, d_out), requires_grad=True),
        b3=Tensor(np.zeros(d_out), requires_grad=True),
    )


def init_decoder_params(cfg: RunConfig, rng: np.random.Generator) -> DecoderParams:
    gas = [init_ga_params(rng, cfg.d, cfg.d_s_decoder, cfg.heads) for _ in range(cfg.M)]
    f_lam = _init_mlp3(rng, cfg.d, 2 * cfg.d, cfg.C)
    f_pi = _init_mlp3(rng, cfg.d, 2 * cfg.d, cfg.C)
    return DecoderParams(gas, f_lam, f_pi)


@dataclass
class LatentStore:
    """Per-training-graph code matrices, kept inside the unit sup-norm ball."""

    codes: list[np.ndarray] = field(default_factory=list)

    def check(self) -> None:
        for i, z in enumerate(self.codes):
            if np.abs(z).max() > 1.0 + 1e-12:
                raise AssertionError(f"latent codes for graph {i} left the unit ball")


@dataclass
class GenState:
    """Decoder state between steps: generated rows plus carried node features."""

    step: int = 0
    rows: list[np.ndarray] = field(default_factory=list)
    carried: Tensor | None = None

    @property
    def n_prev(self) -> int:
        return len(self.rows)


@dataclass
class BlockParams:
    """Edge-distribution parameters for one block: mixture logits over C
    components and per-putative-pair Bernoulli logits."""

    pi_logits: Tensor  # (C,)
    lam_logits: Tensor  # (P, C)
    pair_i: np.ndarray
    pair_j: np.ndarray
    features: Tensor  # (m, d) node features after the GA stack

    def pi(self) -> np.ndarray:
        x = self.pi_logits.data
        e = np.exp(x - x.max())
        return e / e.sum()

    def lam(self) -> np.ndarray:
        x = self.lam_logits.data
        return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))


def build_scaffold(rows: list[np.ndarray], n_prev: int, k: int) -> NeighborMask:
    """Previously generated edges plus putative edges from each new node to all
    other nodes (previous and new)."""
    if k < 1 or n_prev < 0:
        raise ValueError("need k >= 1 and n_prev >= 0")
    m = n_prev + k
    mat = np.zeros((m, m), dtype=bool)
    for i in range(n_prev):
        js = rows[i]
        mat[i, js] = True
        mat[js, i] = True
    mat[n_prev:, :] = True
    mat[:, n_prev:] = True
    np.fill_diagonal(mat, False)
    return NeighborMask(mat, validate=False)


def _block_pairs(n_prev: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Putative pairs (i in the new block, j < i) in row-major order."""
    ii = []
    jj = []
    for i in range(n_prev, n_prev + k):
        ii.append(np.full(i, i, dtype=np.intp))
        jj.append(np.arange(i, dtype=np.intp))
    if not ii:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    return np.concatenate(ii), np.concatenate(jj)


def _run_block(
    new_codes: Tensor,
    carried: Tensor | None,
    mask: NeighborMask,
    pair_i: np.ndarray,
    pair_j: np.ndarray,
    params: DecoderParams,
) -> BlockParams:
    x = new_codes if carried is None else eng.concat([carried, new_codes], axis=0)
    for ga in params.gas:
        x = ga_forward(x, mask, ga)
    n_prev = mask.n - new_codes.shape[0]
    if new_codes.shape[0] == 1 and n_prev > 0:
        # single-row block: all pairs share node i, broadcast beats gathering
        diff = eng.narrow(x, 0, n_prev, 1) - eng.narrow(x, 0, 0, n_prev)
    elif len(pair_i):
        diff = eng.gather_rows(x, pair_i) - eng.gather_rows(x, pair_j)
    else:
        diff = eng.narrow(x, 0, 0, 0)
    lam_logits = params.f_lam(diff)
    pi_logits = eng.tsum(params.f_pi(diff), axis=0)
    return BlockParams(pi_logits=pi_logits, lam_logits=lam_logits, pair_i=pair_i, pair_j=pair_j, features=x)


def block_params(state: GenState, new_codes: Tensor | np.ndarray, params: DecoderParams) -> BlockParams:
    """Run the GA stack on the current scaffold and emit this block's edge
    distribution; ``features`` carries the refined embeddings to the caller."""
    new_codes = new_codes if isinstance(new_codes, Tensor) else Tensor(new_codes)
    k = new_codes.shape[0]
    n_prev = state.n_prev
    if state.carried is not None and state.carried.shape[0] != n_prev:
        raise ValueError("carried features out of sync with generated rows")
    mask = build_scaffold(state.rows, n_prev, k)
    pair_i, pair_j = _block_pairs(n_prev, k)
    return _run_block(new_codes, state.carried, mask, pair_i, pair_j, params)


def block_log_prob(observed: np.ndarray, bp: BlockParams) -> Tensor:
    """Log-likelihood of an observed 0/1 pair vector under the block mixture,
    computed with log-sum-exp over components."""
    observed = np.asarray(observed, dtype=np.float64)
    if observed.shape != bp.pair_i.shape:
        raise ValueError(f"observed block has {observed.shape} entries, expected {bp.pair_i.shape}")
    log_pi = bp.pi_logits - eng.logsumexp(bp.pi_logits)
    lam = bp.lam_logits
    eps_col = Tensor(observed[:, None])
    per_pair = eps_col * eng.logsigmoid(lam) + (Tensor(1.0) - eps_col) * eng.logsigmoid(-lam)
    comp = eng.tsum(per_pair, axis=0)
    return eng.logsumexp(log_pi + comp)


@dataclass
class _StepPlan:
    n_prev: int
    k: int
    mask: NeighborMask
    pair_i: np.ndarray
    pair_j: np.ndarray
    eps: np.ndarray


def prepare_steps(ol: OrderedLower, k: int) -> list[_StepPlan]:
    """Teacher-forcing plan: per-step scaffolds, pair indices, observed bits."""
    plans = []
    n = ol.n
    t = 0
    while t * k < n:
        n_prev = t * k
        kt = min(k, n - n_prev)
        mask = build_scaffold(ol.rows[:n_prev], n_prev, kt)
        pair_i, pair_j = _block_pairs(n_prev, kt)
        eps = np.zeros(len(pair_i))
        offset = 0
        for i in range(n_prev, n_prev + kt):
            eps[offset + ol.rows[i]] = 1.0
            offset += i
        plans.append(_StepPlan(n_prev=n_prev, k=kt, mask=mask, pair_i=pair_i, pair_j=pair_j, eps=eps))
        t += 1
    return plans


def graph_nll(ol: OrderedLower, codes: Tensor | np.ndarray, params: DecoderParams, k: int = 1, plans=None) -> Tensor:
    """Negative log-likelihood of an ordered graph under teacher forcing."""
    codes = codes if isinstance(codes, Tensor) else Tensor(codes)
    if codes.shape[0] != ol.n:
        raise ValueError("codes row count must equal the node count")
    if plans is None:
        plans = prepare_steps(ol, k)
    total = None
    carried = None
    for plan in plans:
        new_codes = eng.narrow(codes, 0, plan.n_prev, plan.k)
        bp = _run_block(new_codes, carried, plan.mask, plan.pair_i, plan.pair_j, params)
        lp = block_log_prob(plan.eps, bp)
        total = lp if total is None else total + lp
        carried = bp.features
    return eng.neg(total)


def dataset_nll(ordered: list[OrderedLower], codes: list[np.ndarray], params: DecoderParams, k: int = 1) -> float:
    """Mean per-graph NLL over a dataset with clean (noise-free) codes."""
    with eng.no_grad():
        vals = [float(graph_nll(ol, z, params, k=k).data) for ol, z in zip(ordered, codes)]
    return float(np.mean(vals))


def sample_block(bp: BlockParams, rng: np.random.Generator) -> np.ndarray:
    """Sample one block from its mixture: draw a component, then each putative
    edge independently from that component's Bernoulli means."""
    pi = bp.pi()
    comp = int(rng.choice(len(pi), p=pi))
    if len(bp.pair_i) == 0:
        return np.empty(0, dtype=bool)
    lam = bp.lam()[:, comp]
    return rng.random(len(lam)) < lam


def sample_graph(
    n: int,
    codes: np.ndarray,
    params: DecoderParams,
    rng: np.random.Generator,
    k: int = 1,
) -> Graph:
    """Draw a graph of ``n`` nodes block by block."""
    if codes.shape[0] != n:
        raise ValueError("codes row count must equal the requested node count")
    state = GenState()
    with eng.no_grad():
        while state.n_prev < n:
            kt = min(k, n - state.n_prev)
            bp = block_params(state, codes[state.n_prev : state.n_prev + kt], params)
            hits = sample_block(bp, rng)
            new_rows = []
            offset = 0
            for i in range(state.n_prev, state.n_prev + kt):
                new_rows.append(np.flatnonzero(hits[offset : offset + i]).astype(np.int64))
                offset += i
            state = GenState(
                step=state.step + 1,
                rows=state.rows + new_rows,
                carried=bp.features,
            )
    return reconstruct(OrderedLower(perm=list(range(n)), rows=state.rows))


# -- training ------------------------------------------------------------------


def _nll_and_grads(ol, codes_arr, params, param_list, code_tensor_needed, k, plans):
    """One evaluation: returns (nll value, param grads dict or None, code grad or None)."""
    codes = Tensor(codes_arr, requires_grad=code_tensor_needed)
    loss = graph_nll(ol, codes, params, k=k, plans=plans)
    leaves = list(param_list.values()) + ([codes] if code_tensor_needed else [])
    grads = eng.grad(loss, leaves)
    pgrads = {name: grads[t] for name, t in param_list.items()}
    cgrad = grads[codes] if code_tensor_needed else None
    return float(loss.data), pgrads, cgrad


def train_autodecoder(
    train_ordered: list[OrderedLower],
    cfg: RunConfig,
    *,
    params: DecoderParams | None = None,
    store: LatentStore | None = None,
    adam: AdamState | None = None,
    start_epoch: int = 0,
    epochs: int | None = None,
    stop_epoch: int | None = None,
    log=None,
):
    """Joint optimization of decoder parameters (Adam, step-decay schedule) and
    latent codes (projected gradient ascent, two updates per batch step).

    ``grad_r`` mode freezes the codes at their initial random draws and is
    conventionally run with a tripled epoch budget. ``stop_epoch`` ends the
    run early (for periodic checkpointing) while the decay schedule still
    spans the full budget. Returns the parameters, the latent store, and the
    loss curve as (epoch, lr, mean train NLL) rows.
    """
    if not train_ordered:
        raise ValueError("empty training set")
    total_epochs = epochs if epochs is not None else cfg.decoder_epochs * (3 if cfg.mode == "grad_r" else 1)
    stop = total_epochs if stop_epoch is None else min(stop_epoch, total_epochs)
    if params is None:
        params = init_decoder_params(cfg, np.random.default_rng([cfg.seed, 0xDEC0]))
    if store is None:
        rng = np.random.default_rng([cfg.seed, 0x1A7E])
        store = LatentStore([np.clip(rng.standard_normal((ol.n, cfg.d)), -1.0, 1.0) for ol in train_ordered])
    if adam is None:
        adam = AdamState()
    param_list = params.as_dict()
    plans = [prepare_steps(ol, cfg.K) for ol in train_ordered]
    learn_codes = cfg.mode != "grad_r"
    curve = []
    n_train = len(train_ordered)
    for epoch in range(start_epoch, stop):
        lr = lr_schedule("step-decay", epoch, base=cfg.tau, total=total_epochs)
        rng = np.random.default_rng([cfg.seed, 0xE90C, epoch])
        order = rng.permutation(n_train)
        epoch_nlls = []
        for lo in range(0, n_train, cfg.batch):
            batch = order[lo : lo + cfg.batch]
            # pass 1: simultaneous parameter and code update from shared grads
            mean_pgrads = {name: np.zeros_like(t.data) for name, t in param_list.items()}
            cgrads = {}
            for gi in batch:
                gi = int(gi)
                z = store.codes[gi]
                noisy = z + cfg.decoder_noise * rng.standard_normal(z.shape) if cfg.decoder_noise > 0 else z
                nll, pgrads, cgrad = _eval_checked(
                    train_ordered[gi], noisy, params, param_list, learn_codes, cfg.K, plans[gi], epoch, gi
                )
                epoch_nlls.append(nll)
                for name in mean_pgrads:
                    mean_pgrads[name] += pgrads[name]
                if learn_codes:
                    cgrads[gi] = cgrad
            for name in mean_pgrads:
                mean_pgrads[name] /= len(batch)
            adam_step(param_list, mean_pgrads, adam, lr)
            if learn_codes:
                for gi in batch:
                    gi = int(gi)
                    ascent = -cgrads[gi] - store.codes[gi]  # likelihood + Gaussian prior
                    store.codes[gi] = sgd_project_step(store.codes[gi], ascent, cfg.delta)
                # pass 2: second code update at the new parameters; parameter
                # tensors are frozen so backward skips their gradient blocks
                for t in param_list.values():
                    t.requires_grad = False
                try:
                    for gi in batch:
                        gi = int(gi)
                        z = store.codes[gi]
                        noisy = z + cfg.decoder_noise * rng.standard_normal(z.shape) if cfg.decoder_noise > 0 else z
                        codes = Tensor(noisy, requires_grad=True)
                        loss = graph_nll(train_ordered[gi], codes, params, k=cfg.K, plans=plans[gi])
                        try:
                            cgrad = eng.grad(loss, [codes])[codes]
                        except NonFiniteError:
                            _rerun_with_checks(train_ordered[gi], noisy, params, cfg.K, plans[gi], epoch, gi)
                            raise
                        ascent = -cgrad - store.codes[gi]
                        store.codes[gi] = sgd_project_step(store.codes[gi], ascent, cfg.delta)
                finally:
                    for t in param_list.values():
                        t.requires_grad = True
        curve.append((epoch, lr, float(np.mean(epoch_nlls))))
        if log is not None:
            log(epoch, lr, float(np.mean(epoch_nlls)))
    return params, store, curve


def _eval_checked(ol, noisy, params, param_list, learn_codes, k, plans, epoch, gi):
    try:
        return _nll_and_grads(ol, noisy, params, param_list, learn_codes, k, plans)
    except NonFiniteError:
        _rerun_with_checks(ol, noisy, params, k, plans, epoch, gi)
        raise


def _rerun_with_checks(ol, noisy, params, k, plans, epoch, gi):
    """Re-evaluate a diverged objective with per-op checks for a named diagnostic."""
    with eng.finite_checks():
        try:
            graph_nll(ol, Tensor(noisy), params, k=k, plans=plans)
        except NonFiniteError as e:
            raise RuntimeError(
                f"training diverged at epoch {epoch}, graph {gi}: {e}"
            ) from e
