"""Graph-attention normalizing flow over per-node latent codes.

Each of the R steps updates one half of the feature channels conditioned on
the other half (scale bounded by a scaled tanh before exponentiation), then
normalizes the updated half with an actnorm (per-channel log-scale and bias)
followed by an invertible dense channel-mixing matrix. Forward maps codes to
a standard Gaussian with an exact log-determinant; sampling inverts the chain
on Gaussian draws over a fully connected neighborhood mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import GaParams, NeighborMask, ga_forward, init_ga_params
from .config import RunConfig
from .graphdata.core import OrderedLower
from .tensorcore import engine as eng
from .tensorcore.engine import NonFiniteError, Tensor
from .tensorcore.optim import AdamState, adam_step, lr_schedule

__all__ = [
    "FlowParams",
    "FlowStep",
    "FlowResult",
    "flow_forward",
    "flow_inverse",
    "flow_nll",
    "train_flow",
    "sample_codes",
    "init_flow_params",
    "mask_from_ordered",
]

SCALE_BOUND = 2.0  # exp argument is SCALE_BOUND * tanh(.)


class FlowStep:
    """One reversible step: four GA transforms and two normalizers."""

    def __init__(self, g1, g2, g3, g4, log_s1, b1, w1, log_s2, b2, w2):
        self.g = (g1, g2, g3, g4)
        self.log_s1, self.b1, self.w1 = log_s1, b1, w1
        self.log_s2, self.b2, self.w2 = log_s2, b2, w2

    def tensors(self):
        for i, ga in enumerate(self.g, start=1):
            for name, t in ga.tensors():
                yield f"g{i}/{name}", t
        yield "n1/log_s", self.log_s1
        yield "n1/b", self.b1
        yield "n1/w", self.w1
        yield "n2/log_s", self.log_s2
        yield "n2/b", self.b2
        yield "n2/w", self.w2


class FlowParams:
    def __init__(self, steps: list[FlowStep], initialized: bool = False):
        self.steps = steps
        self.initialized = initialized  # actnorm data-dependent init done

    @property
    def half_dim(self) -> int:
        return self.steps[0].log_s1.shape[0]

    def tensors(self):
        for i, step in enumerate(self.steps):
            for name, t in step.tensors():
                yield f"step{i}/{name}", t

    def as_dict(self) -> dict[str, Tensor]:
        return dict(self.tensors())


@dataclass
class FlowResult:
    y: Tensor
    logdet: Tensor


def _random_rotation(rng: np.random.Generator, k: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))


def init_flow_params(cfg: RunConfig, rng: np.random.Generator) -> FlowParams:
    """GA transforms start as the zero map (zeroed output gain) so every step
    begins near identity; mixing matrices start as random rotations."""
    d2 = cfg.d // 2
    steps = []
    for _ in range(cfg.R):
        gas = [init_ga_params(rng, d2, cfg.d_s_flow, cfg.heads, zero_final=True) for _ in range(4)]
        norms = []
        for _ in range(2):
            norms.append(
                (
                    Tensor(np.zeros(d2), requires_grad=True),
                    Tensor(np.zeros(d2), requires_grad=True),
                    Tensor(_random_rotation(rng, d2), requires_grad=True),
                )
            )
        steps.append(FlowStep(*gas, *norms[0], *norms[1]))
    return FlowParams(steps)


def mask_from_ordered(ol: OrderedLower) -> NeighborMask:
    edges = [(int(j), i) for i, row in enumerate(ol.rows) for j in row]
    return NeighborMask.from_edges(ol.n, edges)


def _scale(h: Tensor) -> Tensor:
    return eng.tanh(h) * Tensor(SCALE_BOUND)


def _actnorm_fwd(x: Tensor, log_s: Tensor, b: Tensor, w: Tensor) -> tuple[Tensor, Tensor]:
    n = x.shape[0]
    h = x * eng.exp(log_s) + b
    out = eng.matmul(h, w)
    ld = (eng.tsum(log_s) + eng.logabsdet(w)) * Tensor(float(n))
    return out, ld


def _check_invertible(w: np.ndarray) -> np.ndarray:
    sign, ld = np.linalg.slogdet(w)
    if sign == 0 or abs(sign * np.exp(ld)) <= 1e-12:
        raise np.linalg.LinAlgError("channel-mixing matrix is numerically singular")
    return np.linalg.inv(w)


def _actnorm_inv(y: np.ndarray, log_s: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    h = y @ _check_invertible(w)
    return (h - b) * np.exp(-log_s)


def flow_forward(z: Tensor | np.ndarray, mask: NeighborMask, params: FlowParams) -> FlowResult:
    """Map codes to the Gaussian side; ``logdet`` is log|det dY/dZ|."""
    z = z if isinstance(z, Tensor) else Tensor(z)
    d = z.shape[1]
    d2 = params.half_dim
    if d != 2 * d2:
        raise ValueError(f"flow expects {2 * d2} feature channels, got {d}")
    y0 = eng.narrow(z, 1, 0, d2)
    y1 = eng.narrow(z, 1, d2, d2)
    logdet = Tensor(0.0)
    for step in params.steps:
        g1, g2, g3, g4 = step.g
        s = _scale(ga_forward(y0, mask, g1))
        y1 = y1 * eng.exp(s) + ga_forward(y0, mask, g2)
        logdet = logdet + eng.tsum(s)
        y1, ld = _actnorm_fwd(y1, step.log_s1, step.b1, step.w1)
        logdet = logdet + ld
        s = _scale(ga_forward(y1, mask, g3))
        y0 = y0 * eng.exp(s) + ga_forward(y1, mask, g4)
        logdet = logdet + eng.tsum(s)
        y0, ld = _actnorm_fwd(y0, step.log_s2, step.b2, step.w2)
        logdet = logdet + ld
    return FlowResult(y=eng.concat([y0, y1], axis=1), logdet=logdet)


def flow_inverse(y: np.ndarray, mask: NeighborMask, params: FlowParams, return_logdet: bool = False):
    """Exact algebraic inversion of the forward chain (no gradients)."""
    y = np.asarray(y, dtype=np.float64)
    d2 = params.half_dim
    y0 = y[:, :d2]
    y1 = y[:, d2:]
    logdet = 0.0
    with eng.no_grad():
        for step in reversed(params.steps):
            g1, g2, g3, g4 = step.g
            y0 = _actnorm_inv(y0, step.log_s2.data, step.b2.data, step.w2.data)
            logdet -= y.shape[0] * (step.log_s2.data.sum() + np.linalg.slogdet(step.w2.data)[1])
            s = _scale(ga_forward(Tensor(y1), mask, g3)).data
            y0 = (y0 - ga_forward(Tensor(y1), mask, g4).data) * np.exp(-s)
            logdet -= s.sum()
            y1 = _actnorm_inv(y1, step.log_s1.data, step.b1.data, step.w1.data)
            logdet -= y.shape[0] * (step.log_s1.data.sum() + np.linalg.slogdet(step.w1.data)[1])
            s = _scale(ga_forward(Tensor(y0), mask, g1)).data
            y1 = (y1 - ga_forward(Tensor(y0), mask, g2).data) * np.exp(-s)
            logdet -= s.sum()
    z = np.concatenate([y0, y1], axis=1)
    return (z, logdet) if return_logdet else z


LOG_2PI = float(np.log(2.0 * np.pi))


def flow_nll(z: Tensor | np.ndarray, mask: NeighborMask, params: FlowParams) -> Tensor:
    """Exact negative log-likelihood under a standard-normal base density."""
    res = flow_forward(z, mask, params)
    n_entries = res.y.data.size
    gauss = eng.tsum(res.y * res.y) * Tensor(-0.5) + Tensor(-0.5 * n_entries * LOG_2PI)
    return eng.neg(gauss + res.logdet)


def sample_codes(n: int, params: FlowParams, sigma: float, rng: np.random.Generator, d: int | None = None) -> np.ndarray:
    """Codes for ``n`` nodes: Gaussian draw at scale sigma inverted through the
    flow with a complete-graph neighborhood."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = d if d is not None else 2 * params.half_dim
    y = sigma * rng.standard_normal((n, d))
    return flow_inverse(y, NeighborMask.complete(n), params)


# -- training -------------------------------------------------------------------


def init_actnorms(params: FlowParams, batch: list[tuple[np.ndarray, NeighborMask]]) -> None:
    """Data-dependent actnorm initialization: after the affine coupling, each
    channel of the first batch has zero mean and unit variance."""
    d2 = params.half_dim
    halves = [(z[:, :d2].copy(), z[:, d2:].copy()) for z, _ in batch]
    masks = [m for _, m in batch]
    with eng.no_grad():
        for step in params.steps:
            g1, g2, g3, g4 = step.g
            pre = []
            for (y0, y1), mask in zip(halves, masks):
                s = _scale(ga_forward(Tensor(y0), mask, g1)).data
                pre.append(y1 * np.exp(s) + ga_forward(Tensor(y0), mask, g2).data)
            _fit_actnorm(step.log_s1, step.b1, np.concatenate(pre, axis=0))
            for idx, ((y0, y1), mask) in enumerate(zip(halves, masks)):
                h = pre[idx] * np.exp(step.log_s1.data) + step.b1.data
                halves[idx] = (y0, h @ step.w1.data)
            pre = []
            for (y0, y1), mask in zip(halves, masks):
                s = _scale(ga_forward(Tensor(y1), mask, g3)).data
                pre.append(y0 * np.exp(s) + ga_forward(Tensor(y1), mask, g4).data)
            _fit_actnorm(step.log_s2, step.b2, np.concatenate(pre, axis=0))
            for idx, ((y0, y1), mask) in enumerate(zip(halves, masks)):
                h = pre[idx] * np.exp(step.log_s2.data) + step.b2.data
                halves[idx] = (h @ step.w2.data, y1)
    params.initialized = True


def _fit_actnorm(log_s: Tensor, b: Tensor, activations: np.ndarray) -> None:
    std = np.maximum(activations.std(axis=0), 1e-6)
    mean = activations.mean(axis=0)
    log_s.data = -np.log(std)
    b.data = -mean / std


def train_flow(
    store,
    ordered: list[OrderedLower],
    cfg: RunConfig,
    *,
    params: FlowParams | None = None,
    adam: AdamState | None = None,
    start_epoch: int = 0,
    epochs: int | None = None,
    log=None,
):
    """Adam training on noise-perturbed codes with per-graph true-structure
    masks; the objective is per-node NLL averaged over the batch."""
    codes = store.codes if hasattr(store, "codes") else list(store)
    if not codes:
        raise ValueError("latent store is empty")
    if len(codes) != len(ordered):
        raise ValueError("latent store and graph list are misaligned")
    total_epochs = epochs if epochs is not None else cfg.flow_epochs
    if params is None:
        params = init_flow_params(cfg, np.random.default_rng([cfg.seed, 0xF10A]))
    if adam is None:
        adam = AdamState()
    param_list = params.as_dict()
    masks = [mask_from_ordered(ol) for ol in ordered]
    n_train = len(codes)
    curve = []
    for epoch in range(start_epoch, total_epochs):
        lr = lr_schedule("exponential", epoch, base=cfg.flow_lr, gamma=cfg.flow_gamma)
        rng = np.random.default_rng([cfg.seed, 0xF10E, epoch])
        order = rng.permutation(n_train)
        if not params.initialized:
            first = [int(i) for i in order[: cfg.batch]]
            init_batch = [
                (codes[i] + cfg.flow_noise * rng.standard_normal(codes[i].shape), masks[i]) for i in first
            ]
            init_actnorms(params, init_batch)
        epoch_nlls = []
        for lo in range(0, n_train, cfg.batch):
            batch = order[lo : lo + cfg.batch]
            mean_grads = {name: np.zeros_like(t.data) for name, t in param_list.items()}
            for gi in batch:
                gi = int(gi)
                z = codes[gi]
                noisy = z + cfg.flow_noise * rng.standard_normal(z.shape) if cfg.flow_noise > 0 else z
                try:
                    loss = flow_nll(noisy, masks[gi], params) * Tensor(1.0 / z.shape[0])
                    grads = eng.grad(loss, list(param_list.values()))
                except NonFiniteError as e:
                    raise RuntimeError(f"flow training diverged at epoch {epoch}, graph {gi}: {e}") from e
                epoch_nlls.append(float(loss.data))
                for name, t in param_list.items():
                    mean_grads[name] += grads[t]
            for name in mean_grads:
                mean_grads[name] /= len(batch)
            adam_step(param_list, mean_grads, adam, lr)
        curve.append((epoch, lr, float(np.mean(epoch_nlls))))
        if log is not None:
            log(epoch, lr, float(np.mean(epoch_nlls)))
    return params, curve
