"""Command-line entry point: gen-data, train, sample, eval.

The experiment pipeline is dataset generation -> decoder (+flow) training ->
graph sampling -> MMD evaluation. Training checkpoints periodically and can
resume; all artifacts are written atomically.
"""

from __future__ import annotations

import argparse
import gc
import json
import os
import sys
import time

import numpy as np

from . import checkpoint as ckpt_io
from .config import ConfigError, RunConfig, format_config, load_config
from .decoder import dataset_nll, sample_graph, train_autodecoder
from .evalstats import lobster_validity, mmd_suite
from .flow import sample_codes, train_flow
from .graphdata import (
    gen_community,
    gen_cycles,
    gen_grid,
    gen_lobster,
    load_graphs,
    order_nodes,
    save_graphs,
    size_dist,
    split,
    to_lower,
)
from .graphdata.io import atomic_write_text

GENERATORS = {
    "cycles": gen_cycles,
    "grid": gen_grid,
    "lobster": gen_lobster,
    "community": gen_community,
}

CHECKPOINT_EVERY = 25  # epochs between periodic saves


def worker_count() -> int:
    raw = os.environ.get("GRADGEN_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_gen_data(args) -> None:
    gen = GENERATORS.get(args.dataset)
    if gen is None:
        raise ConfigError(f"unknown dataset {args.dataset!r}; choose from {sorted(GENERATORS)}")
    graphs = gen(seed=args.seed)
    save_graphs(args.out, graphs, comment=f"dataset={args.dataset} seed={args.seed}")
    sizes = [g.n for g in graphs]
    manifest = {
        "dataset": args.dataset,
        "seed": args.seed,
        "count": len(graphs),
        "min_nodes": min(sizes),
        "max_nodes": max(sizes),
        "total_edges": sum(g.num_edges() for g in graphs),
    }
    atomic_write_text(args.out + ".manifest", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(graphs)} graphs to {args.out} ({manifest['min_nodes']}..{manifest['max_nodes']} nodes)")


def _build_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "ordering", None):
        cfg.ordering = args.ordering
    if getattr(args, "block_size", None):
        cfg.K = args.block_size
    return cfg.validate()


class _EpochLog:
    def __init__(self, path: str, phase: str, quiet_every: int = 10):
        self.path = path
        self.phase = phase
        self.quiet_every = quiet_every

    def __call__(self, epoch: int, lr: float, nll: float) -> None:
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(f"{self.phase},{epoch},{lr:.10g},{nll:.10g}\n")
        if epoch % self.quiet_every == 0:
            print(f"[{self.phase}] epoch {epoch}: lr {lr:.3g}, nll {nll:.5g}", flush=True)


def _log_summary(path: str, key: str, value: float) -> None:
    with open(path, "a", encoding="utf-8") as f:
        f.write(f"summary,{key},{value:.10g}\n")


def cmd_train(args) -> None:
    gc.set_threshold(200_000, 50, 50)  # tensor graphs churn small objects
    cfg = _build_config(args)
    graphs = load_graphs(args.data)
    if not graphs:
        raise ConfigError(f"{args.data}: no graphs")
    ds = split(graphs, cfg.seed)
    save_graphs(args.out + ".train.g", ds.train, comment="train split")
    save_graphs(args.out + ".test.g", ds.test, comment="test split")
    train_ordered = [to_lower(g, order_nodes(g, cfg.ordering)) for g in ds.train]
    sizes = [g.n for g in ds.train]
    log_path = args.out + ".log"

    ckpt = None
    if args.resume and os.path.exists(args.out):
        ckpt = ckpt_io.load_checkpoint(args.out)
        if ckpt.config != cfg:
            raise ConfigError(f"{args.out}: checkpoint config differs from requested config")
        if ckpt.train_sizes != sizes:
            raise ConfigError(f"{args.out}: checkpoint was trained on different data")
        print(f"resuming: decoder epoch {ckpt.decoder_epochs_done}, flow epoch {ckpt.flow_epochs_done}")
    if ckpt is None:
        ckpt = ckpt_io.Checkpoint(
            config=cfg,
            decoder=None,  # filled by the first training chunk
            store=None,
            train_sizes=sizes,
        )
        if os.path.exists(log_path):
            os.unlink(log_path)

    decoder_total = cfg.decoder_epochs * (3 if cfg.mode == "grad_r" else 1)
    log = _EpochLog(log_path, "decoder")
    while ckpt.decoder_epochs_done < decoder_total:
        until = min(ckpt.decoder_epochs_done + CHECKPOINT_EVERY, decoder_total)
        params, store, _ = train_autodecoder(
            train_ordered,
            cfg,
            params=ckpt.decoder,
            store=ckpt.store,
            adam=ckpt.decoder_adam,
            start_epoch=ckpt.decoder_epochs_done,
            stop_epoch=until,
            log=log,
        )
        ckpt.decoder = params
        ckpt.store = store
        ckpt.decoder_epochs_done = until
        ckpt_io.save_checkpoint(args.out, ckpt)
    if ckpt.decoder is None:
        raise ConfigError("decoder training budget is zero epochs")
    ckpt.store.check()
    final_nll = dataset_nll(train_ordered, ckpt.store.codes, ckpt.decoder, k=cfg.K)
    _log_summary(log_path, "decoder_final_train_nll", final_nll)
    print(f"decoder done: clean train NLL {final_nll:.5g}")

    if cfg.mode == "grad":
        flow_log = _EpochLog(log_path, "flow")
        while ckpt.flow_epochs_done < cfg.flow_epochs:
            until = min(ckpt.flow_epochs_done + CHECKPOINT_EVERY, cfg.flow_epochs)
            flow, _ = train_flow(
                ckpt.store,
                train_ordered,
                cfg,
                params=ckpt.flow,
                adam=ckpt.flow_adam,
                start_epoch=ckpt.flow_epochs_done,
                epochs=until,
                log=flow_log,
            )
            ckpt.flow = flow
            ckpt.flow_epochs_done = until
            ckpt_io.save_checkpoint(args.out, ckpt)
        print("flow done")
    print(f"checkpoint: {args.out}")


def cmd_sample(args) -> None:
    gc.set_threshold(200_000, 50, 50)
    ckpt = ckpt_io.load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    mode = args.mode or cfg.mode
    if mode == "grad" and ckpt.flow is None:
        raise ckpt_io.CheckpointError(f"{args.checkpoint}: mode 'grad' needs saved flow parameters")
    dist = size_dist_from_counts(ckpt.train_sizes)
    seed = args.seed if args.seed is not None else cfg.seed
    rng = np.random.default_rng([seed, 0x5A3B1E])
    graphs = []
    times = []
    for _ in range(args.n_graphs):
        n = args.fixed_n if args.fixed_n else dist.sample(rng)
        t0 = time.perf_counter()
        if mode == "grad":
            codes = sample_codes(n, ckpt.flow, cfg.sigma_sample, rng)
        else:
            codes = rng.standard_normal((n, cfg.d))
        g = sample_graph(n, codes, ckpt.decoder, rng, k=cfg.K)
        times.append(time.perf_counter() - t0)
        graphs.append(g)
    save_graphs(args.out, graphs, comment=f"samples from {args.checkpoint} seed={seed} mode={mode}")
    report = {
        "checkpoint": str(args.checkpoint),
        "mode": mode,
        "n_graphs": len(graphs),
        "fixed_n": args.fixed_n,
        "mean_seconds_per_graph": float(np.mean(times)),
        "total_seconds": float(np.sum(times)),
    }
    atomic_write_text(args.out + ".timing", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"sampled {len(graphs)} graphs -> {args.out} ({report['mean_seconds_per_graph']:.3f}s per graph)")


def size_dist_from_counts(sizes: list[int]):
    from .graphdata.core import Graph, size_dist as _size_dist

    return _size_dist([Graph(int(n), []) for n in sizes])


def cmd_eval(args) -> None:
    samples = load_graphs(args.samples)
    test = load_graphs(args.test)
    if not samples or not test:
        raise ConfigError("both graph sets must be nonempty")
    scores = mmd_suite(samples, test, sigma=args.sigma, workers=worker_count())
    rows = [(stat, args.dataset, args.algorithm, scores[stat]) for stat in scores]
    validity = None
    if args.validity:
        validity = float(np.mean([lobster_validity(g) for g in samples]))
    lines = ["statistic        score", "-" * 28]
    for stat, _, _, score in rows:
        lines.append(f"{stat:<16} {score:.6g}")
    if validity is not None:
        lines.append(f"{'validity':<16} {validity:.4f}")
    text = "\n".join(lines) + "\n"
    atomic_write_text(args.out, text)
    csv_lines = ["statistic,dataset,algorithm,score"]
    for stat, dset, algo, score in rows:
        csv_lines.append(f"{stat},{dset},{algo},{score:.10g}")
    if validity is not None:
        csv_lines.append(f"validity,{args.dataset},{args.algorithm},{validity:.10g}")
    atomic_write_text(args.out + ".csv", "\n".join(csv_lines) + "\n")
    print(text, end="")


def cmd_show_config(args) -> None:
    print(format_config(_build_config(args)), end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradgen", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset container")
    g.add_argument("dataset", choices=sorted(GENERATORS))
    g.add_argument("out")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=cmd_gen_data)

    t = sub.add_parser("train", help="train the auto-decoder (and flow) on a dataset")
    t.add_argument("data")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--seed", type=int)
    t.add_argument("--mode", choices=["grad", "grad_d", "grad_r"])
    t.add_argument("--ordering", choices=["bfs", "dfs", "default", "degree", "kcore"])
    t.add_argument("--block-size", type=int, dest="block_size")
    t.add_argument("--resume", action="store_true", help="continue from an existing checkpoint")
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("sample", help="sample graphs from a checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("n_graphs", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--fixed-n", type=int, dest="fixed_n")
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=["grad", "grad_d", "grad_r"], help="override the checkpoint's sampling mode")
    s.set_defaults(fn=cmd_sample)

    e = sub.add_parser("eval", help="MMD evaluation of samples against a test set")
    e.add_argument("samples")
    e.add_argument("test")
    e.add_argument("--out", required=True)
    e.add_argument("--sigma", type=float, default=1.0)
    e.add_argument("--validity", action="store_true", help="also report lobster validity fraction")
    e.add_argument("--dataset", default="dataset")
    e.add_argument("--algorithm", default="gradgen")
    e.set_defaults(fn=cmd_eval)

    c = sub.add_parser("show-config", help="print the effective configuration")
    c.add_argument("--config")
    c.add_argument("--seed", type=int)
    c.add_argument("--mode", choices=["grad", "grad_d", "grad_r"])
    c.add_argument("--ordering", choices=["bfs", "dfs", "default", "degree", "kcore"])
    c.add_argument("--block-size", type=int, dest="block_size")
    c.set_defaults(fn=cmd_show_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (ConfigError, ckpt_io.CheckpointError, FileNotFoundError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
