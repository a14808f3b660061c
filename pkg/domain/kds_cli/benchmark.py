import asyncio
import logging
import statistics
import time
from dataclasses import dataclass

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
from tqdm import tqdm

from domain.kds.datagen import gen_two_moons
from domain.kds.encoder import encode_all
from domain.kds.errors import InvalidInputError
from domain.kds.spectral import cluster_pipeline, clustering_accuracy
from domain.kds.trainer import train
import kds_cfg
from storage.repository.RunRp import RunRp


@dataclass
class BenchmarkRecord:
    n: int
    m: int
    t_encode_seconds: float
    t_cluster_seconds: float
    accuracy: float
    seed: int


def timed(func, repeats):
    """Median wall-clock time of `repeats` calls after one discarded warmup call; returns (seconds, last result)."""
    result = func()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        result = func()
        times.append(time.perf_counter() - start)
    return statistics.median(times), result


def fit_slopes(records):
    """Least-squares slopes of log time against log n for the encode and cluster steps."""
    if len({r.n for r in records}) < 3:
        raise InvalidInputError(f"slope fit needs at least 3 distinct n, got {len({r.n for r in records})}")
    log_n = np.log([r.n for r in records])
    encode_slope = np.polyfit(log_n, np.log([r.t_encode_seconds for r in records]), 1)[0]
    cluster_slope = np.polyfit(log_n, np.log([r.t_cluster_seconds for r in records]), 1)[0]
    return {"encode_slope": float(encode_slope), "cluster_slope": float(cluster_slope),
            "n": [r.n for r in records]}


def plot_timings(records, run_rp):
    n = [r.n for r in records]
    paths = []
    for name, log_scale in (("timing.svg", False), ("timing_loglog.svg", True)):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(n, [r.t_encode_seconds for r in records], 'o-', label='encode')
        ax.plot(n, [r.t_cluster_seconds for r in records], 's-', label='cluster')
        if log_scale:
            ax.set_xscale('log')
            ax.set_yscale('log')
        ax.set_xlabel('n')
        ax.set_ylabel('seconds')
        ax.legend()
        fig.tight_layout()
        path = run_rp.figure_path(name)
        fig.savefig(path, format='svg')
        plt.close(fig)
        paths.append(path)
    return paths


async def run_benchmark(config):
    """Train one dictionary on two moons, then time encode-all and clustering over the n grid."""
    grid = sorted(set(config.grid))
    if not grid or min(grid) < 2:
        raise InvalidInputError(f"benchmark grid must hold sizes >= 2, got {config.grid}")
    noise = kds_cfg.MOONS_NOISE if config.noise is None else config.noise
    run_rp = RunRp(config.out)

    Y_train, _ = gen_two_moons(config.train_n, noise, seed=config.seed)
    train_config = config.train_config(n=config.train_n)
    train_config.epochs = config.train_epochs
    model = await asyncio.to_thread(train, Y_train, train_config)
    params = train_config.encoder
    workers = 1 if config.deterministic else config.workers

    records = []
    with tqdm(total=len(grid), desc="Benchmark", unit="n", disable=not kds_cfg.SHOW_PROGRESS) as pbar:
        for n in grid:
            Y, labels = gen_two_moons(n, noise, seed=config.seed + n)
            t_encode, X = await asyncio.to_thread(
                timed, lambda: encode_all(model.atoms, Y, params, alpha=model.alpha, workers=workers), config.repeats)
            t_cluster, (pred, _) = await asyncio.to_thread(
                timed, lambda: cluster_pipeline(X, 2, config.replicates, config.seed, config.mode), config.repeats)
            record = BenchmarkRecord(n=n, m=config.m, t_encode_seconds=t_encode, t_cluster_seconds=t_cluster,
                                     accuracy=clustering_accuracy(pred, labels), seed=config.seed)
            logging.info(f"n={n}: encode {t_encode:.3f}s, cluster {t_cluster:.3f}s, ACC {record.accuracy:.4f}")
            records.append(record)
            pbar.update(1)

    run_rp.save_benchmark(records)
    slopes = None
    if len(records) >= 3:
        slopes = fit_slopes(records)
        run_rp.save_slopes(slopes)
        logging.info(f"Log-log slopes: encode {slopes['encode_slope']:.3f}, cluster {slopes['cluster_slope']:.3f}")
    else:
        logging.warning(f"{len(records)} grid points are too few for a slope fit, slopes.json not written")
    plot_timings(records, run_rp)
    return records, slopes
