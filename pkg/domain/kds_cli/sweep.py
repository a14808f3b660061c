"""
Clustering accuracy on concentric circles over a grid of atom counts and separations.
"""
import asyncio
import dataclasses
import logging
from dataclasses import dataclass

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
from tqdm import tqdm

from domain.kds.datagen import gen_concentric_circles
from domain.kds.errors import InvalidInputError
from domain.kds.spectral import cluster_pipeline, clustering_accuracy
from domain.kds.trainer import train
import kds_cfg
from storage.repository.RunRp import RunRp

SWEEP_FIGURE = "sweep.svg"


@dataclass
class SweepCell:
    m: int
    delta: float
    accuracy: float
    seeds: int


def _accuracy(config, m, delta, seed):
    Y, labels = gen_concentric_circles(config.n, delta, seed, config.noise or 0.0)
    train_config = dataclasses.replace(config, m=m, seed=seed).train_config(n=Y.shape[1])
    result = train(Y, train_config)
    pred, _ = cluster_pipeline(result.codes, 2, config.replicates, seed, config.mode)
    return clustering_accuracy(pred, labels)


def accuracy_table(cells):
    """(sorted m values, sorted deltas, len(deltas) x len(m) accuracy matrix)."""
    ms = sorted({c.m for c in cells})
    deltas = sorted({c.delta for c in cells})
    table = np.full((len(deltas), len(ms)), np.nan)
    for c in cells:
        table[deltas.index(c.delta), ms.index(c.m)] = c.accuracy
    return ms, deltas, table


def plot_accuracy_grid(cells, run_rp):
    ms, deltas, table = accuracy_table(cells)
    fig, ax = plt.subplots(figsize=(1.2 * len(ms) + 2, 0.8 * len(deltas) + 2))
    image = ax.imshow(table, vmin=0.5, vmax=1.0, cmap='viridis', origin='lower', aspect='auto')
    for i in range(len(deltas)):
        for j in range(len(ms)):
            ax.text(j, i, f"{table[i, j]:.2f}", ha='center', va='center', color='white', fontsize=8)
    ax.set_xticks(range(len(ms)), [str(m) for m in ms])
    ax.set_yticks(range(len(deltas)), [f"{d:g}" for d in deltas])
    ax.set_xlabel('m')
    ax.set_ylabel('delta')
    fig.colorbar(image, ax=ax, label='ACC')
    fig.tight_layout()
    path = run_rp.figure_path(SWEEP_FIGURE)
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


async def run_concentric_sweep(config):
    """Train and cluster concentric circles for every (m, delta) pair; ACC is averaged over seeds."""
    ms = sorted(set(config.sweep_m))
    deltas = sorted(set(config.sweep_delta))
    if not ms or not deltas:
        raise InvalidInputError("sweep needs at least one atom count and one delta")
    if min(ms) < 2:
        raise InvalidInputError(f"sweep atom counts must be >= 2 to split two clusters, got {config.sweep_m}")
    if config.sweep_seeds < 1:
        raise InvalidInputError(f"sweep_seeds must be positive, got {config.sweep_seeds}")
    run_rp = RunRp(config.out)
    seeds = [config.seed + s for s in range(config.sweep_seeds)]

    cells = []
    with tqdm(total=len(ms) * len(deltas) * len(seeds), desc="Sweep", unit="fit",
              disable=not kds_cfg.SHOW_PROGRESS) as pbar:
        for delta in deltas:
            for m in ms:
                scores = []
                for seed in seeds:
                    scores.append(await asyncio.to_thread(_accuracy, config, m, delta, seed))
                    pbar.update(1)
                cell = SweepCell(m=m, delta=delta, accuracy=float(np.mean(scores)), seeds=len(seeds))
                logging.info(f"delta={delta:g}, m={m}: mean ACC {cell.accuracy:.4f} over {len(seeds)} seeds")
                cells.append(cell)

    run_rp.save_sweep(cells)
    plot_accuracy_grid(cells, run_rp)
    return cells
