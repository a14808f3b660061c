import logging

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

CLUSTERS_FIGURE = "clusters.svg"


def plot_clusters(run_rp, Y, atoms, labels=None, atom_labels=None, name=CLUSTERS_FIGURE):
    """
    Planar data coloured by predicted label with the atoms drawn on top.

    Returns the written path, or None when the data is not two-dimensional.
    """
    Y = np.asarray(Y, dtype=float)
    atoms = np.asarray(atoms, dtype=float)
    if Y.shape[0] != 2 or atoms.shape[0] != 2:
        logging.info(f"Skipping {name}: only planar data is plotted (d = {Y.shape[0]})")
        return None

    fig, ax = plt.subplots(figsize=(6, 6))
    cmap = plt.get_cmap('tab10')
    if labels is None:
        ax.scatter(Y[0], Y[1], s=2, color='0.6', label='data')
    else:
        ax.scatter(Y[0], Y[1], s=2, c=np.asarray(labels) % 10, cmap=cmap, vmin=0, vmax=9)
    if atom_labels is None:
        ax.scatter(atoms[0], atoms[1], s=60, marker='*', color='black', label='atoms')
    else:
        ax.scatter(atoms[0], atoms[1], s=80, marker='*', c=np.asarray(atom_labels) % 10, cmap=cmap, vmin=0, vmax=9,
                   edgecolors='black', linewidths=0.6)
    ax.set_aspect('equal')
    ax.set_xlabel('x1')
    ax.set_ylabel('x2')
    fig.tight_layout()
    path = run_rp.figure_path(name)
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path
