import asyncio
import logging
import os
import time

import numpy as np
from colorama import Fore, Style

from domain.kds import verify
from domain.kds.datagen import PREPROCESS_MODES, gen_concentric_circles, gen_two_moons, gen_unit_circle, preprocess
from domain.kds.delaunay import make_delaunay_model, sample_delaunay_model
from domain.kds.encoder import support_sizes
from domain.kds.errors import DimensionError, InvalidInputError
from domain.kds.spectral import cluster_pipeline, clustering_accuracy
from domain.kds.trainer import train
from domain.kds_cli.benchmark import run_benchmark
from domain.kds_cli.plots import plot_clusters
from domain.kds_cli.run_config import serialize
from domain.kds_cli.sweep import run_concentric_sweep
from kds_cfg import MOONS_NOISE, SUPPORT_THRESHOLD
from storage.repository.DatasetRp import DatasetRp
from storage.repository.ModelRp import ModelRp
from storage.repository.RunRp import RunRp


def _open(repository, path):
    """Repository rooted at the directory of a user supplied path, plus the file name inside it."""
    return repository(os.path.dirname(path) or "."), os.path.basename(path)


def load_csv_dataset(path, labels_path=None):
    """Data CSV (one point per row) plus optional labels; returns (d x n data, labels or None)."""
    rp, name = _open(DatasetRp, path)
    Y = rp.get_data(name)
    labels = None
    if labels_path is not None:
        rp, name = _open(DatasetRp, labels_path)
        labels = rp.get_labels(name)
        if len(labels) != Y.shape[1]:
            raise InvalidInputError(f"{labels_path} holds {len(labels)} labels for {Y.shape[1]} points")
    return Y, labels


def _random_delaunay_atoms(config, rng):
    boxes = []
    for c in range(2):
        box = rng.uniform(0.0, 1.0, size=(2, config.atoms_per_cluster))
        box[0] += c * config.cluster_offset
        boxes.append(box)
    return np.hstack(boxes), np.repeat([0, 1], config.atoms_per_cluster)


async def cmd_generate(config):
    dataset_rp = DatasetRp(config.out)
    true_codes = None
    if config.dataset == "two-moons":
        Y, labels = gen_two_moons(config.n, MOONS_NOISE if config.noise is None else config.noise, config.seed)
    elif config.dataset == "concentric":
        Y, labels = gen_concentric_circles(config.n, config.delta, config.seed, config.noise or 0.0)
    elif config.dataset == "unit-circle":
        Y, labels = gen_unit_circle(config.n, config.noise or 0.0, config.seed)
    else:
        if config.atoms_file is not None:
            rp, name = _open(DatasetRp, config.atoms_file)
            atoms = rp.get_atoms(name)
            if config.atom_clusters_file is None:
                raise InvalidInputError("atoms_file needs atom_clusters_file with one cluster id per atom")
            rp, name = _open(DatasetRp, config.atom_clusters_file)
            atom_cluster = rp.get_labels(name)
        else:
            atoms, atom_cluster = _random_delaunay_atoms(config, np.random.default_rng(config.seed))
        model = make_delaunay_model(atoms, atom_cluster, config.noise or 0.0)
        Y, truth = sample_delaunay_model(model, config.n, seed=config.seed, weighting=config.weighting)
        labels, true_codes = truth.labels, truth.true_codes

    paths = dataset_rp.save_dataset(Y, labels, true_codes)
    RunRp(config.out).save_config(serialize(config))
    logging.info(f"Generated {config.dataset}: {Y.shape[1]} points in {Y.shape[0]} dimensions -> {', '.join(paths)}")
    return 0


def _atom_degree_stats(codes):
    degrees = codes.sum(axis=1)
    return {"atom_degree_min": float(degrees.min()), "atom_degree_max": float(degrees.max()),
            "unused_atoms": int(np.count_nonzero(degrees <= 1e-12))}


async def _cluster_codes(codes, config, labels, atoms=None):
    start = time.perf_counter()
    pred, atom_pred = await asyncio.to_thread(cluster_pipeline, codes, config.k, config.replicates, config.seed,
                                              config.mode, config.include_atoms, atoms)
    seconds = time.perf_counter() - start
    acc = clustering_accuracy(pred, labels) if labels is not None else None
    return pred, atom_pred, acc, seconds


async def _fit_one(Y, config, out, lam, labels):
    result = await asyncio.to_thread(train, Y, config.train_config(lam=lam, n=Y.shape[1]))
    ModelRp(out).save_model(result.atoms, result.codes, result.loss_history)
    metrics = {
        "acc": None,
        "mean_support": float(support_sizes(result.codes, SUPPORT_THRESHOLD).mean()),
        "epochs": len(result.loss_history),
        "seconds_encode": result.encode_seconds,
        "seconds_cluster": None,
        "final_loss": result.loss_history[-1],
        "lambda": lam,
        **_atom_degree_stats(result.codes),
    }
    if result.alpha is not None:
        metrics["alpha"] = result.alpha
    pred = atom_pred = None
    if config.k is not None:
        pred, atom_pred, acc, seconds = await _cluster_codes(result.codes, config, labels, result.atoms)
        RunRp(out).save_pred_labels(np.concatenate([pred, atom_pred]))
        metrics["acc"] = acc
        metrics["seconds_cluster"] = seconds
    plot_clusters(RunRp(out), Y, result.atoms, pred, atom_pred)
    RunRp(out).save_metrics(metrics)
    logging.info(f"Fit written to {out}: mean support {metrics['mean_support']:.3f}, ACC {metrics['acc']}")
    return metrics


async def cmd_fit(config):
    """
    Train a dictionary on a data CSV and write atoms, codes, loss history and metrics.

    `preprocess = best` and a lambda sweep run one fit per variant in sub-directories
    and summarise them; with labels and k the best variant is picked by ACC.
    """
    if config.data is None:
        raise InvalidInputError("fit needs a data file (--data)")
    Y_raw, labels = load_csv_dataset(config.data, config.labels)
    modes = PREPROCESS_MODES if config.preprocess == "best" else (config.preprocess,)
    lambdas = config.lambda_sweep or (config.lam,)
    variants = [(mode, lam) for mode in modes for lam in lambdas]
    RunRp(config.out).save_config(serialize(config))

    if len(variants) == 1:
        mode, lam = variants[0]
        Y = Y_raw if mode == "none" else preprocess(Y_raw, mode)
        await _fit_one(Y, config, config.out, lam, labels)
        return 0

    summary = {}
    for mode, lam in variants:
        name = f"{mode}_lambda_{lam:g}"
        Y = Y_raw if mode == "none" else preprocess(Y_raw, mode)
        summary[name] = await _fit_one(Y, config, os.path.join(config.out, name), lam, labels)
    report = {"variants": summary}
    scored = {name: m["acc"] for name, m in summary.items() if m["acc"] is not None}
    if scored:
        report["best"] = max(scored, key=scored.get)
        logging.info(f"Best variant {report['best']} with ACC {scored[report['best']]:.4f}")
    RunRp(config.out).save_metrics(report)
    return 0


async def cmd_cluster(config):
    if config.codes is None or config.k is None:
        raise InvalidInputError("cluster needs a codes file (--codes) and the number of clusters (--k)")
    rp, name = _open(ModelRp, config.codes)
    codes = rp.get_codes(name)
    m, n = codes.shape
    if config.k > m:
        raise DimensionError(f"k = {config.k} exceeds the number of atoms m = {m}")
    labels = None
    if config.labels is not None:
        rp, name = _open(DatasetRp, config.labels)
        labels = rp.get_labels(name)
        if len(labels) != n:
            raise InvalidInputError(f"{config.labels} holds {len(labels)} labels but the codes cover {n} points")
    atoms = None
    if config.atoms is not None:
        rp, name = _open(DatasetRp, config.atoms)
        atoms = rp.get_atoms(name)

    pred, atom_pred, acc, seconds = await _cluster_codes(codes, config, labels, atoms)
    run_rp = RunRp(config.out)
    run_rp.save_pred_labels(np.concatenate([pred, atom_pred]))
    run_rp.save_metrics({"acc": acc, "mean_support": float(support_sizes(codes, SUPPORT_THRESHOLD).mean()),
                         "epochs": None, "seconds_encode": None, "seconds_cluster": seconds,
                         **_atom_degree_stats(codes)})
    if config.data is not None and atoms is not None:
        Y, _ = load_csv_dataset(config.data)
        if Y.shape[1] != n:
            raise InvalidInputError(f"{config.data} holds {Y.shape[1]} points but the codes cover {n}")
        plot_clusters(run_rp, Y, atoms, pred, atom_pred)
    run_rp.save_config(serialize(config))
    logging.info(f"Clustered {n} points with k={config.k}, mode={config.mode}: ACC {acc}")
    return 0


async def cmd_benchmark(config):
    RunRp(config.out).save_config(serialize(config))
    await run_benchmark(config)
    return 0


async def cmd_sweep(config):
    RunRp(config.out).save_config(serialize(config))
    await run_concentric_sweep(config)
    return 0


def _report_line(result):
    status = f"{Fore.GREEN}PASS{Style.RESET_ALL}" if result.passed else f"{Fore.RED}FAIL{Style.RESET_ALL}"
    return (f"{status} {result.name}: {result.checked} checked, {result.skipped} skipped, "
            f"{len(result.failures)} failures ({result.seconds:.1f}s)")


async def cmd_verify(config):
    names = [config.suite] if config.suite is not None else list(verify.SUITES)
    results = []
    for name in names:
        result = await asyncio.to_thread(verify.run_suite, name, config.seed)
        print(_report_line(result))
        for failure in result.failures[:5]:
            print(f"    {failure}")
        results.append(result)
    RunRp(config.out).save_metrics({r.name: {"passed": r.passed, "checked": r.checked, "skipped": r.skipped,
                                             "failures": r.failures, "seconds": r.seconds} for r in results})
    return 0 if all(r.passed for r in results) else 1


COMMAND_HANDLERS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "cluster": cmd_cluster,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}
