import os

# output
OUTPUT_ROOT = os.environ.get("KDS_OUTPUT_ROOT", "runs")
SHOW_PROGRESS = True

# logging
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

# simplex / encoder
SIMPLEX_TOL = 1e-9
SUPPORT_THRESHOLD = 1e-3
POWER_ITER_TOL = 1e-8
POWER_ITER_MAX = 100000
ETA_RULE = "standard"

# trainer defaults, tuned for noisy two moons
ATOMS = 24
LAMBDA = 5.0
LAYERS = 15
LEARNING_RATE = 1e-3
EPOCHS = 1000
BATCH_SIZE = 10000
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
SEED = 0
DIVERGENCE_FACTOR = 1e6

# spectral
SPECTRAL_MODE = "quadratic"
KMEANS_REPLICATES = 10
KMEANS_MAX_ITER = 300
ZERO_DEGREE_TOL = 1e-12

# datagen
MOONS_NOISE = 0.05
CIRCLES_DELTA = 0.15
DELAUNAY_TOL = 1e-9

# oracle
ORACLE_MAX_ITER = 10 ** 6
NAIVE_EMBEDDING_MAX_NODES = 20000
PROGRAM13_MAX_ATOMS = 12

# benchmark
BENCHMARK_GRID = (10000, 20000, 40000, 80000)
BENCHMARK_REPEATS = 3
BENCHMARK_TRAIN_N = 5000
BENCHMARK_TRAIN_EPOCHS = 200

# concentric circles accuracy grid
SWEEP_ATOMS = (16, 32, 64)
SWEEP_DELTAS = (0.05, 0.1, 0.15, 0.2)
SWEEP_SEEDS = 3

# per-dataset hyperparameters; real datasets are read from a user supplied CSV
DATASET_PRESETS = {
    'moons': {'T': 15, 'lambda': 5.0, 'learning_rate': 1e-3, 'epochs': 1000, 'batch_size': 10000, 'm': 24},
    'mnist5': {'T': 100, 'lambda': 0.5, 'learning_rate': 1e-3, 'epochs': 30, 'batch_size': 1024, 'm': 500},
    'yaleb': {'T': 50, 'lambda': 0.1, 'learning_rate': 1e-4, 'epochs': 15, 'batch_size': 1},
    'salinasa': {'T': 100, 'lambda': 2.0, 'learning_rate': 1e-4, 'epochs': 30, 'batch_size': 128},
}
