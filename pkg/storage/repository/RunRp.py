from storage.DefaultStorage import DefaultStorage

CONFIG_FILE = "config.resolved"
METRICS_FILE = "metrics.json"
PRED_LABELS_FILE = "pred_labels.csv"
BENCHMARK_FILE = "benchmark.csv"
SLOPES_FILE = "slopes.json"
SWEEP_FILE = "sweep.csv"


class RunRp(DefaultStorage):
    def __init__(self, root):
        super().__init__(root)

    def save_config(self, text):
        return self._write_text(CONFIG_FILE, text)

    def get_config(self, path=CONFIG_FILE):
        return self._read_text(path)

    def save_metrics(self, metrics):
        return self._write_json(METRICS_FILE, metrics)

    def get_metrics(self):
        return self._read_json(METRICS_FILE)

    def save_pred_labels(self, labels):
        return self._write_labels(PRED_LABELS_FILE, labels)

    def save_benchmark(self, records):
        header = "n,m,t_encode_seconds,t_cluster_seconds,accuracy,seed"
        lines = [header] + [f"{r.n},{r.m},{float(r.t_encode_seconds)!r},{float(r.t_cluster_seconds)!r},{float(r.accuracy)!r},{r.seed}"
                            for r in records]
        return self._write_text(BENCHMARK_FILE, "\n".join(lines) + "\n")

    def save_slopes(self, slopes):
        return self._write_json(SLOPES_FILE, slopes)

    def save_sweep(self, cells):
        lines = ["m,delta,accuracy,seeds"] + [f"{c.m},{float(c.delta)!r},{float(c.accuracy)!r},{c.seeds}" for c in cells]
        return self._write_text(SWEEP_FILE, "\n".join(lines) + "\n")

    def figure_path(self, name):
        self._ensure_root()
        return self._path(name)
