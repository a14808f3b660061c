import numpy as np

from domain.kds.errors import StorageError
from storage.DefaultStorage import DefaultStorage

ATOMS_FILE = "atoms.csv"
CODES_FILE = "codes.csv"
LOSS_FILE = "loss_history.csv"


class ModelRp(DefaultStorage):
    def __init__(self, root):
        super().__init__(root)

    def save_model(self, atoms, codes, loss_history):
        return [self._write_matrix(ATOMS_FILE, atoms),
                self.save_codes(codes),
                self._write_text(LOSS_FILE, "".join(f"{float(value)!r}\n" for value in loss_history))]

    def save_codes(self, codes, name=CODES_FILE):
        """Sparse triplets `row,col,value` under a header line `m,n,nnz`."""
        codes = np.asarray(codes, dtype=float)
        rows, cols = np.nonzero(codes)
        lines = [f"{codes.shape[0]},{codes.shape[1]},{len(rows)}"]
        lines.extend(f"{r},{c},{float(codes[r, c])!r}" for r, c in zip(rows, cols))
        return self._write_text(name, "\n".join(lines) + "\n")

    def get_codes(self, path=CODES_FILE):
        lines = [line for line in self._read_text(path).splitlines() if line.strip()]
        full = self._path(path)
        if not lines:
            raise StorageError(f"empty codes file: {full}")
        try:
            m, n, nnz = (int(v) for v in lines[0].split(','))
            triplets = [line.split(',') for line in lines[1:]]
            rows = np.array([int(t[0]) for t in triplets], dtype=int)
            cols = np.array([int(t[1]) for t in triplets], dtype=int)
            values = np.array([float(t[2]) for t in triplets])
        except (ValueError, IndexError) as e:
            raise StorageError(f"malformed codes file {full}: {e}") from e
        if len(values) != nnz:
            raise StorageError(f"codes file {full} declares {nnz} entries but holds {len(values)}")
        if nnz and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise StorageError(f"codes file {full} has indices outside {m} x {n}")
        codes = np.zeros((m, n))
        codes[rows, cols] = values
        return codes

    def get_atoms(self, path=ATOMS_FILE):
        return self._read_matrix(path)

    def get_loss_history(self, path=LOSS_FILE):
        try:
            return [float(line) for line in self._read_text(path).split()]
        except ValueError as e:
            raise StorageError(f"malformed loss history {self._path(path)}: {e}") from e
