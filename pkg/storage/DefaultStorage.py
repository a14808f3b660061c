import json
import logging
import os

import numpy as np

from domain.kds.errors import StorageError


class DefaultStorage:
    def __init__(self, root):
        self.root = root

    def _path(self, name):
        return name if os.path.isabs(name) else os.path.join(self.root, name)

    def _ensure_root(self):
        try:
            os.makedirs(self.root, exist_ok=True)
        except OSError as e:
            logging.error(f"({self.root}) cannot create directory: {e}")
            raise StorageError(f"cannot create output directory {self.root}: {e}") from e

    def _read_matrix(self, name):
        """CSV without header, one point per row; returned with points as columns."""
        path = self._path(name)
        try:
            rows = np.loadtxt(path, delimiter=',', ndmin=2)
        except FileNotFoundError as e:
            raise StorageError(f"file not found: {path}") from e
        except (OSError, ValueError) as e:
            logging.error(f"({path}) _read_matrix: {e}")
            raise StorageError(f"cannot read matrix from {path}: {e}") from e
        if rows.size == 0:
            raise StorageError(f"no rows in {path}")
        return rows.T

    def _write_matrix(self, name, M):
        self._ensure_root()
        path = self._path(name)
        try:
            np.savetxt(path, np.atleast_2d(np.asarray(M, dtype=float)).T, delimiter=',', fmt='%.17g')
        except OSError as e:
            logging.error(f"({path}) _write_matrix: {e}")
            raise StorageError(f"cannot write {path}: {e}") from e
        return path

    def _read_labels(self, name):
        path = self._path(name)
        try:
            labels = np.loadtxt(path, delimiter=',', dtype=int, ndmin=1)
        except FileNotFoundError as e:
            raise StorageError(f"file not found: {path}") from e
        except (OSError, ValueError) as e:
            logging.error(f"({path}) _read_labels: {e}")
            raise StorageError(f"cannot read labels from {path}: {e}") from e
        return labels.reshape(-1)

    def _write_labels(self, name, labels):
        self._ensure_root()
        path = self._path(name)
        try:
            np.savetxt(path, np.asarray(labels, dtype=int).reshape(-1, 1), fmt='%d')
        except OSError as e:
            logging.error(f"({path}) _write_labels: {e}")
            raise StorageError(f"cannot write {path}: {e}") from e
        return path

    def _read_text(self, name):
        path = self._path(name)
        try:
            with open(path, 'r', encoding='utf-8') as file:
                return file.read()
        except FileNotFoundError as e:
            raise StorageError(f"file not found: {path}") from e
        except OSError as e:
            logging.error(f"({path}) _read_text: {e}")
            raise StorageError(f"cannot read {path}: {e}") from e

    def _write_text(self, name, text):
        self._ensure_root()
        path = self._path(name)
        try:
            with open(path, 'w', encoding='utf-8') as file:
                file.write(text)
        except OSError as e:
            logging.error(f"({path}) _write_text: {e}")
            raise StorageError(f"cannot write {path}: {e}") from e
        return path

    def _write_json(self, name, data):
        def convert_json(obj):
            if isinstance(obj, np.integer):
                return int(obj)
            if isinstance(obj, np.floating):
                return float(obj)
            if isinstance(obj, np.ndarray):
                return obj.tolist()
            raise TypeError(f"{type(obj).__name__} is not JSON serializable")

        return self._write_text(name, json.dumps(data, ensure_ascii=False, indent=4, default=convert_json) + "\n")

    def _read_json(self, name):
        text = self._read_text(name)
        try:
            return json.loads(text)
        except ValueError as e:
            raise StorageError(f"malformed JSON in {self._path(name)}: {e}") from e
