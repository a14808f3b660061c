from storage.DefaultStorage import DefaultStorage

DATA_FILE = "data.csv"
LABELS_FILE = "labels.csv"
TRUE_CODES_FILE = "true_codes.csv"


class DatasetRp(DefaultStorage):
    def __init__(self, root):
        super().__init__(root)

    def save_dataset(self, Y, labels=None, true_codes=None):
        paths = [self._write_matrix(DATA_FILE, Y)]
        if labels is not None:
            paths.append(self._write_labels(LABELS_FILE, labels))
        if true_codes is not None:
            paths.append(self._write_matrix(TRUE_CODES_FILE, true_codes))
        return paths

    def get_data(self, path=DATA_FILE):
        return self._read_matrix(path)

    def get_labels(self, path=LABELS_FILE):
        return self._read_labels(path)

    def get_atoms(self, path):
        return self._read_matrix(path)
