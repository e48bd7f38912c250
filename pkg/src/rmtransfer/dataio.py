"""Dataset serialization: CSV for interoperability, a dense binary format
for large matrices.

CSV layout: header ``label,f0,f1,...``, one sample per line, label first,
floats in shortest round-trip decimal form.

Binary layout (extension-agnostic, magic-sniffed): ASCII magic ``RTML1``,
then little-endian u32 p, u32 m, then the p x m feature matrix as row-major
little-endian float64, then m labels as signed 8-bit integers.
"""

from __future__ import annotations

import struct

import numpy as np

from .gmm import LabeledDataset

MAGIC = b"RTML1"


def save_csv(data: LabeledDataset, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("label," + ",".join(f"f{i}" for i in range(data.p)) + "\n")
        for j in range(data.m):
            label = int(data.labels[j])
            cells = ",".join(repr(float(v)) for v in data.features[:, j])
            fh.write(f"{label},{cells}\n")


def load_csv(path) -> LabeledDataset:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("label"):
            raise ValueError(f"{path}: expected a 'label,f0,...' header")
        rows = []
        labels = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            labels.append(float(cells[0]))
            rows.append([float(v) for v in cells[1:]])
    if not rows:
        raise ValueError(f"{path}: no samples")
    features = np.array(rows, dtype=np.float64).T
    return LabeledDataset(features=features, labels=np.array(labels))


def save_rtml(data: LabeledDataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", data.p, data.m))
        fh.write(np.ascontiguousarray(data.features, dtype="<f8").tobytes())
        fh.write(data.labels.astype("i1").tobytes())


def load_rtml(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        p, m = struct.unpack("<II", fh.read(8))
        feats = np.frombuffer(fh.read(8 * p * m), dtype="<f8").reshape(p, m)
        labels = np.frombuffer(fh.read(m), dtype="i1").astype(np.float64)
    return LabeledDataset(features=feats.astype(np.float64), labels=labels)


def load_dataset(path) -> LabeledDataset:
    """Sniff the format: binary magic wins, otherwise CSV."""
    with open(path, "rb") as fh:
        head = fh.read(5)
    if head == MAGIC:
        return load_rtml(path)
    return load_csv(path)
