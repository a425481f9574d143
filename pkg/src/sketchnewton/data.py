"""Dataset ingestion and synthetic task generators.

Input files use the sparse libsvm text format: one record per line,
``label idx:val idx:val ...`` with 1-based, strictly increasing feature
indices.  Synthetic designs follow the exponential-singular-decay law
``sigma_k = 0.99^{k/2}`` with Haar singular vectors; ridge responses add
``N(0, 0.01)`` noise and logistic labels threshold a heavily noised margin
(``N(0, 1e4)`` variance), which makes the label marginal nearly balanced.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .objectives import Dataset

__all__ = [
    "LibsvmFormatError",
    "parse_libsvm",
    "write_libsvm",
    "map_logistic_labels",
    "synth_ridge",
    "synth_logistic",
    "haar_columns",
]


class LibsvmFormatError(ValueError):
    """Malformed libsvm input; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def parse_libsvm(path, task: str | None = None) -> Dataset:
    """Parse a libsvm-format file into a dense dataset.

    The width is the largest feature index seen.  With ``task="logistic"``
    labels in ``{-1, +1}`` are mapped to ``{0, 1}`` (labels already in
    ``{0, 1}`` pass through; anything else is rejected).
    """
    records = []
    max_index = 0
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmFormatError(lineno, f"bad label {tokens[0]!r}") from None
            pairs = []
            previous = 0
            for token in tokens[1:]:
                idx_str, _, val_str = token.partition(":")
                try:
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise LibsvmFormatError(lineno, f"bad feature token {token!r}") from None
                if idx < 1:
                    raise LibsvmFormatError(lineno, f"feature index {idx} is not 1-based")
                if idx <= previous:
                    raise LibsvmFormatError(
                        lineno, f"feature indices must be strictly increasing ({previous} then {idx})"
                    )
                previous = idx
                pairs.append((idx, val))
            max_index = max(max_index, previous)
            records.append((label, pairs))
    if not records:
        raise LibsvmFormatError(0, f"no records in {path}")
    n = len(records)
    X = np.zeros((n, max_index))
    y = np.empty(n)
    for i, (label, pairs) in enumerate(records):
        y[i] = label
        for idx, val in pairs:
            X[i, idx - 1] = val
    data = Dataset(X=X, y=y)
    if task == "logistic":
        data = map_logistic_labels(data)
    return data


def map_logistic_labels(data: Dataset) -> Dataset:
    """Map ``{-1, +1}`` labels to ``{0, 1}``; reject any other label set."""
    labels = set(np.unique(data.y).tolist())
    if labels <= {0.0, 1.0}:
        return data
    if labels <= {-1.0, 1.0}:
        return Dataset(X=data.X, y=(data.y + 1.0) / 2.0)
    raise ValueError(f"cannot interpret labels {sorted(labels)} as binary classes")


def write_libsvm(data: Dataset, path) -> None:
    """Write in libsvm format, skipping zero entries; floats use %.17g so a
    write/parse round trip is exact."""
    path = Path(path)
    with open(path, "w") as fh:
        for i in range(data.n):
            parts = [f"{data.y[i]:.17g}"]
            row = data.X[i]
            for j in np.nonzero(row)[0]:
                parts.append(f"{j + 1}:{row[j]:.17g}")
            fh.write(" ".join(parts) + "\n")


def haar_columns(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``(n, d)`` matrix with orthonormal columns, Haar-distributed."""
    a = rng.standard_normal((n, d))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def _synth_design(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    if n < d:
        raise ValueError(f"need n >= d, got n={n}, d={d}")
    u = haar_columns(rng, n, d)
    v = haar_columns(rng, d, d)
    singular_values = 0.99 ** (np.arange(1, d + 1) / 2.0)
    return (u * singular_values) @ v.T


def synth_ridge(n: int, d: int, seed: int) -> Dataset:
    """Regression data ``y = X theta* + N(0, 0.01)`` on the synthetic design."""
    rng = np.random.default_rng(seed)
    X = _synth_design(rng, n, d)
    theta_star = rng.standard_normal(d)
    y = X @ theta_star + rng.normal(0.0, 0.1, size=n)
    return Dataset(X=X, y=y)


def synth_logistic(n: int, d: int, seed: int) -> Dataset:
    """Binary labels ``1{x' theta* + noise > 0}`` with noise std 100."""
    rng = np.random.default_rng(seed)
    X = _synth_design(rng, n, d)
    theta_star = rng.standard_normal(d)
    margin = X @ theta_star + rng.normal(0.0, 100.0, size=n)
    return Dataset(X=X, y=(margin > 0).astype(float))
