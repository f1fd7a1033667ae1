"""Pre-trained word vector loading and PCA compression."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np


class EmbeddingFormatError(ValueError):
    """Malformed vector file; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PcaRankError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    """Immutable form -> vector map with a shared unknown vector."""

    dim: int
    vectors: dict[str, np.ndarray]
    unknown_vector: np.ndarray

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, form: str) -> bool:
        return form in self.vectors

    def lookup(self, form: str) -> np.ndarray:
        return self.vectors.get(form, self.unknown_vector)


def load_vectors(
    source: Union[str, Path, io.IOBase],
    restrict_to: Optional[Iterable[str]] = None,
) -> EmbeddingTable:
    """Load a fastText-style .vec text stream.

    An optional "count dim" header is detected and skipped. With
    `restrict_to`, only the listed forms are retained and the unknown
    vector is the mean over the retained set; otherwise it is the mean over
    all loaded vectors.
    """
    if isinstance(source, (str, Path)):
        fh = open(source, encoding="utf-8")
        close = True
    else:
        fh = source
        close = False
    wanted = set(restrict_to) if restrict_to is not None else None
    vectors: dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    total = np.zeros(0)
    count = 0
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split(" ")
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header line
                except ValueError:
                    pass
            form = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:] if x != ""], dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError("non-numeric vector entry", lineno) from None
            if vec.size == 0:
                raise EmbeddingFormatError("row has no vector values", lineno)
            if dim is None:
                dim = vec.size
                total = np.zeros(dim)
            elif vec.size != dim:
                raise EmbeddingFormatError(
                    f"vector width {vec.size} differs from {dim}", lineno
                )
            if wanted is None or form in wanted:
                vectors[form] = vec
                total += vec
                count += 1
    finally:
        if close:
            fh.close()
    if dim is None:
        raise EmbeddingFormatError("no vector rows found", 1)
    if count == 0:
        warnings.warn("no vectors retained; unknown vector is zero")
        unknown = np.zeros(dim)
    else:
        unknown = total / count
    return EmbeddingTable(dim=dim, vectors=vectors, unknown_vector=unknown)


@dataclass
class PcaModel:
    """Principal components of a fitted sample, variance-ordered.

    Component signs are fixed by making the largest-magnitude coordinate of
    each component positive, so the projection is fully deterministic.
    """

    mean: np.ndarray
    components: np.ndarray          # (out_dim, in_dim), rows orthonormal
    explained_variance: np.ndarray  # (out_dim,), non-increasing

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) @ self.components.T

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return z @ self.components + self.mean

    def reconstruction_error(self, x: np.ndarray) -> float:
        """Mean squared distance between x and its projection."""
        back = self.inverse_transform(self.transform(x))
        return float(np.mean(np.sum((x - back) ** 2, axis=1)))


def fit_pca(matrix: np.ndarray, out_dim: int) -> PcaModel:
    """Fit PCA by SVD of the mean-centered sample."""
    x = np.asarray(matrix, dtype=np.float64)
    n, d = x.shape
    if out_dim > d:
        raise PcaRankError(f"cannot keep {out_dim} components of {d}-dim vectors")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(n, d) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank < out_dim:
        raise PcaRankError(
            f"sample has rank {rank} < {out_dim}; reduce the target dimension"
        )
    components = vt[:out_dim]
    for i in range(out_dim):
        peak = np.argmax(np.abs(components[i]))
        if components[i, peak] < 0:
            components[i] = -components[i]
    explained = (s[:out_dim] ** 2) / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def pca_compress(table: EmbeddingTable, out_dim: int = 100) -> EmbeddingTable:
    """Project every vector (and the unknown vector) onto the top principal
    components of the table's own vectors."""
    if table.dim < out_dim:
        raise PcaRankError(
            f"table dimension {table.dim} is below the target {out_dim}"
        )
    if len(table.vectors) < out_dim:
        raise PcaRankError(
            f"{len(table.vectors)} vectors cannot support {out_dim} components"
        )
    forms = list(table.vectors)
    matrix = np.stack([table.vectors[f] for f in forms])
    pca = fit_pca(matrix, out_dim)
    projected = pca.transform(matrix)
    vectors = {f: projected[i] for i, f in enumerate(forms)}
    unknown = pca.transform(table.unknown_vector[None, :])[0]
    return EmbeddingTable(dim=out_dim, vectors=vectors, unknown_vector=unknown)
