import io

import numpy as np
import pytest

from tagparse.embeddings import (
    EmbeddingFormatError,
    EmbeddingTable,
    PcaRankError,
    fit_pca,
    load_vectors,
    pca_compress,
)


def table_from(matrix, prefix="w"):
    vectors = {f"{prefix}{i}": row for i, row in enumerate(np.asarray(matrix, dtype=float))}
    unknown = np.mean(matrix, axis=0)
    return EmbeddingTable(dim=matrix.shape[1], vectors=vectors, unknown_vector=unknown)


def test_load_with_header():
    t = load_vectors(io.StringIO("2 3\na 1 2 3\nb 3 2 1\n"))
    assert t.dim == 3 and len(t) == 2
    assert np.allclose(t.vectors["a"], [1, 2, 3])
    assert np.allclose(t.unknown_vector, [2, 2, 2])


def test_load_without_header():
    t = load_vectors(io.StringIO("a 1 2 3\nb 3 2 1\n"))
    assert t.dim == 3 and len(t) == 2


def test_width_mismatch_names_line():
    with pytest.raises(EmbeddingFormatError, match="line 3"):
        load_vectors(io.StringIO("2 3\na 1 2 3\nb 3 2\n"))


def test_non_numeric_entry():
    with pytest.raises(EmbeddingFormatError, match="non-numeric"):
        load_vectors(io.StringIO("a 1 x 3\n"))


def test_restrict_to_keeps_listed_and_means_over_retained():
    t = load_vectors(io.StringIO("a 1 2 3\nb 9 9 9\n"), restrict_to={"a"})
    assert len(t) == 1
    assert np.allclose(t.unknown_vector, [1, 2, 3])
    assert t.lookup("b") is t.unknown_vector


def test_pca_matches_covariance_eigendecomposition_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.normal(size=(50, 10))
        k = 5
        pca = fit_pca(x, k)
        cov = np.cov(x, rowvar=False)
        eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1]
        assert np.allclose(pca.explained_variance, eigvals[:k], atol=1e-8)
        # reconstruction error equals the energy in the discarded directions
        assert pca.reconstruction_error(x) == pytest.approx(
            eigvals[k:].sum() * (len(x) - 1) / len(x), abs=1e-8
        )


def test_projected_variance_non_increasing():
    rng = np.random.default_rng(4)
    pca = fit_pca(rng.normal(size=(60, 12)), 12)
    assert np.all(np.diff(pca.explained_variance) <= 1e-12)


def test_full_dim_projection_preserves_pairwise_distances():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 8))
    pca = fit_pca(x, 8)
    z = pca.transform(x)
    d_x = np.linalg.norm(x[:, None] - x[None, :], axis=-1)
    d_z = np.linalg.norm(z[:, None] - z[None, :], axis=-1)
    assert np.allclose(d_x, d_z, atol=1e-6)


def test_collinear_points_reconstruct_exactly():
    line = np.outer(np.arange(3.0), np.array([1.0, 2.0, 2.0]))
    pca = fit_pca(line, 1)
    assert pca.reconstruction_error(line) <= 1e-9


def test_component_sign_convention():
    rng = np.random.default_rng(6)
    pca = fit_pca(rng.normal(size=(40, 7)), 4)
    for row in pca.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_rank_deficiency_raises_with_advice():
    line = np.outer(np.arange(5.0), np.ones(4))
    with pytest.raises(PcaRankError, match="reduce the target dimension"):
        fit_pca(line, 2)


def test_compress_table_and_lookups():
    rng = np.random.default_rng(8)
    table = table_from(rng.normal(size=(40, 10)))
    small = pca_compress(table, 5)
    assert small.dim == 5
    assert small.lookup("w3").shape == (5,)
    assert small.lookup("missing").shape == (5,)
    assert np.array_equal(small.lookup("missing"), small.unknown_vector)


def test_compress_preconditions():
    rng = np.random.default_rng(9)
    table = table_from(rng.normal(size=(4, 10)))
    with pytest.raises(PcaRankError):
        pca_compress(table, 12)  # wider than the table
    with pytest.raises(PcaRankError):
        pca_compress(table, 8)  # more components than vectors support
