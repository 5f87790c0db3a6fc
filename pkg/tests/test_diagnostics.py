import json
import numpy as np
import pytest
from projhead_lab.diagnostics import (
    covariance_spectrum,
    diagnose,
    null_space_decompose,
    numerical_rank,
    rank_deficit,
    right_pseudo_inverse,
    write_diagnostics,
)
from projhead_lab.errors import NumericalError, ShapeError
from projhead_lab.models import init_encoder, init_head


def _elimination_rank(matrix: np.ndarray, rel_tol: float = 1e-8) -> int:
    """Rank by Gaussian elimination with partial pivoting."""
    a = np.array(matrix, dtype=np.float64)
    tol = rel_tol * max(np.abs(a).max(), 1e-300)
    rank, row = 0, 0
    rows, cols = a.shape
    for col in range(cols):
        if row >= rows:
            break
        pivot = row + int(np.argmax(np.abs(a[row:, col])))
        if abs(a[pivot, col]) <= tol:
            continue
        a[[row, pivot]] = a[[pivot, row]]
        a[row + 1 :] -= np.outer(a[row + 1 :, col] / a[row, col], a[row])
        row += 1
        rank += 1
    return rank


def test_spectrum_of_two_opposite_points():
    report = covariance_spectrum(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(report.eigenvalues, [2.0, 0.0])
    assert report.rank == 1


def test_spectrum_of_identical_rows():
    report = covariance_spectrum(np.tile([1.0, 2.0, 3.0], (4, 1)))
    np.testing.assert_array_equal(report.eigenvalues, np.zeros(3))
    assert report.rank == 0


def test_spectrum_of_rank_three_features():
    rng = np.random.default_rng(0)
    features = rng.standard_normal((100, 3)) @ rng.standard_normal((3, 8))
    report = covariance_spectrum(features)
    assert report.rank == 3
    assert report.eigenvalues.shape == (8,)
    assert np.all(np.diff(report.eigenvalues) <= 0)
    assert np.all(report.eigenvalues >= 0)
    expected = np.sort(np.linalg.eigvalsh(np.cov(features, rowvar=False)))[::-1]
    np.testing.assert_allclose(report.eigenvalues[:3], expected[:3], rtol=1e-10)


def test_spectrum_sums_to_total_variance():
    features = np.random.default_rng(1).standard_normal((30, 5)) * np.arange(1, 6)
    report = covariance_spectrum(features)
    assert report.eigenvalues.sum() == pytest.approx(np.var(features, axis=0, ddof=1).sum(), rel=1e-12)


def test_spectrum_pads_when_rows_are_few():
    report = covariance_spectrum(np.random.default_rng(2).standard_normal((3, 6)))
    assert report.eigenvalues.shape == (6,)
    assert report.rank == 2


def test_spectrum_needs_two_rows():
    with pytest.raises(ShapeError):
        covariance_spectrum(np.ones((1, 3)))


def test_numerical_rank_examples():
    assert numerical_rank(np.eye(4)) == 4
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.ones((5, 2))) == 1
    assert numerical_rank(np.diag([1.0, 1e-20])) == 1
    with pytest.raises(ShapeError):
        numerical_rank(np.zeros((0, 3)))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("rank", [1, 3, 7, 12])
def test_numerical_rank_matches_elimination(seed, rank):
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((50, rank)) @ rng.standard_normal((rank, 20))
    assert numerical_rank(matrix) == rank
    assert _elimination_rank(matrix) == rank


def test_duplicated_columns_do_not_add_rank():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((50, 15))
    matrix = np.concatenate([base, base[:, :5]], axis=1)
    assert numerical_rank(matrix) == 15
    assert _elimination_rank(matrix) == 15


def test_rank_deficit_examples():
    h = np.random.default_rng(4).standard_normal((40, 5))
    assert rank_deficit(h, h) == 0
    assert rank_deficit(h, h[:, :1]) == 4
    assert rank_deficit(h, h + 7.0) == 0
    with pytest.raises(ShapeError):
        rank_deficit(h, h[:10])


def test_pseudo_inverse_examples():
    np.testing.assert_allclose(right_pseudo_inverse(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(right_pseudo_inverse(np.array([[1.0, 0.0]])), [[1.0], [0.0]], atol=1e-15)
    np.testing.assert_allclose(right_pseudo_inverse(np.array([[2.0, 0.0]])), [[0.5], [0.0]], atol=1e-15)


def test_pseudo_inverse_needs_full_row_rank():
    with pytest.raises(NumericalError, match="σ_min"):
        right_pseudo_inverse(np.array([[1.0, 0.0], [2.0, 0.0]]))
    with pytest.raises(NumericalError):
        right_pseudo_inverse(np.ones((3, 2)))


def test_decompose_examples():
    h_r, h_n = null_space_decompose(np.array([[1.0, 0.0]]), np.array([3.0, 4.0]))
    np.testing.assert_allclose(h_r, [3.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(h_n, [0.0, 4.0], atol=1e-15)
    h_r, h_n = null_space_decompose(np.eye(2), np.array([3.0, 4.0]))
    np.testing.assert_allclose(h_r, [3.0, 4.0], atol=1e-15)
    np.testing.assert_allclose(h_n, [0.0, 0.0], atol=1e-15)


def test_decompose_identities_on_random_maps():
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = int(rng.integers(1, 6))
        m = int(rng.integers(d, 10))
        a = rng.standard_normal((d, m))
        h = rng.standard_normal((7, m))
        h_r, h_n = null_space_decompose(a, h)
        np.testing.assert_allclose(h_n @ a.T, 0.0, atol=1e-9)
        np.testing.assert_allclose(np.sum(h_r * h_n, axis=1), 0.0, atol=1e-9)
        np.testing.assert_allclose(h_r + h_n, h, atol=1e-12)
        np.testing.assert_allclose(h_r @ a.T, h @ a.T, atol=1e-9)
        pinv = right_pseudo_inverse(a)
        np.testing.assert_allclose(a @ pinv, np.eye(d), atol=1e-9)


def test_decompose_rejects_wrong_width():
    with pytest.raises(ShapeError):
        null_space_decompose(np.eye(3), np.ones((2, 4)))


def _features(n=100, p=40, m=32, seed=0):
    encoder = init_encoder([p, m], seed)
    x = np.random.default_rng(seed).standard_normal((n, p))
    return encoder, x


def test_diagnose_identity_head_has_no_deficit():
    encoder, x = _features()
    report, components = diagnose(encoder, init_head("none", 32), x)
    assert report.rank_deficit == 0
    assert report.nullspace is None
    assert set(components) == {"h", "z"}


def test_diagnose_diagonal_head():
    encoder, x = _features()
    report, components = diagnose(encoder, init_head("diagonal_low_rank", 32, d=16), x)
    assert report.h.rank == 32
    assert report.z.rank == 16
    assert report.rank_deficit == 16
    assert report.linear_rank_check == "ok"
    np.testing.assert_allclose(components["h_n"][:, :16], 0.0, atol=1e-12)
    np.testing.assert_allclose(components["h_r"][:, 16:], 0.0, atol=1e-12)


def test_diagnose_nonlinear_head_is_approximate():
    encoder, x = _features()
    head = init_head("nonlinear", 32, d=8, hidden=12)
    report, _ = diagnose(encoder, head, x)
    assert report.h.eigenvalues.shape == (32,)
    assert report.z.eigenvalues.shape == (8,)
    assert report.nullspace["approximate"] is True
    assert report.nullspace["map_shape"] == [12, 32]
    assert report.linear_rank_check is None


def test_diagnose_records_rank_deficient_map():
    encoder, x = _features()
    head = init_head("linear", 32, d=4)
    head.params["W"][:, 1] = head.params["W"][:, 0]
    report, components = diagnose(encoder, head, x)
    assert "σ_min" in report.nullspace["error"]
    assert "h_r" not in components


def test_write_diagnostics(tmp_path):
    encoder, x = _features()
    report, components = diagnose(encoder, init_head("linear", 32, d=4), x, checkpoint="final")
    written = write_diagnostics(report, components, str(tmp_path / "diag"))
    assert {p.rsplit("/", 1)[-1] for p in written} == {"diagnostics.json", "h_r.pht", "h_n.pht"}
    data = json.loads((tmp_path / "diag" / "diagnostics.json").read_text())
    assert data["m"] == 32 and data["d"] == 4
    assert data["rank_deficit"] == data["rank_h"] - data["rank_z"]
    assert data["artifacts"] == ["h_r.pht", "h_n.pht"]
    assert data["checkpoint"] == "final"
