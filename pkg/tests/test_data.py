"""Dataset ingestion and synthetic generator tests."""

import numpy as np
import pytest

from sketchnewton.data import (
    LibsvmFormatError,
    map_logistic_labels,
    parse_libsvm,
    synth_logistic,
    synth_ridge,
    write_libsvm,
)
from sketchnewton.objectives import Dataset


class TestParseLibsvm:
    def test_basic_record(self, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("1 1:0.5 3:2.0\n")
        data = parse_libsvm(path)
        assert data.y.tolist() == [1.0]
        assert data.X.tolist() == [[0.5, 0.0, 2.0]]

    def test_negative_label_maps_for_logistic(self, tmp_path):
        path = tmp_path / "b.txt"
        path.write_text("-1 2:1.0\n+1 1:3.0\n")
        data = parse_libsvm(path, task="logistic")
        assert data.y.tolist() == [0.0, 1.0]
        assert data.X.tolist() == [[0.0, 1.0], [3.0, 0.0]]

    def test_rejects_duplicate_and_decreasing_indices(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("1 2:1.0 2:3.0\n")
        with pytest.raises(LibsvmFormatError) as err:
            parse_libsvm(path)
        assert err.value.lineno == 1
        path.write_text("1 1:1.0\n-1 3:1.0 2:5.0\n")
        with pytest.raises(LibsvmFormatError) as err:
            parse_libsvm(path)
        assert err.value.lineno == 2

    def test_rejects_malformed_tokens(self, tmp_path):
        path = tmp_path / "d.txt"
        path.write_text("abc 1:1.0\n")
        with pytest.raises(LibsvmFormatError):
            parse_libsvm(path)
        path.write_text("1 x:1.0\n")
        with pytest.raises(LibsvmFormatError):
            parse_libsvm(path)
        path.write_text("1 0:1.0\n")
        with pytest.raises(LibsvmFormatError):
            parse_libsvm(path)

    def test_rejects_empty_file(self, tmp_path):
        path = tmp_path / "e.txt"
        path.write_text("\n\n")
        with pytest.raises(LibsvmFormatError):
            parse_libsvm(path)

    @pytest.mark.parametrize("seed", range(3))
    def test_round_trip_exact(self, tmp_path, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((12, 7))
        X[rng.random((12, 7)) < 0.3] = 0.0
        X[:, -1] = 1.0  # keep the width recoverable
        data = Dataset(X=X, y=rng.standard_normal(12))
        path = tmp_path / "rt.txt"
        write_libsvm(data, path)
        back = parse_libsvm(path)
        assert np.array_equal(back.X, data.X)
        assert np.array_equal(back.y, data.y)

    def test_label_mapping_rejects_other_sets(self):
        data = Dataset(X=np.eye(2), y=np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            map_logistic_labels(data)


class TestSynthRidge:
    def test_singular_values_follow_the_law(self):
        data = synth_ridge(300, 40, 0)
        sv = np.linalg.svd(data.X, compute_uv=False)
        expected = 0.99 ** (np.arange(1, 41) / 2.0)
        assert np.max(np.abs(np.sort(sv)[::-1] - expected)) <= 1e-8

    def test_deterministic(self):
        a = synth_ridge(50, 10, 5)
        b = synth_ridge(50, 10, 5)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_single_column(self):
        data = synth_ridge(4, 1, 1)
        assert data.X.shape == (4, 1)
        assert np.linalg.norm(data.X) == pytest.approx(np.sqrt(0.99), rel=1e-10)

    def test_rejects_wide(self):
        with pytest.raises(ValueError):
            synth_ridge(5, 10, 0)


class TestSynthLogistic:
    def test_labels_binary(self):
        data = synth_logistic(200, 20, 2)
        assert set(np.unique(data.y)) <= {0.0, 1.0}

    def test_label_marginal_near_half(self):
        # margin noise dwarfs the signal, so labels are nearly fair coin flips
        data = synth_logistic(10_000, 20, 3)
        assert abs(data.y.mean() - 0.5) <= 0.05

    def test_deterministic(self):
        a = synth_logistic(60, 8, 9)
        b = synth_logistic(60, 8, 9)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
