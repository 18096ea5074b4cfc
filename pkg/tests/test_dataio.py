import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qbias import dataio
from qbias.errors import DataError, DomainError, FormatError, LengthError


class TestIdx:
    def test_label_bytes(self):
        shape, data = dataio.parse_idx(bytes.fromhex("00000801" "00000002" "0702"))
        assert shape == (2,)
        assert data.tolist() == [7, 2]

    def test_image_bytes(self):
        raw = bytes.fromhex("00000803" "00000001" "00000002" "00000002" "00ff00ff")
        shape, data = dataio.parse_idx(raw)
        assert shape == (1, 2, 2)
        assert data.tolist() == [[[0, 255], [0, 255]]]

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            dataio.parse_idx(bytes.fromhex("00000899" "00000001" "00"))

    def test_nonzero_lead_bytes(self):
        with pytest.raises(FormatError):
            dataio.parse_idx(bytes.fromhex("01000801" "00000001" "00"))

    def test_truncated_payload(self):
        with pytest.raises(LengthError):
            dataio.parse_idx(bytes.fromhex("00000801" "00000003" "0702"))

    def test_truncated_header(self):
        with pytest.raises(LengthError):
            dataio.parse_idx(bytes.fromhex("00000803" "00000001"))
        with pytest.raises(LengthError):
            dataio.parse_idx(b"\x00\x00")

    def test_trailing_bytes(self):
        with pytest.raises(LengthError):
            dataio.parse_idx(bytes.fromhex("00000801" "00000001" "0702"))

    def test_errors_are_data_errors(self):
        assert issubclass(FormatError, DataError) and issubclass(LengthError, DataError)

    def test_file_and_gzip(self, tmp_path):
        a = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
        dataio.write_idx(tmp_path / "x.idx", a)
        (tmp_path / "y.idx.gz").write_bytes(gzip.compress(dataio.to_idx(a)))
        for name in ("x.idx", "y.idx.gz"):
            shape, back = dataio.load_idx(tmp_path / name)
            assert shape == (2, 3, 4)
            assert np.array_equal(back, a)

    def test_to_idx_rejects_non_bytes(self):
        with pytest.raises(DataError):
            dataio.to_idx(np.array([1.5]))
        with pytest.raises(DataError):
            dataio.to_idx(np.array([256]))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=1, max_dims=4, max_side=5)))
def test_idx_round_trip(a):
    shape, back = dataio.parse_idx(dataio.to_idx(a))
    assert shape == a.shape
    assert np.array_equal(back, a)


def fake_mnist(tmp_path, per_digit=6, seed=0):
    rng = np.random.default_rng(seed)
    tmp_path.mkdir(parents=True, exist_ok=True)
    for split, count in (("train", per_digit), ("t10k", per_digit)):
        labels = np.repeat(np.arange(10, dtype=np.uint8), count)
        images = rng.integers(0, 256, size=(labels.size, 28, 28), dtype=np.uint8)
        images[:, 0, 0] = labels  # tag each image with its label
        dataio.write_idx(tmp_path / f"{split}-labels-idx1-ubyte", labels)
        dataio.write_idx(tmp_path / f"{split}-images-idx3-ubyte", images)
    return tmp_path


class TestMnist:
    def test_load(self, tmp_path):
        data = dataio.load_mnist(fake_mnist(tmp_path))
        assert data["train_images"].shape == (60, 28, 28)
        assert np.array_equal(data["train_images"][:, 0, 0], data["train_labels"])

    def test_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv(dataio.DATA_DIR_ENV, str(fake_mnist(tmp_path)))
        assert dataio.mnist_available()
        assert dataio.load_mnist()["test_labels"].shape == (60,)

    def test_missing(self, tmp_path, monkeypatch):
        monkeypatch.delenv(dataio.DATA_DIR_ENV, raising=False)
        assert not dataio.mnist_available(tmp_path)
        with pytest.raises(DataError):
            dataio.load_mnist(tmp_path)
        with pytest.raises(DataError):
            dataio.load_mnist()

    def test_split(self, tmp_path):
        train, test = dataio.mnist_split(fake_mnist(tmp_path), 3, 8, n_train=4, n_test=2, seed=1)
        assert len(train) == 8 and len(test) == 4
        assert train.num_features == 16
        assert "3(+1) vs 8(-1)" in train.provenance


class TestPooling:
    def test_constant_image(self):
        np.testing.assert_array_equal(dataio.avg_pool(np.full((28, 28), 255), 7), np.ones(16))

    def test_small_tile(self):
        np.testing.assert_array_equal(dataio.avg_pool([[0, 255], [0, 255]], 2), [0.5])

    def test_zero_image(self):
        np.testing.assert_array_equal(dataio.avg_pool(np.zeros((28, 28)), 4), np.zeros(49))

    def test_row_major_tiles(self):
        img = np.zeros((28, 28))
        img[:14, 14:] = 255  # top-right quadrant
        np.testing.assert_array_equal(dataio.avg_pool(img, 14), [0, 1, 0, 0])

    def test_non_divisor(self):
        with pytest.raises(DomainError):
            dataio.avg_pool(np.zeros((28, 28)), 5)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.uint8, (28, 28)), st.sampled_from([1, 2, 4, 7, 14]))
def test_pooling_stays_in_unit_interval(image, block):
    f = dataio.avg_pool(image, block)
    assert f.shape == ((28 // block) ** 2,)
    assert np.all((f >= 0) & (f <= 1))


class TestBinarySubset:
    def setup_method(self):
        self.labels = np.repeat(np.arange(3), 5)
        self.images = np.stack([np.full((28, 28), 10 * i) for i in range(15)]).astype(np.uint8)

    def test_smallest(self):
        d = dataio.make_binary_subset(self.images, self.labels, 0, 2, 1, seed=0)
        assert sorted(d.labels.tolist()) == [-1, 1]

    def test_balanced_and_correct(self):
        d = dataio.make_binary_subset(self.images, self.labels, 2, 1, 4, seed=3)
        assert (d.labels == 1).sum() == (d.labels == -1).sum() == 4
        source = np.round(d.features[:, 0] * 255 / 10).astype(int)
        assert np.all(self.labels[source][d.labels == 1] == 2)
        assert np.all(self.labels[source][d.labels == -1] == 1)

    def test_absent_class(self):
        with pytest.raises(DataError):
            dataio.make_binary_subset(self.images, self.labels, 7, 1, 1, seed=0)

    def test_insufficient(self):
        with pytest.raises(DataError):
            dataio.make_binary_subset(self.images, self.labels, 0, 1, 6, seed=0)

    def test_deterministic(self):
        a = dataio.make_binary_subset(self.images, self.labels, 0, 1, 3, seed=9)
        b = dataio.make_binary_subset(self.images, self.labels, 0, 1, 3, seed=9)
        assert np.array_equal(a.features, b.features)


class TestSynthetic:
    def test_gaussian_means(self):
        d = dataio.synthetic_gaussians(2000, 3, 0.0, seed=1)
        np.testing.assert_allclose(d.features[d.labels == 1].mean(0), 0.5, atol=0.01)
        np.testing.assert_allclose(d.features[d.labels == -1].mean(0), 0.5, atol=0.01)

    def test_gaussian_full_separation_clamps(self):
        d = dataio.synthetic_gaussians(500, 2, 2.0, seed=1)
        assert d.features.max() == 1.0 and d.features.min() == 0.0
        assert d.features[d.labels == 1].mean() > 0.9
        assert d.features[d.labels == -1].mean() < 0.1

    def test_gaussian_deterministic(self):
        a = dataio.synthetic_gaussians(10, 4, 1.0, seed=5)
        b = dataio.synthetic_gaussians(10, 4, 1.0, seed=5)
        assert np.array_equal(a.features, b.features) and a.provenance == b.provenance

    def test_digits_shape_and_labels(self):
        d = dataio.synthetic_digits(5, seed=0)
        assert d.features.shape == (10, 16)
        assert d.labels.tolist() == [1] * 5 + [-1] * 5

    def test_digit_strokes_are_faint_after_pooling(self):
        d = dataio.synthetic_digits(100, seed=0)
        assert np.mean(d.features >= 0.5) < 0.1
        # zeros carry more ink than ones
        assert d.features[d.labels == 1].sum(1).mean() > d.features[d.labels == -1].sum(1).mean()

    def test_digit_split_deterministic(self):
        a = dataio.synthetic_digit_split(3, 2, seed=4)
        b = dataio.synthetic_digit_split(3, 2, seed=4)
        for x, y in zip(a, b):
            assert np.array_equal(x.features, y.features)
        assert not np.array_equal(a[0].features[:2], a[1].features[:2])

    def test_render_rejects_other_digits(self):
        with pytest.raises(DomainError):
            dataio.render_glyph(2, np.random.default_rng(0))


class TestDataset:
    def test_range(self):
        with pytest.raises(DataError):
            dataio.Dataset([[1.5]], [1])

    def test_labels(self):
        with pytest.raises(DataError):
            dataio.Dataset([[0.5]], [0])

    def test_lengths(self):
        with pytest.raises(DataError):
            dataio.Dataset([[0.5], [0.2]], [1])
