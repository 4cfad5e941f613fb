import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_resize
from signcore.data import (
    Dataset,
    DatasetError,
    LabeledSample,
    RasterError,
    TestSplit as HeldOutSplit,
    TrainSplit,
    decode_raster,
    encode_raster,
    load_dataset,
    read_image,
    resize_bilinear,
    split_train_test,
    synth_generate,
    to_channels,
    write_dataset,
)


# ---- rasters

def test_decode_ascii_gray():
    assert decode_raster(b"P2 2 2 255\n0 255 255 0\n")[..., 0].tolist() == [[0, 255], [255, 0]]


def test_decode_binary_single_byte():
    assert decode_raster(b"P5\n1 1\n255\n\x80")[..., 0].tolist() == [[128]]


def test_decode_comments_and_rgb():
    data = b"P3\n# made by hand\n2 1 # width height\n255\n255 0 0  0 0 255\n"
    px = decode_raster(data)
    assert px.shape == (1, 2, 3)
    assert px[0, 0].tolist() == [255, 0, 0] and px[0, 1].tolist() == [0, 0, 255]
    assert decode_raster(b"P6 1 1 255\n\x01\x02\x03").tolist() == [[[1, 2, 3]]]


@pytest.mark.parametrize(
    "data,match",
    [
        (b"P9 1 1 255\n0", "unsupported format"),
        (b"P2 2 2 255\n0 1 2", "pixel count"),
        (b"P5 2 1 255\n\x00", "pixel count"),
        (b"P2 1 1 65535\n0", "maxval"),
        (b"P2 x 1 255\n0", "malformed"),
        (b"P2 1 1 10\n11", "outside"),
        (b"P2 2", "malformed"),
    ],
)
def test_decode_errors(data, match):
    with pytest.raises(RasterError, match=match):
        decode_raster(data)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.sampled_from([1, 3]), st.booleans(), st.integers(0, 10_000))
def test_raster_roundtrip(h, w, c, binary, seed):
    px = np.random.default_rng(seed).integers(0, 256, size=(h, w, c))
    assert np.array_equal(decode_raster(encode_raster(px, binary)), px)


def test_read_image_normalises(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P2 3 1 255\n0 51 255\n")
    assert read_image(p)[0, :, 0].tolist() == [0.0, 0.2, 1.0]


# ---- resize and channels

def test_resize_identity_and_examples(rng):
    img = rng.random((5, 7, 2))
    assert np.array_equal(resize_bilinear(img, (5, 7)), img)
    two = np.array([[0.0, 0.0], [1.0, 1.0]])[..., None]
    assert resize_bilinear(two, (1, 1)).ravel().tolist() == [0.5]
    const = resize_bilinear(np.array([[[0.3]]]), (4, 4))
    assert const.shape == (4, 4, 1) and np.all(const == 0.3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 12), st.integers(1, 12), st.integers(0, 1000))
def test_resize_matches_oracle_and_range(h, w, th, tw, seed):
    img = np.random.default_rng(seed).random((h, w, 1))
    out = resize_bilinear(img, (th, tw))
    assert out.shape == (th, tw, 1)
    assert np.allclose(out, naive_resize(img, th, tw), atol=1e-12)
    assert out.min() >= img.min() - 1e-12 and out.max() <= img.max() + 1e-12


def test_resize_corners_aligned(rng):
    img = rng.random((6, 9, 1))
    out = resize_bilinear(img, (11, 4))
    for (i, j), (y, x) in {(0, 0): (0, 0), (10, 3): (5, 8), (0, 3): (0, 8), (10, 0): (5, 0)}.items():
        assert out[i, j, 0] == pytest.approx(img[y, x, 0], abs=1e-12)


def test_to_channels():
    rgb = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
    assert to_channels(rgb, 1)[0, :, 0].tolist() == pytest.approx([0.299, 0.587])
    gray = np.array([[[0.4]]])
    assert to_channels(gray, 3).tolist() == [[[0.4, 0.4, 0.4]]]


# ---- dataset loading

def _write(path, px):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_raster(px))


def test_load_dataset_lexicographic(tmp_path, rng):
    for name in ("baa", "alef"):
        for i in range(3):
            _write(tmp_path / name / f"{i}.pgm", rng.integers(0, 256, (4, 4, 1)))
    ds = load_dataset(tmp_path)
    assert len(ds) == 6
    assert ds.class_names == ["alef", "baa"]
    assert [s.class_index for s in ds] == [0, 0, 0, 1, 1, 1]
    assert all(s.source.startswith("alef/") for s in ds.samples[:3])
    images, _ = ds.arrays()
    assert images.min() >= 0.0 and images.max() <= 1.0


def test_load_dataset_resizes(tmp_path, rng):
    _write(tmp_path / "x" / "big.pgm", rng.integers(0, 256, (64, 64, 1)))
    ds = load_dataset(tmp_path, target_size=(28, 28))
    assert ds.image_shape == (28, 28, 1)
    ds3 = load_dataset(tmp_path, target_size=(28, 28), channels=3)
    assert ds3.image_shape == (28, 28, 3)


def test_load_dataset_pixel_scaling(tmp_path):
    _write(tmp_path / "x" / "a.pgm", np.array([[0, 255]]))
    ds = load_dataset(tmp_path)
    assert ds.samples[0].image[0, :, 0].tolist() == [0.0, 1.0]


def test_load_dataset_errors(tmp_path):
    with pytest.raises(DatasetError, match="no classes found"):
        load_dataset(tmp_path)
    with pytest.raises(DatasetError, match="not found"):
        load_dataset(tmp_path / "missing")
    (tmp_path / "a").mkdir()
    with pytest.raises(DatasetError, match="no images"):
        load_dataset(tmp_path)


def test_load_dataset_skips_bad_files(tmp_path, rng):
    _write(tmp_path / "a" / "good.pgm", rng.integers(0, 256, (3, 3, 1)))
    (tmp_path / "a" / "junk.pgm").write_bytes(b"not an image")
    ds = load_dataset(tmp_path)
    assert len(ds) == 1 and len(ds.skipped) == 1
    with pytest.raises(DatasetError, match="junk"):
        load_dataset(tmp_path, strict=True)


def test_dataset_invariants():
    img = np.zeros((2, 2, 1))
    with pytest.raises(DatasetError):
        Dataset([LabeledSample(img, 0)], ["b", "a"])
    with pytest.raises(DatasetError):
        Dataset([LabeledSample(img, 2)], ["a", "b"])
    with pytest.raises(DatasetError):
        Dataset([LabeledSample(img, 0), LabeledSample(np.zeros((3, 2, 1)), 0)], ["a"])


def test_write_then_load_roundtrip(tmp_path):
    ds = synth_generate(3, 4, 10, seed=2)
    write_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.class_names == ds.class_names
    a, la = ds.arrays()
    b, lb = back.arrays()
    assert np.array_equal(np.sort(la), np.sort(lb))
    assert np.max(np.abs(np.sort(a.ravel()) - np.sort(b.ravel()))) <= 0.5 / 255 + 1e-12


# ---- splitting

def _labelled(counts):
    samples = [LabeledSample(np.full((1, 1, 1), i / 100), c) for c, n in enumerate(counts) for i in range(n)]
    return Dataset(samples, [f"k{c}" for c in range(len(counts))])


def test_split_examples():
    train, test = split_train_test(_labelled([10]), 0.8, seed=0)
    assert (len(train), len(test)) == (8, 2)
    train, test = split_train_test(_labelled([5, 5]), 0.8, seed=0)
    assert train.class_counts() == [4, 4] and test.class_counts() == [1, 1]
    assert isinstance(train, TrainSplit) and isinstance(test, HeldOutSplit)
    with pytest.raises(ValueError):
        split_train_test(_labelled([10]), 1.0, seed=0)
    with pytest.raises(ValueError):
        split_train_test(_labelled([10, 1]), 0.5, seed=0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(2, 15), min_size=1, max_size=5), st.floats(0.05, 0.95), st.integers(0, 2**32))
def test_split_is_stratified_partition(counts, fraction, seed):
    ds = _labelled(counts)
    train, test = split_train_test(ds, fraction, seed)
    ids = lambda part: [id(s) for s in part.samples]
    assert not set(ids(train)) & set(ids(test))
    assert sorted(ids(train) + ids(test)) == sorted(ids(ds))
    for c, n in enumerate(counts):
        want = min(max(int(np.floor(fraction * n + 1e-9)), 1), n - 1)
        assert train.class_counts()[c] == want
    again, _ = split_train_test(ds, fraction, seed)
    assert ids(again) == ids(train)


# ---- synthetic generator

def test_synth_counts_and_determinism():
    ds = synth_generate(10, 20, (28, 28), seed=1)
    assert len(ds) == 200
    assert ds.class_names == [f"c{i:02d}" for i in range(10)]
    again = synth_generate(10, 20, (28, 28), seed=1)
    assert all(np.array_equal(a.image, b.image) for a, b in zip(ds, again))
    images, _ = ds.arrays()
    assert images.min() >= 0.0 and images.max() <= 1.0


def test_synth_class_means_separated():
    ds = synth_generate(36, 20, 28, seed=4)
    images, labels = ds.arrays()
    means = np.stack([images[labels == c].mean(axis=0) for c in range(36)])
    dists = [np.linalg.norm(means[a] - means[b]) for a in range(36) for b in range(a + 1, 36)]
    assert min(dists) > 1.0


def test_synth_bounds():
    with pytest.raises(ValueError):
        synth_generate(1, 5, 28, 0)
    with pytest.raises(ValueError):
        synth_generate(37, 5, 28, 0)
    with pytest.raises(ValueError):
        synth_generate(2, 1, 28, 0)
