from fractions import Fraction
import json

import numpy as np
import pytest

from eigensr.dictionary import build_dictionary, load_dictionary, save_dictionary
from eigensr.errors import FormatError
from eigensr.imgcore import BICUBIC, Image, compute_layout, collocated_layout, extract_patches, resample


@pytest.fixture(scope="module")
def three_random():
    rng = np.random.default_rng(2024)
    return [Image(rng.random((16, 16))) for _ in range(3)]


@pytest.fixture(scope="module")
def small_dict(three_random):
    return build_dictionary(three_random, Fraction(1, 2), Fraction(1, 4))


def test_shapes_and_collocation(small_dict):
    d = small_dict
    assert d.lr_side == 7 and d.hr_side == 16
    assert d.hr_layout.grid == d.lr_layout.grid
    assert d.n_train == 3
    assert d.lr_stacks.shape == (d.n_positions, d.lr_layout.patch_side ** 2, 3)
    assert d.hr_stacks.shape == (d.n_positions, d.hr_layout.patch_side ** 2, 3)


def test_means_match_naive_summation(small_dict):
    d = small_dict
    for i in range(d.n_positions):
        for stacks, means in ((d.lr_stacks, d.lr_means), (d.hr_stacks, d.hr_means)):
            naive = np.zeros(stacks.shape[1])
            for j in range(d.n_train):
                for k in range(stacks.shape[1]):
                    naive[k] += stacks[i, k, j]
            assert np.max(np.abs(means[i] - naive / d.n_train)) < 1e-12


def test_stacks_hold_degraded_patches(three_random, small_dict):
    d = small_dict
    lr1 = resample(three_random[1], d.lr_side, d.lr_side, BICUBIC)
    np.testing.assert_array_equal(d.lr_stacks[:, :, 1], extract_patches(lr1, d.lr_layout))
    np.testing.assert_array_equal(d.hr_stacks[:, :, 1], extract_patches(three_random[1], d.hr_layout))


def test_build_is_deterministic(three_random, small_dict):
    again = build_dictionary(three_random, Fraction(1, 2), Fraction(1, 4))
    assert again == small_dict


def test_round_trip_is_bitwise(tmp_path, small_dict):
    path = tmp_path / "d.epsr"
    save_dictionary(small_dict, path)
    loaded = load_dictionary(path)
    assert loaded == small_dict
    for i in range(small_dict.n_positions):
        a, b = small_dict.eigen[i], loaded.eigen[i]
        assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
        assert a.eigen_patches.tobytes() == b.eigen_patches.tobytes()
    manifest = json.loads(path.with_suffix(".json").read_text())
    assert manifest["format"] == "EPSR" and manifest["lr_side"] == 7


def test_round_trip_with_empty_models(tmp_path):
    img = Image(np.full((16, 16), 0.3))
    d = build_dictionary([img, img], Fraction(1, 2), Fraction(1, 4))
    save_dictionary(d, tmp_path / "z.epsr")
    assert load_dictionary(tmp_path / "z.epsr") == d


def test_saving_is_byte_stable(tmp_path, small_dict):
    save_dictionary(small_dict, tmp_path / "a.epsr")
    save_dictionary(small_dict, tmp_path / "b.epsr")
    assert (tmp_path / "a.epsr").read_bytes() == (tmp_path / "b.epsr").read_bytes()


def test_wrong_magic(tmp_path, small_dict):
    path = tmp_path / "d.epsr"
    save_dictionary(small_dict, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_dictionary(path)


def test_wrong_version(tmp_path, small_dict):
    path = tmp_path / "d.epsr"
    save_dictionary(small_dict, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_dictionary(path)


def test_empty_and_truncated_files(tmp_path, small_dict):
    empty = tmp_path / "empty.epsr"
    empty.write_bytes(b"")
    with pytest.raises(OSError):
        load_dictionary(empty)
    path = tmp_path / "d.epsr"
    save_dictionary(small_dict, path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(OSError):
        load_dictionary(path)
    with pytest.raises(OSError):
        load_dictionary(tmp_path / "missing.epsr")


def test_trailing_bytes_rejected(tmp_path, small_dict):
    path = tmp_path / "d.epsr"
    save_dictionary(small_dict, path)
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(FormatError):
        load_dictionary(path)


def test_identical_constant_images_have_no_components():
    img = Image(np.full((16, 16), 0.7))
    d = build_dictionary([img, img], Fraction(1, 2), Fraction(1, 4))
    assert all(m.retained_count == 0 for m in d.eigen)


def test_argument_errors(three_random):
    with pytest.raises(ValueError):
        build_dictionary(three_random[:1], Fraction(1, 2), Fraction(1, 4))
    with pytest.raises(ValueError):
        build_dictionary(three_random + [Image(np.zeros((18, 18)))], Fraction(1, 2), Fraction(1, 4))
    with pytest.raises(ValueError):
        build_dictionary([Image(np.zeros((16, 12)))] * 2, Fraction(1, 2), Fraction(1, 4))


def test_large_scale_grid():
    hr = compute_layout(231, Fraction(1, 4), Fraction(1, 3))
    lr = collocated_layout(hr, 15)
    assert hr.patch_side == 58 and lr.patch_side == 4
    assert hr.grid == lr.grid == (6, 6)
