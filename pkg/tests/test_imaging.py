import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wct.imaging import (
    BlockSpec,
    GrayImage,
    ImagingError,
    PgmHeaderError,
    PgmMaxvalError,
    PgmTruncatedError,
    centered_crop,
    extract_blocks,
    load_pgm,
    quantize,
    read_pgm_file,
    write_pgm,
    write_pgm_ascii,
    write_pgm_file,
)


def test_p2_example():
    img = load_pgm(b"P2\n2 2\n255\n0 128 255 64\n")
    assert img.pixels.tolist() == [[0, 128], [255, 64]]


def test_p5_matches_p2():
    p2 = load_pgm(b"P2\n2 2\n255\n0 128 255 64\n")
    p5 = load_pgm(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    assert p2 == p5


def test_header_comments_are_skipped():
    img = load_pgm(b"P2\n# a comment\n2 1 # trailing\n255\n3 4\n")
    assert img.pixels.tolist() == [[3, 4]]


def test_truncated_payload_names_offset():
    data = b"P2\n3 3\n255\n" + b" ".join(b"1" for _ in range(8)) + b"\n"
    with pytest.raises(PgmTruncatedError) as exc:
        load_pgm(data)
    assert exc.value.offset == len(data)
    assert "offset" in str(exc.value)


def test_truncated_binary_payload():
    with pytest.raises(PgmTruncatedError):
        load_pgm(b"P5\n3 3\n255\n" + bytes(8))


def test_maxval_too_large():
    with pytest.raises(PgmMaxvalError) as exc:
        load_pgm(b"P2\n1 1\n65535\n0\n")
    assert exc.value.offset == 7


@pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\0", b"P2\nx 1\n255\n0\n", b"P2\n0 1\n255\n"])
def test_malformed_header(data):
    with pytest.raises(PgmHeaderError):
        load_pgm(data)


def test_error_kinds_are_distinct():
    kinds = {PgmHeaderError, PgmTruncatedError, PgmMaxvalError}
    assert len(kinds) == 3 and not any(issubclass(a, b) for a in kinds for b in kinds if a is not b)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_pgm_round_trip(px):
    img = GrayImage(px)
    assert load_pgm(write_pgm(img)) == img
    assert load_pgm(write_pgm_ascii(img)) == img


def test_pgm_file_round_trip(tmp_path):
    img = GrayImage(np.arange(12, dtype=np.uint8).reshape(3, 4))
    write_pgm_file(tmp_path / "a.pgm", img)
    assert read_pgm_file(tmp_path / "a.pgm") == img


def test_gray_image_validation():
    with pytest.raises(ImagingError):
        GrayImage(np.array([[256]]))
    with pytest.raises(ImagingError):
        GrayImage(np.array([[1.5]]))
    with pytest.raises(ImagingError):
        GrayImage(np.zeros((0, 3)))
    assert GrayImage(np.array([[3.0]])).pixels.dtype == np.uint8


def test_quantize_examples():
    img = GrayImage(np.array([[255, 0]], dtype=np.uint8))
    assert quantize(img, 8).values.tolist() == [[7, 0]]
    assert quantize(img, 2).values.tolist() == [[1, 0]]
    px = np.arange(256, dtype=np.uint8).reshape(16, 16)
    assert np.array_equal(quantize(GrayImage(px), 256).values, px)
    with pytest.raises(ImagingError):
        quantize(img, 1)
    with pytest.raises(ImagingError):
        quantize(img, 257)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, (6, 6)), st.integers(2, 256))
def test_quantize_matches_formula(px, g):
    q = quantize(GrayImage(px), g).values
    assert np.array_equal(q, px.astype(int) * g // 256)
    assert q.min() >= 0 and q.max() < g


def test_extract_blocks_examples():
    img4 = GrayImage(np.arange(16, dtype=np.uint8).reshape(4, 4))
    assert len(extract_blocks(img4, BlockSpec(2, 2))) == 4
    blocks = extract_blocks(GrayImage(np.arange(64, dtype=np.uint8).reshape(8, 8)), BlockSpec(4, 4))
    assert len(blocks) == 4
    assert np.array_equal(np.block([[blocks[0].pixels, blocks[1].pixels], [blocks[2].pixels, blocks[3].pixels]]),
                          np.arange(64).reshape(8, 8))
    img5 = GrayImage(np.arange(25, dtype=np.uint8).reshape(5, 5))
    blocks5 = extract_blocks(img5, BlockSpec(2, 2))
    assert len(blocks5) == 4  # last pixel row and column dropped
    assert blocks5[3].pixels.tolist() == [[12, 13], [17, 18]]
    assert not np.shares_memory(blocks5[0].pixels, img5.pixels)
    with pytest.raises(ImagingError):
        extract_blocks(img4, BlockSpec(8, 8))


def test_grid_shape_formula():
    assert BlockSpec(2, 2).grid_shape(4, 4) == (2, 2)
    assert BlockSpec(2, 2).grid_shape(5, 5) == (2, 2)
    assert BlockSpec(32, 16).grid_shape(128, 96) == (7, 5)


def test_centered_crop():
    img = GrayImage(np.arange(100, dtype=np.uint8).reshape(10, 10))
    crop = centered_crop(img, BlockSpec(4, 4))
    assert crop.pixels.shape == (8, 8)
    assert np.array_equal(crop.pixels, img.pixels[1:9, 1:9])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 255), st.integers(0, 255), st.integers(2, 256))
def test_quantize_order_preserving(a, b, g):
    lo, hi = sorted((a, b))
    q = quantize(GrayImage(np.array([[lo, hi]], dtype=np.uint8)), g).values
    assert q[0, 0] <= q[0, 1]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 8), st.integers(1, 8))
def test_block_count_formula(h, w, b, s):
    img = GrayImage(np.zeros((h, w), dtype=np.uint8))
    if b > min(h, w):
        with pytest.raises(ImagingError):
            extract_blocks(img, BlockSpec(b, s))
        return
    assert len(extract_blocks(img, BlockSpec(b, s))) == ((h - b) // s + 1) * ((w - b) // s + 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_tiling_reconstructs_image(rows, cols, b, seed):
    px = np.random.default_rng(seed).integers(0, 256, size=(rows * b, cols * b)).astype(np.uint8)
    blocks = extract_blocks(GrayImage(px), BlockSpec(b, b))
    grid = [[blocks[r * cols + c].pixels for c in range(cols)] for r in range(rows)]
    assert np.array_equal(np.block(grid), px)
