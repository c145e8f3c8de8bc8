import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from texloss.descriptors import DescriptorKind, descriptor
from texloss.glcm import BinGrid, Offset, glcm
from texloss.mste import DeltaH, OffsetError, OffsetGrid, TextureRepr, delta, extract


def test_default_grid():
    grid = OffsetGrid()
    assert grid.distances == (1, 3, 5, 7)
    assert grid.angles == (0, 45, 90, 135)
    assert grid.shape == (4, 4)
    cells = list(grid.offsets())
    assert cells[0] == (0, 0, Offset(1, 0)) and cells[5] == (1, 1, Offset(3, 45))


@pytest.mark.parametrize("d,a", [((), (0,)), ((1, 1), (0,)), ((1,), (0, 0)), ((0,), (0,))])
def test_grid_validation(d, a):
    with pytest.raises(ValueError):
        OffsetGrid(d, a)


def test_constant_image_contrast_is_zero():
    rep = extract(np.full((10, 10), 2.0), OffsetGrid(), BinGrid.integer(4), "contrast", "hard")
    assert np.array_equal(rep.values, np.zeros((4, 4)))


def test_single_cell_grid_is_one_descriptor(rng):
    x = rng.uniform(0, 3, (6, 6))
    bins = BinGrid.integer(4)
    rep = extract(x, OffsetGrid((3,), (45,)), bins, "homogeneity")
    assert rep.values[0, 0] == descriptor(glcm(x, Offset(3, 45), bins), "homogeneity")


def test_2x2_hard_example():
    x = np.array([[0.0, 0.0], [0.0, 1.0]])
    rep = extract(x, OffsetGrid((1,), (0, 90)), BinGrid.integer(2), "contrast", "hard")
    assert rep.values.tolist() == [[0.5, 0.5]]


def test_soft_matches_hard_on_bin_centers(rng):
    for _ in range(3):
        x = rng.integers(0, 8, (16, 16)).astype(float)
        for kind in ("contrast", "homogeneity", "asm", "correlation"):
            soft = extract(x, OffsetGrid(), BinGrid.integer(8, 0.05), kind, "soft")
            hard = extract(x, OffsetGrid(), BinGrid.integer(8, 0.05), kind, "hard")
            np.testing.assert_allclose(soft.values, hard.values, rtol=0, atol=1e-7)


def test_error_names_offending_offset():
    with pytest.raises(OffsetError) as info:
        extract(np.zeros((4, 4)), OffsetGrid((1, 7), (0,)), BinGrid.integer(2), "contrast")
    assert info.value.offset == Offset(7, 0)
    with pytest.raises(OffsetError) as info:
        extract(np.zeros((4, 4)), OffsetGrid((1,), (0,)), BinGrid.integer(2, 0.05), "correlation")
    assert info.value.offset == Offset(1, 0)


def test_periodic_texture_translation():
    tile = np.random.default_rng(5).integers(0, 4, (8, 8)).astype(float)
    x = np.tile(tile, (6, 6))
    shifted = np.roll(x, (3, 5), axis=(0, 1))
    bins = BinGrid.integer(4)
    a = extract(x, OffsetGrid(), bins, "contrast", "hard").values
    b = extract(shifted, OffsetGrid(), bins, "contrast", "hard").values
    h, w = x.shape
    bound = 2 * (2 * (h + w)) / (h * w) * max(np.abs(a).max(), np.abs(b).max())
    assert np.all(np.abs(a - b) <= bound)


def test_delta_examples():
    grid = OffsetGrid((1,), (0,))
    hx = TextureRepr([[2.0]], grid, DescriptorKind.CONTRAST)
    hy = TextureRepr([[5.0]], grid, DescriptorKind.CONTRAST)
    assert delta(hx, hy).values.tolist() == [[3.0]]
    assert delta(hx, hx).values.tolist() == [[0.0]]


@given(st.integers(0, 2 ** 31))
def test_delta_symmetry(seed):
    gen = np.random.default_rng(seed)
    grid = OffsetGrid()
    a = TextureRepr(gen.normal(size=(4, 4)), grid, "contrast")
    b = TextureRepr(gen.normal(size=(4, 4)), grid, "contrast")
    assert np.array_equal(delta(a, b).values, delta(b, a).values)
    assert np.all(delta(a, a).values == 0)


def test_delta_mismatch():
    grid = OffsetGrid()
    a = TextureRepr(np.zeros((4, 4)), grid, DescriptorKind.CONTRAST)
    with pytest.raises(ValueError):
        delta(a, TextureRepr(np.zeros((4, 4)), grid, DescriptorKind.ASM))
    with pytest.raises(ValueError):
        delta(a, TextureRepr(np.zeros((1, 1)), OffsetGrid((1,), (0,)), DescriptorKind.CONTRAST))


def test_repr_validation():
    with pytest.raises(ValueError):
        TextureRepr(np.zeros((2, 2)), OffsetGrid(), DescriptorKind.CONTRAST)
    with pytest.raises(ValueError):
        TextureRepr([[np.inf]], OffsetGrid((1,), (0,)), DescriptorKind.CONTRAST)
    with pytest.raises(ValueError):
        DeltaH([[-1.0]], OffsetGrid((1,), (0,)), DescriptorKind.CONTRAST)


def test_csv_has_grid_headers():
    rep = TextureRepr([[1.0, 2.0], [3.0, 4.5]], OffsetGrid((1, 3), (0, 90)), DescriptorKind.CONTRAST)
    assert rep.to_csv() == "D,1,3\nTHETA,0,90\n1.0,2.0\n3.0,4.5\n"
