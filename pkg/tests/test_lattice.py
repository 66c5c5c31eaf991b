import numpy as np
import pytest

from dgff.lattice import (AnnulusRegion, DiscRegion, LatticeDomain, MaskRegion,
                          NEIGHBOR_STEPS, SquareRegion, discretize, load_mask,
                          make_box, make_centered_box, make_disc, parse_domain)

# frozen vertex counts for the unit-disc domain
DISC_COUNTS = {16: 673, 64: 12345, 128: 50413}


def test_box_basic():
    dom = make_box(8)
    assert len(dom) == 49
    assert dom.scale == 8
    assert dom.vertices.min() == 1 and dom.vertices.max() == 7


def test_box_validation():
    with pytest.raises(ValueError):
        make_box(1)
    with pytest.raises(ValueError):
        make_box(2.5)


def test_centered_box():
    dom = make_centered_box(3)
    assert len(dom) == 49
    assert dom.index((0, 0)) >= 0
    assert dom.scale == 8
    with pytest.raises(ValueError):
        make_centered_box(-1)


def test_domain_validation():
    with pytest.raises(ValueError):
        LatticeDomain(np.zeros((0, 2)), scale=4)
    with pytest.raises(ValueError):
        LatticeDomain([[1, 2, 3]], scale=4)
    # duplicates are removed
    dom = LatticeDomain([(0, 0), (0, 1), (0, 0)], scale=2)
    assert len(dom) == 2


@pytest.mark.parametrize("dom", [make_box(5), make_centered_box(4), make_disc(12)])
def test_index_bijection(dom):
    idx = dom.index_of(dom.vertices)
    assert np.array_equal(idx, np.arange(len(dom)))
    for k in (0, len(dom) // 2, len(dom) - 1):
        assert dom.index(dom.vertices[k]) == k


def test_index_outside():
    dom = make_box(4)
    with pytest.raises(KeyError):
        dom.index((0, 0))
    assert dom.index_of([(0, 0), (1, 1), (99, 99)]).tolist() == [-1, 0, -1]
    assert dom.contains([(1, 1), (0, 0)]).tolist() == [True, False]


def test_boundary_box3():
    dom = make_box(3)
    bd = dom.boundary()
    assert len(bd) == 8
    assert np.all(dom.index_of(bd) < 0)
    # every boundary vertex has a lattice neighbour inside
    close = np.zeros(len(bd), dtype=bool)
    for step in NEIGHBOR_STEPS:
        close |= dom.index_of(bd + step) >= 0
    assert close.all()


def test_contact_counts():
    dom = make_box(3)
    counts = dom.boundary_contact_counts()
    assert counts.sum() == 8
    dom = make_box(8)
    assert dom.boundary_contact_counts().sum() == 4 * 7
    center = dom.index((4, 4))
    assert dom.boundary_contact_counts()[center] == 0


def test_neighbor_indices():
    dom = make_box(4)
    nbr = dom.neighbor_indices()
    assert len(nbr) == len(NEIGHBOR_STEPS)
    for step, ni in zip(NEIGHBOR_STEPS, nbr):
        assert np.array_equal(ni, dom.index_of(dom.vertices + step))


def test_interior_shrink():
    dom = make_box(16)
    assert len(dom.interior_shrink(0.0)) == len(dom)
    assert len(dom.interior_shrink(1 / 8)) == 121
    with pytest.raises(ValueError):
        dom.interior_shrink(0.5)


def test_to_mask():
    dom = make_box(5)
    mask = dom.to_mask()
    assert mask.sum() == len(dom)
    # mask covers the bounding box plus a one-cell margin
    assert mask.shape == (6, 6)
    assert not mask[0].any() and not mask[-1].any()


@pytest.mark.parametrize("N", [2, 3, 8, 16])
def test_square_discretize_matches_box(N):
    dom = discretize(SquareRegion(), N)
    assert np.array_equal(dom.vertices, make_box(N).vertices)


@pytest.mark.parametrize("N,count", sorted(DISC_COUNTS.items()))
def test_disc_counts(N, count):
    assert len(make_disc(N)) == count


def test_disc_geometry():
    dom = make_disc(64)
    area_ratio = len(dom) / (np.pi * 63 ** 2)
    assert abs(area_ratio - 1.0) < 0.03
    radii = np.sqrt((dom.vertices ** 2).sum(axis=1)) / 64.0
    assert radii.max() < 1.0 - 1.0 / 64


def test_annulus():
    with pytest.raises(ValueError):
        AnnulusRegion(1.5)
    dom = discretize(AnnulusRegion(0.5), 32)
    radii = np.sqrt((dom.vertices ** 2).sum(axis=1)) / 32.0
    assert len(dom) > 0
    assert radii.min() > 0.5 and radii.max() < 1.0
    assert dom.index_of([(0, 0)])[0] < 0


def test_mask_region_validation():
    with pytest.raises(ValueError):
        MaskRegion(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        MaskRegion(np.ones(4))


def test_load_mask(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("1111\n1111\n1111\n1111\n")
    region = load_mask(p)
    assert region.mask.shape == (4, 4)
    dom = discretize(region, 8)
    assert len(dom) > 0
    p.write_text("11\n1x\n")
    with pytest.raises(ValueError):
        load_mask(p)
    p.write_text("11\n1\n")
    with pytest.raises(ValueError):
        load_mask(p)


def test_discretize_validation():
    with pytest.raises(ValueError):
        discretize(SquareRegion(), 1)
    # far-offset tiny region produces nothing at coarse scale
    with pytest.raises(ValueError):
        discretize(AnnulusRegion(0.99), 4)


def test_parse_domain(tmp_path):
    assert np.array_equal(parse_domain("box:8").vertices, make_box(8).vertices)
    assert len(parse_domain("disc:16")) == DISC_COUNTS[16]
    p = tmp_path / "m.txt"
    p.write_text("111\n111\n111\n")
    dom = parse_domain(f"mask:{p}:12")
    assert dom.scale == 12
    with pytest.raises(ValueError):
        parse_domain("torus:8")
    with pytest.raises(ValueError):
        parse_domain("box:two")
