import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crlmprog.radiomics import (
    DIRECTIONS_13,
    DiscretizationSpec,
    LesionMask,
    NoPairs,
    RadiomicFeatureSet,
    Volume,
    VolumeError,
    aggregate_lesions,
    as_grid,
    ccc_filter,
    concordance_correlation,
    discretize,
    eroded_mask,
    extract_lesion_features,
    firstorder_features,
    glcm_features,
    glcm_matrices,
    glrlm_features,
    glrlm_matrices,
    glszm_features,
    glszm_matrix,
    make_phantom,
    read_mask,
    read_volume,
    shape_features,
    write_mask,
    write_volume,
)
from oracles import naive_glcm, naive_runs, naive_zones, neighbours13


def line_volume(values):
    v = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    return Volume(v, (1.0, 1.0, 1.0)), LesionMask(np.ones(v.shape, dtype=int), "L")


# -- discretization ----------------------------------------------------------


def test_fixed_width_levels():
    vol, mask = line_volume([0, 10, 20, 30])
    g = discretize(vol, mask, DiscretizationSpec(bin_width=10))
    assert list(g.levels.ravel()) == [1, 2, 3, 4]


def test_constant_region_single_level():
    vol, mask = line_volume([7.0] * 5)
    assert set(discretize(vol, mask, DiscretizationSpec(bin_width=25)).levels.ravel()) == {1}
    g = discretize(vol, mask, DiscretizationSpec.fixed_count(8))
    assert g.constant and g.n_levels == 1


def test_fixed_count_quartiles():
    vol, mask = line_volume(range(100))
    g = discretize(vol, mask, DiscretizationSpec.fixed_count(4))
    assert g.n_levels == 4
    assert list(np.bincount(g.levels.ravel())[1:]) == [25, 25, 25, 25]


def test_outside_mask_is_zero():
    v = Volume(np.arange(8.0).reshape(2, 2, 2), (1, 1, 1))
    m = np.zeros((2, 2, 2), dtype=int)
    m[0, 0, 0] = m[1, 1, 1] = 1
    g = discretize(v, LesionMask(m, "a"), DiscretizationSpec(bin_width=1))
    assert g.levels[0, 0, 1] == 0 and g.levels[1, 1, 1] == 8


def test_spec_requires_exactly_one_mode():
    with pytest.raises(ValueError):
        DiscretizationSpec(bin_width=None, n_bins=None)
    with pytest.raises(ValueError):
        DiscretizationSpec(bin_width=5, n_bins=3)


# -- first order -------------------------------------------------------------


def test_firstorder_constant():
    vol, mask = line_volume([5.0] * 6)
    f = firstorder_features(vol, mask).values
    assert f["original_firstorder_Mean"] == 5.0
    assert f["original_firstorder_Variance"] == 0.0
    assert f["original_firstorder_Energy"] == 25.0 * 6
    assert f["original_firstorder_Entropy"] == 0.0


def test_firstorder_moments():
    vol, mask = line_volume([1, 2, 3, 4])
    f = firstorder_features(vol, mask).values
    assert f["original_firstorder_Mean"] == 2.5
    assert f["original_firstorder_Variance"] == 1.25
    assert f["original_firstorder_Range"] == 3.0


def test_firstorder_symmetric_skewness():
    vol, mask = line_volume([-7.0, 0.0, 7.0])
    assert firstorder_features(vol, mask).values["original_firstorder_Skewness"] == 0.0


def test_firstorder_kurtosis_matches_scipy():
    from scipy import stats

    x = np.random.default_rng(0).normal(size=50)
    vol, mask = line_volume(x)
    f = firstorder_features(vol, mask).values
    assert f["original_firstorder_Kurtosis"] == pytest.approx(stats.kurtosis(x, fisher=True))
    assert f["original_firstorder_Skewness"] == pytest.approx(stats.skew(x))


# -- shape -------------------------------------------------------------------


def test_shape_single_voxel():
    m = LesionMask(np.ones((1, 1, 1), dtype=int), "a")
    f = shape_features(m, (1, 1, 1)).values
    assert f["original_shape_VoxelVolume"] == 1.0
    assert f["original_shape_Maximum3DDiameter"] == 0.0
    assert f["original_shape_SurfaceArea"] == 6.0


def test_shape_voxel_pair():
    m = LesionMask(np.ones((1, 1, 2), dtype=int), "a")
    f = shape_features(m, (1, 1, 1)).values
    assert f["original_shape_Maximum3DDiameter"] == 1.0
    assert f["original_shape_VoxelVolume"] == 2.0
    assert f["original_shape_SurfaceArea"] == 10.0


def test_shape_cube_spacing():
    m = LesionMask(np.ones((2, 2, 2), dtype=int), "a")
    f = shape_features(m, (2, 2, 2)).values
    assert f["original_shape_VoxelVolume"] == 64.0
    assert f["original_shape_Maximum3DDiameter"] == pytest.approx(np.sqrt(12.0))


def test_shape_anisotropic_diameter():
    m = np.zeros((3, 1, 4), dtype=int)
    m[0, 0, 0] = m[2, 0, 3] = m[1, 0, 1] = 1
    f = shape_features(LesionMask(m, "a"), (0.5, 1.0, 2.0)).values
    assert f["original_shape_Maximum3DDiameter"] == pytest.approx(np.hypot(1.0, 6.0))


def test_shape_hull_path_matches_bruteforce():
    from scipy.spatial.distance import pdist

    from crlmprog.radiomics.features import max_pairwise_distance

    pts = np.random.default_rng(1).normal(size=(2000, 3))
    assert max_pairwise_distance(pts) == pytest.approx(pdist(pts).max())


# -- GLCM --------------------------------------------------------------------


def test_glcm_uniform():
    f = glcm_features(as_grid(np.ones((3, 3, 3), dtype=int)))
    assert f["Contrast"] == 0.0 and f["JointEnergy"] == 1.0 and f["JointEntropy"] == 0.0


def test_glcm_alternating_line():
    f = glcm_features(as_grid([1, 2, 1, 2]))
    assert f["Contrast"] == 1.0
    assert f["JointEnergy"] == 0.5
    assert f["Correlation"] == pytest.approx(-1.0)


def test_glcm_checkerboard():
    board = (np.indices((4, 4)).sum(axis=0) % 2) + 1
    grid = as_grid(board)
    faces = [(1, 0, 0), (0, 1, 0)]
    assert glcm_features(grid, directions=faces)["Correlation"] == pytest.approx(-1.0)
    # all-direction average, reproduced from the brute-force matrices
    per_dir = []
    for d in neighbours13():
        P = naive_glcm(grid.levels, 2, d)
        if P.sum():
            p = P / P.sum()
            per_dir.append(1.0 if np.allclose(p, np.diag(np.diag(p))) else -1.0)
    assert glcm_features(grid)["Correlation"] == pytest.approx(np.mean(per_dir))


def test_glcm_no_pairs():
    with pytest.raises(NoPairs):
        glcm_features(as_grid([[[1]]]))


def test_glcm_probabilities_and_symmetry():
    rng = np.random.default_rng(2)
    grid = as_grid(rng.integers(0, 5, (5, 5, 5)))
    for P in glcm_matrices(grid):
        if P.sum():
            assert np.isclose((P / P.sum()).sum(), 1.0)
            assert np.array_equal(P, P.T)


def _random_grid(seed):
    rng = np.random.default_rng(seed)
    ng = int(rng.integers(1, 5))
    lev = rng.integers(1, ng + 1, (4, 4, 4))
    lev[rng.random((4, 4, 4)) < 0.25] = 0
    lev[0, 0, 0] = max(lev[0, 0, 0], 1)
    return as_grid(lev)


@pytest.mark.parametrize("seed", range(15))
def test_texture_matrices_match_bruteforce(seed):
    grid = _random_grid(seed)
    ng = grid.n_levels
    assert list(DIRECTIONS_13) == neighbours13()
    for sym in (True, False):
        mats = glcm_matrices(grid, symmetric=sym)
        for k, d in enumerate(DIRECTIONS_13):
            assert np.array_equal(mats[k], naive_glcm(grid.levels, ng, d, symmetric=sym))
    runs = glrlm_matrices(grid)
    for k, d in enumerate(DIRECTIONS_13):
        assert np.array_equal(runs[k], naive_runs(grid.levels, ng, d))
    Z = glszm_matrix(grid)
    Zn = naive_zones(grid.levels, ng)
    assert np.array_equal(Z, Zn)


def test_glcm_distance_two_bruteforce():
    grid = _random_grid(99)
    mats = glcm_matrices(grid, distance=2)
    for k, d in enumerate(DIRECTIONS_13):
        assert np.array_equal(mats[k], naive_glcm(grid.levels, grid.n_levels, d, distance=2))


# -- GLRLM -------------------------------------------------------------------


def test_glrlm_single_run():
    f = glrlm_features(as_grid([1, 1, 1]), directions=[(1, 0, 0)])
    assert f["LongRunEmphasis"] == 9.0
    assert f["ShortRunEmphasis"] == pytest.approx(1 / 9)


def test_glrlm_alternating():
    f = glrlm_features(as_grid([1, 2, 1, 2]))
    assert f["ShortRunEmphasis"] == 1.0 and f["RunPercentage"] == 1.0


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_glrlm_constant_line_run_percentage(n):
    f = glrlm_features(as_grid([3] * n), directions=[(1, 0, 0)])
    assert f["RunPercentage"] == pytest.approx(1 / n)


# -- GLSZM -------------------------------------------------------------------


def test_glszm_constant_region():
    Z = glszm_matrix(as_grid(np.ones((2, 3, 2), dtype=int)))
    assert Z.sum() == 1 and Z[0, 11] == 1
    assert glszm_features(as_grid(np.ones((2, 3, 2), dtype=int)))["ZonePercentage"] == pytest.approx(1 / 12)


def test_glszm_two_disjoint_voxels():
    Z = glszm_matrix(as_grid([1, 0, 1]))
    assert Z[0, 0] == 2 and Z.sum() == 2


def test_glszm_diagonal_chain_is_one_zone():
    g = np.zeros((3, 2, 2), dtype=int)
    g[0, 0, 0] = g[1, 1, 0] = g[2, 1, 1] = 1
    Z = glszm_matrix(as_grid(g))
    assert Z.sum() == 1 and Z[0, 2] == 1


# -- invariances -------------------------------------------------------------


def _texture(volume, mask, spec):
    grid = discretize(volume, mask, spec)
    return {**glcm_features(grid), **glrlm_features(grid), **glszm_features(grid)}


def _random_lesion(seed, shape=(6, 5, 4)):
    rng = np.random.default_rng(seed)
    vol = np.round(rng.normal(40, 15, shape))
    m = rng.random(shape) < 0.7
    m[2, 2, 2] = True
    return Volume(vol, (1, 1, 1)), LesionMask(m, "L")


@pytest.mark.parametrize("seed", range(4))
def test_offset_invariance_fixed_count(seed):
    vol, mask = _random_lesion(seed)
    spec = DiscretizationSpec.fixed_count(5)
    shifted = Volume(vol.voxels + 300.0, vol.spacing)
    assert _texture(vol, mask, spec) == _texture(shifted, mask, spec)


@pytest.mark.parametrize("axes", [(0, 1), (0, 2), (1, 2)])
def test_rotation_invariance(axes):
    vol, mask = _random_lesion(7)
    spec = DiscretizationSpec(bin_width=10)
    base = {**_texture(vol, mask, spec), **firstorder_features(vol, mask, spec).values}
    rv = Volume(np.rot90(vol.voxels, axes=axes), (1, 1, 1))
    rm = LesionMask(np.rot90(mask.voxels, axes=axes), "L")
    rot = {**_texture(rv, rm, spec), **firstorder_features(rv, rm, spec).values}
    for k in base:
        assert rot[k] == pytest.approx(base[k], rel=1e-9, abs=1e-12), k


# -- aggregation / CCC -------------------------------------------------------


def fs(lesion, **vals):
    return RadiomicFeatureSet(lesion, {k: float(v) for k, v in vals.items()})


def test_aggregate_single():
    a = fs("L1", f=2.5)
    largest, weighted = aggregate_lesions([a], [10.0])
    assert largest == a and weighted.values == a.values


def test_aggregate_weighted():
    _, w = aggregate_lesions([fs("L1", f=0), fs("L2", f=4)], [1.0, 3.0])
    assert w.values["f"] == 3.0
    _, w = aggregate_lesions([fs("L1", f=1), fs("L2", f=3)], [2.0, 2.0])
    assert w.values["f"] == 2.0


def test_aggregate_tie_smallest_id():
    largest, _ = aggregate_lesions([fs("L2", f=1), fs("L1", f=3)], [2.0, 2.0])
    assert largest.lesion_id == "L1"


def test_aggregate_mismatch():
    with pytest.raises(ValueError):
        aggregate_lesions([fs("a", f=1)], [1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 6), elements=st.floats(-1e4, 1e4)),
    st.lists(st.floats(0.01, 1e4), min_size=6, max_size=6),
)
def test_aggregate_bounded(values, vols):
    sets = [fs(f"L{i}", f=v) for i, v in enumerate(values)]
    _, w = aggregate_lesions(sets, vols[: len(sets)])
    assert values.min() <= w.values["f"] <= values.max()


def test_ccc_examples():
    a = np.array([1.0, 2.0, 3.0])
    assert concordance_correlation(a, a) == 1.0
    shifted = concordance_correlation(a, a + 10.0)
    assert shifted == pytest.approx(2 * (2 / 3) / (4 / 3 + 100))
    assert concordance_correlation(a, [1.0, 2.0, 3.0001]) == pytest.approx(1.0, abs=1e-4)
    assert concordance_correlation([4.0, 4.0], [4.0, 4.0]) == 1.0
    rep = ccc_filter(np.column_stack([a, a]), np.column_stack([a, a + 10]), ["same", "shift"])
    assert rep.retained == ["same"]


def test_eroded_mask():
    m = np.zeros((5, 5, 5), dtype=int)
    m[1:4, 1:4, 1:4] = 1
    e = eroded_mask(LesionMask(m, "a"))
    assert e.voxels.sum() == 1
    thin = LesionMask(np.ones((1, 1, 3), dtype=int), "t")
    assert eroded_mask(thin) is thin


# -- containers / phantom ----------------------------------------------------


def test_raw_round_trip(tmp_path):
    vol, masks = make_phantom(3)
    write_volume(vol, tmp_path / "v.raw", hu_offset=-1024.0)
    write_mask(masks[0], tmp_path / "m.raw", vol.spacing)
    back = read_volume(tmp_path / "v.raw")
    assert np.array_equal(back.voxels, vol.voxels) and back.spacing == vol.spacing
    assert np.array_equal(read_mask(tmp_path / "m.raw").voxels, masks[0].voxels)


def test_mask_dims_mismatch():
    vol = Volume(np.zeros((3, 3, 3)), (1, 1, 1))
    with pytest.raises(VolumeError, match=r"\(2, 2, 2\).*\(3, 3, 3\)"):
        extract_lesion_features(vol, LesionMask(np.ones((2, 2, 2), dtype=int), "x"))


def test_phantom_extraction():
    vol, masks = make_phantom(5)
    out = extract_lesion_features(vol, masks[0])
    assert 30 <= len(out.values) <= 40
    assert set(out.categories.values()) == {"firstorder", "shape", "glcm", "glrlm", "glszm"}
    assert all(np.isfinite(v) for v in out.values.values())
    assert out.values == extract_lesion_features(vol, masks[0]).values
