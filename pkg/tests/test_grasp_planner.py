import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import any_under, conv_direct, exhaustive_plan, offsets
from tanglepick.depth_scene import DepthMap
from tanglepick.grasp_planner import (
    _binary_region,
    _support_convolve,
    collision_region,
    convolve,
    gaussian_kernel,
    graspability_map,
    plan_from_masks,
    plan_grasp,
    plan_with_clearance,
    spread_line,
)
from tanglepick.gripper import GripperSpec, rasterize_footprints, sweep_orientations

SMALL = GripperSpec(aperture_w=6, plate_lateral_width=4, plate_thickness=1, max_aperture=12)


def footprint_table(spec, step, scale=1.0):
    out = {}
    for rot in sweep_orientations(step):
        fp = rasterize_footprints(spec, rot, scale)
        out[rot] = (fp.gc.tolist(), fp.gcp.tolist())
    return out


# --- convolution -----------------------------------------------------------


def test_convolve_matches_nested_loops():
    rng = np.random.default_rng(0)
    for _ in range(50):
        grid = rng.normal(size=tuple(rng.integers(1, 10, 2)))
        kernel = rng.normal(size=(2 * rng.integers(0, 3) + 1, 2 * rng.integers(0, 3) + 1))
        kernel[rng.random(kernel.shape) < 0.3] = 0.0
        assert convolve(grid, kernel).tolist() == conv_direct(grid.tolist(), kernel.tolist())


def test_convolve_custom_anchor():
    grid = np.arange(12.0).reshape(3, 4)
    kernel = np.array([[0.0, 1.0, 2.0]])
    got = convolve(grid, kernel, anchor=(0, 0))
    assert got.tolist() == conv_direct(grid.tolist(), kernel.tolist(), anchor=(0, 0))


def test_identity_kernel():
    grid = np.random.default_rng(1).random((5, 6))
    assert np.array_equal(convolve(grid, np.ones((1, 1))), grid)


def test_convolve_rejects_bad_kernels():
    with pytest.raises(ValueError, match="odd"):
        convolve(np.zeros((3, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError, match="anchor"):
        convolve(np.zeros((3, 3)), np.ones((3, 3)), anchor=(3, 0))
    with pytest.raises(ValueError):
        convolve(np.zeros(3), np.ones((1, 1)))


@pytest.mark.parametrize("sigma", [0.3, 1.0, 2.5, 7.0])
def test_gaussian_kernel_normalised(sigma):
    g = gaussian_kernel(sigma)
    assert abs(g.sum() - 1.0) < 1e-12
    assert g.shape[0] % 2 == 1 and g.shape == g.shape[::-1]
    assert np.array_equal(g, g.T) and np.array_equal(g, g[::-1, ::-1])
    c = g.shape[0] // 2
    assert g[c, c] == g.max()


def test_binary_region_equals_thresholded_convolution():
    rng = np.random.default_rng(2)
    for _ in range(40):
        mask = rng.random(tuple(rng.integers(3, 15, 2))) < 0.2
        fp = rng.random((2 * rng.integers(1, 4) + 1,) * 2) < 0.4
        assert np.array_equal(_binary_region(mask, fp), convolve(mask, fp) > 0)


def test_support_window_is_bit_identical():
    rng = np.random.default_rng(3)
    g = gaussian_kernel(1.7)
    for _ in range(30):
        mask = np.zeros((30, 40), dtype=bool)
        y, x = rng.integers(0, 30), rng.integers(0, 40)
        mask[y : y + rng.integers(1, 6), x : x + rng.integers(1, 6)] = True
        assert np.array_equal(_support_convolve(mask, g), convolve(mask, g))
    assert not _support_convolve(np.zeros((4, 4), bool), g).any()


def test_graspability_bounded_by_one():
    rng = np.random.default_rng(4)
    g = gaussian_kernel(2.0)
    for _ in range(20):
        wc = rng.random((20, 20)) < 0.5
        wcp = rng.random((20, 20)) < 0.3
        G = graspability_map(wc, wcp, g)
        assert G.min() >= 0 and G.max() <= 1.0 + 1e-12


# --- planner examples -----------------------------------------------------


def test_isolated_block_is_grasped_at_its_centre():
    v = np.zeros((21, 21))
    v[9:12, 9:12] = 5.0
    plan = plan_grasp(DepthMap(v, 1.0), SMALL, sigma_mm=1.0)
    assert plan.found
    x, y, _ = plan.grasp
    assert (x, y) == (10, 10)
    assert plan.score > 0


def test_packed_container_has_no_grasp():
    d = DepthMap(np.full((15, 15), 3.0), 1.0)
    plan, rz = plan_with_clearance(d, SMALL, 0.5, sigma_mm=1.0, walled=True)
    assert not plan.found and plan.entanglement is None and rz is None
    assert plan.to_dict()["Or"] is None


def test_unwalled_packed_map_only_grasps_off_the_edge():
    # outside the map counts as empty, so the only free placements hang a plate off the border
    plan = plan_grasp(DepthMap(np.full((15, 15), 3.0), 1.0), SMALL, sigma_mm=1.0)
    x, y, rot = plan.grasp
    plate = offsets(rasterize_footprints(SMALL, rot, 1.0).gcp.tolist())
    assert any(not (0 <= y + dy < 15 and 0 <= x + dx < 15) for dy, dx in plate)


def test_empty_scene_has_no_grasp():
    assert not plan_grasp(DepthMap(np.zeros((8, 8)), 1.0), SMALL).found


def test_three_blocks_tallest_wins_across_the_row():
    # three blocks in a row with the tallest in the middle: opening along the
    # row would land a plate on a neighbour, so the jaws turn to 90 degrees
    v = np.zeros((16, 26))
    for x0, height in ((4, 10.0), (10, 20.0), (16, 10.0)):
        v[6:10, x0 : x0 + 4] = height
    plan = plan_grasp(DepthMap(v, 1.0), SMALL, sigma_mm=1.0)
    x, y, rot = plan.grasp
    assert rot == 90.0
    assert 10 <= x < 14 and 6 <= y < 10
    expected = exhaustive_plan(v.tolist(), 0.0, footprint_table(SMALL, 15.0), gaussian_kernel(1.0).tolist())
    assert (plan.grasp, plan.entanglement) == expected


def test_two_clumps_spread_towards_the_denser_one():
    v = np.zeros((20, 40))
    v[6:14, 2:12] = 5.0  # dense clump
    v[6:14:3, 28:38:3] = 5.0  # sparse clump
    v[9:11, 18:21] = 9.0  # a tall item in the gap
    plan = plan_grasp(DepthMap(v, 1.0), SMALL, sigma_mm=1.0)
    x, y, _ = plan.grasp
    assert 18 <= x < 21 and 9 <= y < 11
    ex, ey, _ = plan.entanglement
    assert 2 <= ex < 12
    assert plan.spread_direction[0] < 0
    assert abs(np.hypot(*plan.spread_direction) - 1.0) < 1e-12
    expected = exhaustive_plan(v.tolist(), 0.0, footprint_table(SMALL, 15.0), gaussian_kernel(1.0).tolist())
    assert (plan.grasp, plan.entanglement) == expected


def test_target_height_override():
    v = np.zeros((21, 31))
    v[9:12, 5:8] = 9.0
    v[9:12, 22:25] = 4.0
    d = DepthMap(v, 1.0)
    assert plan_grasp(d, SMALL, sigma_mm=1.0).grasp[0] == 6
    # lowering the target admits the shorter block; the taller one wins ties by raster order
    low = plan_grasp(d, SMALL, sigma_mm=1.0, target_height=4.0, keep_maps=True)
    assert low.maps.G[10, 23] == low.maps.G[10, 6] == low.score
    assert low.grasp[0] == 6
    assert not plan_grasp(d, SMALL, target_height=10.0).found


def test_translation_equivariance():
    rng = np.random.default_rng(5)
    base = np.zeros((14, 14))
    base[rng.random((14, 14)) < 0.15] = 2.0
    base[6, 6] = 4.0
    big = np.zeros((40, 40))
    big[10:24, 13:27] = base
    moved = np.zeros((40, 40))
    moved[17:31, 8:22] = base
    a = plan_grasp(DepthMap(big, 1.0), SMALL, sigma_mm=1.0)
    b = plan_grasp(DepthMap(moved, 1.0), SMALL, sigma_mm=1.0)
    assert a.found and b.found
    assert (b.grasp[0] - a.grasp[0], b.grasp[1] - a.grasp[1]) == (-5, 7)
    assert b.grasp[2] == a.grasp[2] and b.score == a.score


def test_keepout_blocks_grasps_but_is_not_material():
    v = np.zeros((15, 15))
    v[7, 7] = 3.0
    Oc = v >= 3.0
    Ocp = v > 0.0
    keep = np.zeros_like(Oc)
    free = plan_from_masks(Oc, Ocp, SMALL, 1.0, sigma_mm=1.0)
    walled = plan_from_masks(Oc, Ocp, SMALL, 1.0, sigma_mm=1.0, keepout=np.ones_like(Oc))
    assert free.found and not walled.found
    keep[:, :5] = True
    plan = plan_from_masks(Oc, Ocp, SMALL, 1.0, sigma_mm=1.0, keepout=keep, keep_maps=True)
    assert plan.found
    # Er comes from material collisions only
    assert plan.maps.wcp[plan.entanglement[1], plan.entanglement[0]]
    assert not plan.maps.wcp[:, :2].any()


def test_invalid_sigma():
    with pytest.raises(ValueError):
        plan_from_masks(np.ones((3, 3), bool), np.ones((3, 3), bool), SMALL, 1.0, sigma_mm=0.0)


def test_keep_maps_shapes():
    v = np.zeros((12, 12))
    v[5:7, 5:7] = 2.0
    plan = plan_grasp(DepthMap(v, 1.0), SMALL, sigma_mm=1.0, keep_maps=True)
    m = plan.maps
    assert m.G.shape == m.Gprime.shape == m.wc.shape == m.wcp.shape == v.shape
    assert m.rotation == plan.grasp[2]
    assert m.G[plan.grasp[1], plan.grasp[0]] == plan.score


def test_spread_line():
    direction, rot = spread_line((0, 0, 0.0), (3, 3, 0.0), 0.0)
    assert direction == pytest.approx((2 ** -0.5, 2 ** -0.5))
    assert rot == pytest.approx(45.0)
    direction, rot = spread_line((5, 5, 30.0), (5, 5, 30.0), 30.0)
    assert rot == 30.0


# --- against the exhaustive oracle ------------------------------------------


def random_scene(rng, lo=8, hi=15):
    h, w = rng.integers(lo, hi, 2)
    v = np.zeros((h, w))
    for _ in range(rng.integers(1, 7)):
        y0, x0 = rng.integers(0, h), rng.integers(0, w)
        v[y0 : y0 + rng.integers(1, 4), x0 : x0 + rng.integers(1, 4)] = rng.integers(1, 5)
    return v


def test_planner_matches_exhaustive_search():
    rng = np.random.default_rng(11)
    g = gaussian_kernel(0.8)
    for _ in range(25):
        v = random_scene(rng)
        rz = float(rng.integers(0, 3))
        spec = GripperSpec(aperture_w=4, plate_lateral_width=3, plate_thickness=1, max_aperture=10,
                           insertion_depth_rz=rz)
        plan = plan_grasp(DepthMap(v, 1.0), spec, sigma_mm=0.8, step=45.0)
        expected = exhaustive_plan(v.tolist(), rz, footprint_table(spec, 45.0), g.tolist())
        assert (plan.grasp, plan.entanglement) == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([15.0, 30.0, 90.0]))
def test_emitted_plans_are_collision_free(seed, step):
    rng = np.random.default_rng(seed)
    v = random_scene(rng, 6, 18)
    spec = GripperSpec(aperture_w=3, plate_lateral_width=2, plate_thickness=1, max_aperture=10)
    plan = plan_grasp(DepthMap(v, 1.0), spec, sigma_mm=0.8, step=step)
    if plan.found:
        x, y, rot = plan.grasp
        gcp = offsets(rasterize_footprints(spec, rot, 1.0).gcp.tolist())
        ocp = (v > 0).tolist()
        assert not any_under(ocp, y, x, gcp)
        if plan.entanglement is not None:
            ex, ey, _ = plan.entanglement
            assert any_under(ocp, ey, ex, gcp)


# --- clearance ladder -------------------------------------------------------


def linear_ladder(d, spec, rz_step, **kw):
    top = float(d.values.max())
    k = 0
    while spec.insertion_depth_rz + k * rz_step < top:
        rz = spec.insertion_depth_rz + k * rz_step
        plan = plan_grasp(d, GripperSpec(**{**spec.to_dict(), "insertion_depth_rz": rz}), **kw)
        if plan.found:
            return plan, rz
        k += 1
    return None, None


def test_clearance_bisection_matches_linear_ladder():
    rng = np.random.default_rng(7)
    for _ in range(15):
        v = rng.integers(0, 6, size=(14, 14)).astype(float) * 0.5
        d = DepthMap(v, 1.0)
        plan, rz = plan_with_clearance(d, SMALL, 0.5, sigma_mm=1.0, step=30.0)
        ref, ref_rz = linear_ladder(d, SMALL, 0.5, sigma_mm=1.0, step=30.0)
        assert rz == ref_rz
        if ref is None:
            assert not plan.found
        else:
            assert plan == ref


def test_walled_plans_keep_plates_inside():
    rng = np.random.default_rng(8)
    for _ in range(10):
        v = rng.integers(0, 4, size=(20, 24)).astype(float) * 0.5
        d = DepthMap(v, 1.0)
        plan, rz = plan_with_clearance(d, SMALL, 0.5, sigma_mm=1.0, step=30.0, walled=True, keep_maps=True)
        if not plan.found:
            continue
        x, y, rot = plan.grasp
        assert 0 <= x < 24 and 0 <= y < 20
        plate = offsets(rasterize_footprints(SMALL, rot, 1.0).gcp.tolist())
        assert all(0 <= y + dy < 20 and 0 <= x + dx < 24 for dy, dx in plate)
        assert not any_under((v > rz).tolist(), y, x, plate)
        assert plan.maps.G.shape == v.shape


def test_clearance_validation():
    with pytest.raises(ValueError):
        plan_with_clearance(DepthMap(np.ones((3, 3)), 1.0), SMALL, 0.0)
    plan, rz = plan_with_clearance(DepthMap(np.zeros((5, 5)), 1.0), SMALL, 0.5)
    assert not plan.found and rz is None


def test_collision_region_is_monotone_in_material():
    rng = np.random.default_rng(9)
    fp = rasterize_footprints(SMALL, 30.0, 1.0)
    a = rng.random((16, 16)) < 0.1
    b = a | (rng.random((16, 16)) < 0.1)
    assert not (collision_region(a, fp.gcp) & ~collision_region(b, fp.gcp)).any()
