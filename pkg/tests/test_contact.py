import numpy as np
import pytest

from drilltwin.anatomy import build_sdf, carve_voxels
from drilltwin.contact import (AblationParams, ContactModel, DrillAblation,
                               MaterialContact)

from helpers import single_voxel_volume, slab_volume


SP = 0.5
Z_TOP = 5 * SP          # top labeled voxel-center plane of the slab


def _analytic_slab_distance(z):
    """Signed interpolated distance for the flat slab, derived by hand."""
    if z >= Z_TOP + SP:
        return z - Z_TOP
    if z >= Z_TOP:
        return 2.0 * (z - Z_TOP) - SP
    return z - Z_TOP - SP


def test_static_spring_force_matches_analytic_penetration():
    vol = slab_volume(spacing=SP, top_layer=5)
    sdfs = build_sdf(vol)
    model = ContactModel()
    stiffness = 3.0     # cortical
    for z in [Z_TOP + 0.45, Z_TOP + 0.2, Z_TOP + 0.05, Z_TOP - 0.3, Z_TOP - 0.8]:
        tip = np.array([2.75, 2.75, z])
        res = model.compute(sdfs, tip, np.zeros(3))
        d = _analytic_slab_distance(z)
        if d >= 0.0:
            assert res.magnitude == 0.0
            assert res.penetrating == ()
        else:
            expect = stiffness * (-d)
            assert res.magnitude == pytest.approx(expect, rel=1e-9)
            # normal points out of the slab, so the force pushes up
            assert res.force_n[2] == pytest.approx(expect, rel=1e-9)
            assert res.per_structure_n[1] == pytest.approx(expect, rel=1e-9)
            assert res.penetrating == (1,)


def test_precomputed_distances_give_identical_result():
    from drilltwin.anatomy import query_distances

    vol = slab_volume(spacing=SP, top_layer=5)
    sdfs = build_sdf(vol)
    tip = np.array([2.6, 2.9, Z_TOP + 0.1])
    a = ContactModel().compute(sdfs, tip, np.array([0.1, 0.0, -0.4]))
    d = query_distances(sdfs, tip).distances_mm
    b = ContactModel().compute(sdfs, tip, np.array([0.1, 0.0, -0.4]), dists=d)
    assert np.array_equal(a.force_n, b.force_n)
    assert np.array_equal(a.per_structure_n, b.per_structure_n)


def test_damper_resists_approach_only():
    vol = slab_volume(spacing=SP, top_layer=5)
    sdfs = build_sdf(vol)
    model = ContactModel(MaterialContact(damping_n_s_per_mm=0.5))
    tip = np.array([2.75, 2.75, Z_TOP + 0.1])
    static = model.compute(sdfs, tip, np.zeros(3)).magnitude
    approaching = model.compute(sdfs, tip, np.array([0.0, 0.0, -2.0])).magnitude
    retreating = model.compute(sdfs, tip, np.array([0.0, 0.0, 2.0])).magnitude
    assert approaching == pytest.approx(static + 0.5 * 2.0, rel=1e-9)
    assert retreating == pytest.approx(static, rel=1e-9)


def test_degenerate_normal_uses_cached_direction():
    vol = single_voxel_volume(spacing=SP)
    sdfs = build_sdf(vol)
    center = np.full(3, (vol.shape[0] // 2) * SP)
    model = ContactModel()
    first = model.compute(sdfs, center, np.zeros(3))
    # perfectly symmetric point: gradient vanishes, no cache to fall back on
    assert first.degenerate_normal
    assert first.magnitude == 0.0
    off = center + np.array([0.0, 0.0, 0.15])
    side = model.compute(sdfs, off, np.zeros(3))
    assert not side.degenerate_normal
    again = model.compute(sdfs, center, np.zeros(3))
    assert again.degenerate_normal          # gradient still zero, cache used
    assert again.magnitude > 0.0
    assert np.allclose(again.force_n / again.magnitude,
                       side.force_n / side.magnitude, atol=1e-12)


def test_contact_param_validation():
    with pytest.raises(ValueError):
        MaterialContact(damping_n_s_per_mm=-0.1)
    with pytest.raises(ValueError):
        AblationParams(burr_radius_mm=0.0)
    with pytest.raises(ValueError):
        AblationParams(carve_quantum_n_s=0.0)
    with pytest.raises(ValueError):
        AblationParams(bite_fraction=1.5)


def test_ablation_quantum_schedule():
    vol = slab_volume(n=14, top_layer=8)
    sdfs = build_sdf(vol)
    ab = DrillAblation(AblationParams(cut_threshold_n=0.4, carve_quantum_n_s=0.08))
    tip = np.array([3.0, 3.0, 4.3])
    force = np.array([0.0, 0.0, 0.8])
    # 0.8 N x 1 ms = 0.0008 N s per tick, quantum reached on tick 100
    # (rounding of the running sum may push it one tick later)
    for k in range(99):
        assert ab.update(0.001, 0.8, tip, force, vol, sdfs) is None
    res = ab.update(0.001, 0.8, tip, force, vol, sdfs)
    if res is None:
        res = ab.update(0.001, 0.8, tip, force, vol, sdfs)
    assert res is not None
    assert res.removed_voxels > 0


def test_ablation_below_threshold_never_cuts():
    vol = slab_volume(n=12, top_layer=6)
    sdfs = build_sdf(vol)
    ab = DrillAblation()
    tip = np.array([3.0, 3.0, 3.3])
    force = np.array([0.0, 0.0, 0.4])
    for _ in range(5000):
        assert ab.update(0.001, 0.4, tip, force, vol, sdfs) is None   # == threshold
    assert np.count_nonzero(vol.labels) == 12 * 12 * 7


def test_ablation_bites_ahead_of_the_tip():
    vol = slab_volume(n=14, top_layer=8)
    sdfs = build_sdf(vol)
    params = AblationParams()
    ab = DrillAblation(params)
    tip = np.array([3.5, 3.5, 4.6])
    force = np.array([0.0, 0.0, 1.0])          # slab pushes up, so bite goes down
    res = None
    while res is None:
        res = ab.update(0.01, 1.0, tip, force, vol, sdfs)
    expected_center = tip + params.bite_fraction * params.burr_radius_mm \
        * np.array([0.0, 0.0, -1.0])
    twin = slab_volume(n=14, top_layer=8)
    twin_sdfs = build_sdf(twin)
    ref = carve_voxels(twin, twin_sdfs, expected_center, params.burr_radius_mm)
    assert res.removed_voxels == ref.removed_voxels
    assert np.array_equal(vol.labels, twin.labels)


def test_ablation_breach_on_critical_only_region():
    from drilltwin.anatomy import LabeledVolume
    from helpers import SLAB_STRUCTURES

    labels = np.zeros((10, 10, 10), dtype=np.uint8)
    labels[4:7, 4:7, 4:7] = 1                  # critical nerve block only
    vol = LabeledVolume(labels, np.full(3, SP), np.zeros(3), SLAB_STRUCTURES)
    sdfs = build_sdf(vol)
    ab = DrillAblation(AblationParams(carve_quantum_n_s=0.01))
    tip = np.array([2.5, 2.5, 2.5])
    force = np.array([0.0, 0.0, 2.0])
    res = None
    while res is None:
        res = ab.update(0.01, 2.0, tip, force, vol, sdfs)
    assert res.breach
    assert res.removed_voxels == 0
    assert np.count_nonzero(labels == 1) == 27
