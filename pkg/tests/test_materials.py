import numpy as np
import pytest

from stampbench.errors import ConfigError, DataError
from stampbench.materials import (
    CURVE_POINTS,
    CurveFamilyConfig,
    StressStrainCurve,
    cluster_and_balance,
    generate_material_set,
    load_materials,
    resample_curve,
    save_curves,
    scale_augment,
    scale_factors,
    synthesize_seed_curves,
)


def assert_valid_curve(c: StressStrainCurve):
    assert c.strains.shape == (CURVE_POINTS,)
    assert c.stresses.shape == (CURVE_POINTS,)
    assert c.strains[0] == 0.0
    assert np.all(np.diff(c.strains) > 0)
    assert np.all(c.stresses > 0)


def test_synthesize_counts_and_invariants():
    steel = synthesize_seed_curves("steel", 101, rng_seed=7)
    assert len(steel) == 101
    alu = synthesize_seed_curves("aluminium", 11, rng_seed=7)
    assert len(alu) == 11
    for c in steel + alu:
        assert_valid_curve(c)


def test_synthesize_deterministic():
    a = synthesize_seed_curves("steel", 20, rng_seed=7)
    b = synthesize_seed_curves("steel", 20, rng_seed=7)
    for ca, cb in zip(a, b):
        np.testing.assert_array_equal(ca.strains, cb.strains)
        np.testing.assert_array_equal(ca.stresses, cb.stresses)


def test_synthesize_invalid_family():
    with pytest.raises(ConfigError):
        synthesize_seed_curves("titanium", 5, rng_seed=0)


def test_curve_invariants_property():
    # random seeds / sizes, every emitted curve must satisfy the type invariants
    for seed in range(10):
        n = 1 + seed * 3
        for family in ("steel", "aluminium"):
            for c in synthesize_seed_curves(family, n, rng_seed=seed):
                assert_valid_curve(c)


def test_resample_endpoints_and_linearity():
    c = resample_curve([(0.0, 200.0), (0.5, 400.0)])
    assert c.stresses[0] == 200.0
    assert c.stresses[-1] == 400.0
    expected = 200.0 + (400.0 - 200.0) * c.strains / 0.5
    np.testing.assert_allclose(c.stresses, expected, rtol=1e-12)


def test_resample_idempotent_on_uniform_curve():
    strains = np.linspace(0.0, 0.3, CURVE_POINTS)
    stresses = 300.0 + 500.0 * strains
    c = resample_curve(list(zip(strains, stresses)))
    np.testing.assert_allclose(c.strains, strains, atol=1e-15)
    np.testing.assert_allclose(c.stresses, stresses, atol=1e-12)


def hand_interp(raw, s):
    # independent piecewise-linear oracle
    for (s0, v0), (s1, v1) in zip(raw[:-1], raw[1:]):
        if s0 <= s <= s1:
            return v0 + (v1 - v0) * (s - s0) / (s1 - s0)
    raise AssertionError("strain outside raw range")


def test_resample_plateau_matches_hand_oracle():
    raw = [(0.0, 100.0), (0.2, 300.0), (0.4, 300.0)]
    c = resample_curve(raw)
    expected = np.array([hand_interp(raw, s) for s in c.strains])
    np.testing.assert_allclose(c.stresses, expected, atol=1e-12)
    assert np.all(c.stresses[c.strains >= 0.2] == 300.0)


def test_resample_rejects_nonmonotonic():
    with pytest.raises(DataError):
        resample_curve([(0.0, 100.0), (0.2, 200.0), (0.1, 300.0)])
    with pytest.raises(DataError):
        resample_curve([(0.0, 100.0)])


def test_scale_factor_grid():
    fs = scale_factors(-0.10, 0.10, 0.02)
    assert len(fs) == 10
    assert 1.0 not in fs
    np.testing.assert_allclose(
        fs, [0.90, 0.92, 0.94, 0.96, 0.98, 1.02, 1.04, 1.06, 1.08, 1.10], atol=1e-12
    )


def test_scale_augment_counts_and_values():
    seeds = synthesize_seed_curves("aluminium", 11, rng_seed=7)
    out = scale_augment(seeds, -0.10, 0.10, 0.02)
    assert len(out) == 110  # 11 seeds x 10 factors

    one = synthesize_seed_curves("steel", 1, rng_seed=3)
    pair = scale_augment(one, -0.10, 0.10, 0.20)
    assert len(pair) == 2
    np.testing.assert_allclose(pair[0].stresses, one[0].stresses * 0.9, rtol=1e-12)
    np.testing.assert_allclose(pair[1].stresses, one[0].stresses * 1.1, rtol=1e-12)
    for c in pair:
        np.testing.assert_array_equal(c.strains, one[0].strains)


def test_scale_augment_count_combinatorial():
    for n_seeds, step in [(3, 0.02), (5, 0.05), (2, 0.10)]:
        seeds = synthesize_seed_curves("steel", n_seeds, rng_seed=1)
        nf = len(scale_factors(-0.10, 0.10, step))
        assert len(scale_augment(seeds, -0.10, 0.10, step)) == n_seeds * nf


def test_scale_augment_bad_step():
    seeds = synthesize_seed_curves("steel", 2, rng_seed=0)
    with pytest.raises(ConfigError):
        scale_augment(seeds, -0.1, 0.1, 0.0)


def test_cluster_and_balance_counts():
    seeds = synthesize_seed_curves("steel", 101, rng_seed=7)
    first = cluster_and_balance(seeds, k=5, target_per_cluster=40, rng_seed=1)
    assert len(first) == 200
    final = cluster_and_balance(first, k=5, target_per_cluster=120, rng_seed=2)
    assert len(final) == 600
    sizes = np.bincount([c.cluster for c in final], minlength=6)[1:]
    assert np.all(sizes == 120)
    for c in final:
        assert_valid_curve(c)


def test_cluster_k1():
    seeds = synthesize_seed_curves("steel", 10, rng_seed=0)
    out = cluster_and_balance(seeds, k=1, target_per_cluster=10, rng_seed=0)
    assert all(c.cluster == 1 for c in out)


def test_cluster_target_too_small():
    seeds = synthesize_seed_curves("steel", 30, rng_seed=0)
    with pytest.raises(ConfigError):
        cluster_and_balance(seeds, k=2, target_per_cluster=5, rng_seed=0)


def test_cluster_stability_on_own_output():
    # five well-separated stress levels, 12 curves each
    rng = np.random.default_rng(4)
    curves = []
    for gi, level in enumerate([100.0, 300.0, 600.0, 900.0, 1200.0]):
        for j in range(12):
            strains = np.linspace(0.0, 0.4, CURVE_POINTS)
            stresses = level * (1.0 + 0.02 * rng.standard_normal()) + 50.0 * strains
            curves.append(StressStrainCurve(strains, stresses, material_id=gi * 12 + j))
    balanced = cluster_and_balance(curves, k=5, target_per_cluster=12, rng_seed=4)
    again = cluster_and_balance(balanced, k=5, target_per_cluster=12, rng_seed=4)
    sizes_a = sorted(np.bincount([c.cluster for c in balanced], minlength=6)[1:])
    sizes_b = sorted(np.bincount([c.cluster for c in again], minlength=6)[1:])
    assert sizes_a == sizes_b == [12] * 5


def test_generate_material_set_steel_default():
    cfg = CurveFamilyConfig(family="steel", n_seed_curves=101, target_per_cluster=120, rng_seed=7)
    curves = generate_material_set(cfg)
    assert len(curves) == 600
    sizes = np.bincount([c.cluster for c in curves], minlength=6)[1:]
    assert np.all(sizes == 120)


def test_generate_material_set_aluminium_default():
    cfg = CurveFamilyConfig(family="aluminium", n_seed_curves=11, target_per_cluster=None, rng_seed=7)
    curves = generate_material_set(cfg)
    sizes = np.bincount([c.cluster for c in curves], minlength=6)[1:]
    assert len(set(sizes)) == 1  # balanced
    assert sizes.sum() >= 110


def test_save_and_load_roundtrip(tmp_path):
    curves = generate_material_set(CurveFamilyConfig(family="steel", n_seed_curves=20,
                                                     target_per_cluster=20, rng_seed=1))
    save_curves(curves, tmp_path, family="steel")
    loaded = load_materials(tmp_path)
    assert len(loaded) == len(curves)
    by_id = {c.material_id: c for c in curves}
    for lc in loaded:
        orig = by_id[lc.material_id]
        assert lc.cluster == orig.cluster
        assert lc.provenance == orig.provenance
        np.testing.assert_allclose(lc.strains, orig.strains, atol=1e-15)
        np.testing.assert_allclose(lc.stresses, orig.stresses, atol=1e-12)


def test_load_missing_file_names_material(tmp_path):
    curves = synthesize_seed_curves("steel", 3, rng_seed=0)
    save_curves(curves, tmp_path, family="steel")
    (tmp_path / "material_00001.csv").unlink()
    with pytest.raises(DataError, match="material_id=1"):
        load_materials(tmp_path)
