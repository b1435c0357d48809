import numpy as np
import pytest

from hyperem import synthrtm
from hyperem.synthrtm import (BandGrid, RtmParams, build_lut, forward_spectrum,
                              gen_dataset, gen_param_maps)
from hyperem.testkit import brute_force_bilinear

MID = RtmParams(cab=40, cw=0.02, cm=0.008, lai=3, ala=45, psoil=0.5)

# frozen golden constant: straight-line scalar evaluation of the closed form
GOLDEN_R_850 = 0.39545450994734654


class TestForwardSpectrum:
    def test_lai_zero_is_soil(self):
        p = RtmParams(cab=40, cw=0.02, cm=0.008, lai=0.0, ala=45, psoil=0.3)
        s = forward_spectrum(p)
        lam = s.wavelengths_nm
        soil = (0.15 + 0.25 * (lam - 400) / 2100) * (0.5 + 0.5 * 0.3)
        assert np.allclose(s.values, np.clip(soil, 0, 1), atol=1e-12)

    def test_cw_floor_no_water_well(self):
        # cw at its range floor: water absorption nearly absent vs mid cw
        lo = RtmParams(cab=40, cw=0.005, cm=0.008, lai=3, ala=45, psoil=0.5)
        g = BandGrid()
        i1450 = int(np.argmin(np.abs(g.wavelengths_nm - 1450)))
        assert forward_spectrum(lo, g).values[i1450] > \
            forward_spectrum(MID, g).values[i1450]

    def test_water_factors_identity_at_zero(self):
        # sat(0; k) = 0 so all three water factors collapse to 1
        assert synthrtm._sat(0.0, 0.03) == 0.0
        assert synthrtm._sat(0.0, 0.015) == 0.0
        assert synthrtm._sat(0.0, 0.02) == 0.0

    def test_golden_value_850nm(self):
        s = forward_spectrum(MID)
        idx = int(np.argmin(np.abs(s.wavelengths_nm - 850)))
        assert s.wavelengths_nm[idx] == 850.0
        assert s.values[idx] == pytest.approx(GOLDEN_R_850, abs=1e-6)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            RtmParams(cab=5, cw=0.02, cm=0.008, lai=3, ala=45, psoil=0.5)

    def test_range_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            vals = [lo + (hi - lo) * rng.random()
                    for lo, hi in synthrtm.PARAM_RANGES]
            s = forward_spectrum(RtmParams(*vals))
            assert s.values.min() >= 0.0 and s.values.max() <= 1.0

    def test_cab_monotonicity(self):
        # chlorophyll absorption deepens with cab: reflectance falls at the
        # 670 nm well, and the 550 nm green peak (scaled by 1 - sat(cab))
        # falls with it
        g = BandGrid()
        i670 = int(np.argmin(np.abs(g.wavelengths_nm - 670)))
        i550 = int(np.argmin(np.abs(g.wavelengths_nm - 550)))
        cabs = np.linspace(10, 80, 15)
        r670 = [forward_spectrum(RtmParams(c, 0.02, 0.008, 3, 45, 0.5), g).values[i670]
                for c in cabs]
        r550 = [forward_spectrum(RtmParams(c, 0.02, 0.008, 3, 45, 0.5), g).values[i550]
                for c in cabs]
        assert np.all(np.diff(r670) < 0)
        assert np.all(np.diff(r550) < 0)
        # the green peak stays above the absorption well throughout
        assert all(a > b for a, b in zip(r550, r670))

    def test_fveg_monotonicity(self):
        def fveg(lai, ala):
            k = 0.3 + 0.5 * np.cos(np.radians(ala))
            return 1 - np.exp(-k * lai)
        lais = np.linspace(0.1, 7, 20)
        assert np.all(np.diff([fveg(l, 45) for l in lais]) > 0)
        alas = np.linspace(20, 70, 20)
        assert np.all(np.diff([fveg(3, a) for a in alas]) < 0)

    def test_batch_matches_scalar(self):
        batch = synthrtm.forward_batch(MID.as_array()[None, :], BandGrid())
        assert np.allclose(batch[0], forward_spectrum(MID).values, atol=1e-12)


class TestGenParamMaps:
    def test_constant_lattice_gives_constant_field(self):
        stub = lambda seed, p: np.full((8, 8), 0.25)
        pmap = gen_param_maps(0, 5, 7, lattice_fn=stub)
        for p, (lo, hi) in enumerate(pmap.ranges):
            assert np.allclose(pmap.values[:, :, p], lo + (hi - lo) * 0.25,
                               atol=1e-6)

    def test_deterministic(self):
        a = gen_param_maps(11, 6, 6)
        b = gen_param_maps(11, 6, 6)
        assert np.array_equal(a.values, b.values)

    def test_lattice_nodes_exact_at_8x8(self):
        pmap = gen_param_maps(5, 8, 8)
        lattice = synthrtm._noise_lattice(5, 0)
        lo, hi = pmap.ranges[0]
        expected = lo + (hi - lo) * lattice
        assert np.allclose(pmap.values[:, :, 0], expected, atol=1e-5)

    def test_bilinear_matches_brute_force(self):
        lattice = synthrtm._noise_lattice(3, 2)
        field = synthrtm._bilinear_upsample(lattice, 13, 9)
        for i in [0, 4, 12]:
            for j in [0, 3, 8]:
                yi = i * 7.0 / 12.0
                xi = j * 7.0 / 8.0
                assert field[i, j] == pytest.approx(
                    brute_force_bilinear(lattice, yi, xi), abs=1e-12)

    def test_values_in_range(self):
        pmap = gen_param_maps(9, 16, 16)
        for p, (lo, hi) in enumerate(pmap.ranges):
            assert pmap.values[:, :, p].min() >= lo - 1e-5
            assert pmap.values[:, :, p].max() <= hi + 1e-5


class TestGenDataset:
    def test_single_pixel(self):
        pairs = gen_dataset(1, 1, 1, 211, seed=4)
        pmap, cube = pairs[0]
        s = forward_spectrum(RtmParams(*pmap.values[0, 0].astype(float)))
        assert np.allclose(cube.values[0, 0], s.values, atol=1e-6)

    def test_default_shape(self):
        pairs = gen_dataset(1, 64, 64, 211, seed=0)
        assert pairs[0][1].values.shape == (64, 64, 211)

    def test_values_in_unit_interval(self):
        pairs = gen_dataset(2, 8, 8, 50, seed=1)
        for _, cube in pairs:
            assert cube.values.min() >= 0.0 and cube.values.max() <= 1.0

    def test_pure_function_of_config(self):
        a = gen_dataset(2, 4, 4, 10, seed=5)
        b = gen_dataset(2, 4, 4, 10, seed=5)
        for (ma, ca), (mb, cb) in zip(a, b):
            assert np.array_equal(ca.values, cb.values)
            assert np.array_equal(ma.values, mb.values)


class TestBuildLut:
    def test_cab_only_grid(self):
        grid = {"cab": [float(v) for v in range(10, 81)],
                "cw": [0.02], "cm": [0.008], "lai": [3.0],
                "ala": [45.0], "psoil": [0.5]}
        lut = build_lut(grid, BandGrid(24))
        assert len(lut.rows) == 71
        assert [r[0].cab for r in lut.rows] == sorted(r[0].cab for r in lut.rows)

    def test_singleton_grid(self):
        grid = {k: [v[0]] for k, v in
                {"cab": [40.0], "cw": [0.02], "cm": [0.008],
                 "lai": [3.0], "ala": [45.0], "psoil": [0.5]}.items()}
        lut = build_lut(grid, BandGrid(24))
        assert len(lut.rows) == 1

    def test_lexicographic_order(self):
        grid = {"cab": [20.0, 60.0], "cw": [0.02], "cm": [0.008],
                "lai": [1.0, 5.0], "ala": [45.0], "psoil": [0.5]}
        lut = build_lut(grid, BandGrid(12))
        combos = [(r[0].cab, r[0].lai) for r in lut.rows]
        assert combos == [(20.0, 1.0), (20.0, 5.0), (60.0, 1.0), (60.0, 5.0)]

    def test_empty_dimension_rejected(self):
        grid = {"cab": [], "cw": [0.02], "cm": [0.008],
                "lai": [3.0], "ala": [45.0], "psoil": [0.5]}
        with pytest.raises(ValueError, match="empty"):
            build_lut(grid, BandGrid(12))

    def test_rows_match_forward_model(self):
        grid = {"cab": [30.0, 50.0], "cw": [0.02], "cm": [0.008],
                "lai": [3.0], "ala": [45.0], "psoil": [0.5]}
        lut = build_lut(grid, BandGrid(40))
        for p, s in lut.rows:
            assert np.allclose(s.values, forward_spectrum(p, BandGrid(40)).values,
                               atol=1e-12)
