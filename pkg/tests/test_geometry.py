import cmath
import math

import numpy as np
import pytest

from hkforge.geometry import (VarpiSampler, fit_point, laurent_fit,
                              metric_from_triple, metric_zetas,
                              triple_wedge_check, varpi_at, wedge4)
from hkforge.semiflat import (ModelPoint, dlog_xsf_matrix, omega3_sf,
                              omega_plus_sf, varpi_sf)
from hkforge.solver import solve


@pytest.fixture(scope="module")
def sf_sampler(pentagon, pentagon_point):
    return VarpiSampler(pentagon, pentagon_point, semiflat_only=True)


@pytest.fixture(scope="module")
def sf_fit(pentagon, pentagon_point, pentagon_solution, sf_sampler):
    zetas = metric_zetas(pentagon_solution, 12)
    samples = [sf_sampler.varpi(z) for z in zetas]
    return zetas, samples, laurent_fit(zetas, samples)


class TestVarpiPipeline:
    def test_semiflat_matches_closed_form(self, pentagon, pentagon_point,
                                          sf_fit):
        zetas, samples, _ = sf_fit
        for z, m in zip(zetas, samples):
            want = varpi_sf(pentagon, pentagon_point, z)
            assert np.max(np.abs(m - want)) < 1e-7

    def test_antisymmetry_exact(self, sf_fit):
        _, samples, _ = sf_fit
        for m in samples:
            assert np.array_equal(m, -m.T)

    def test_continuity_across_rays(self, pentagon, pentagon_point,
                                    pentagon_solution):
        sampler = VarpiSampler(pentagon, pentagon_point, tol_iter=1e-12)
        for grid in pentagon_solution.grids[:2]:
            z0 = grid.ray.direction
            plus = sampler.varpi(z0, side=+1)
            minus = sampler.varpi(z0, side=-1)
            assert np.max(np.abs(plus - minus)) < 1e-7

    def test_derivative_step_halving_order_two(self, pentagon,
                                               pentagon_point):
        # finite differences of log X^sf against the analytic derivative:
        # halving the step must cut the defect by about four
        zeta = cmath.exp(0.41j)
        truth = dlog_xsf_matrix(pentagon, pentagon_point, zeta)
        basis = pentagon.lattice.basis()
        defects = []
        for h in (2e-4, 1e-4):
            a = np.zeros((2, 4), dtype=complex)
            from hkforge.solver import _log_xsf_on_nodes
            steps = [h, h, h, h]
            for mu, disp in enumerate((h, 1j * h)):
                for i, g in enumerate(basis):
                    lp = _log_xsf_on_nodes(
                        pentagon, pentagon_point.shifted(du=disp), g,
                        np.array([zeta]))[0]
                    lm = _log_xsf_on_nodes(
                        pentagon, pentagon_point.shifted(du=-disp), g,
                        np.array([zeta]))[0]
                    a[i, mu] = (lp - lm) / (2 * h)
            defects.append(np.max(np.abs(a[:, :2] - truth[:, :2])))
        order = math.log2(defects[0] / defects[1])
        assert order == pytest.approx(2.0, abs=0.35)


class TestLaurentFit:
    def test_recovers_closed_forms(self, pentagon, pentagon_point, sf_fit):
        _, _, fit = sf_fit
        assert np.max(np.abs(fit.omega_plus
                             - omega_plus_sf(pentagon, pentagon_point))) < 1e-7
        assert np.max(np.abs(fit.omega_3
                             - omega3_sf(pentagon, pentagon_point))) < 1e-7

    def test_reality_defects(self, sf_fit):
        _, _, fit = sf_fit
        assert fit.omega3_imag < 1e-8
        assert fit.conj_defect < 1e-8
        assert fit.residual < 1e-8

    def test_rejects_double_pole(self, sf_fit):
        zetas, samples, _ = sf_fit
        bump = np.zeros((4, 4))
        bump[0, 1], bump[1, 0] = 1e-4, -1e-4
        spiked = [m + bump / z ** 2 for m, z in zip(samples, zetas)]
        with pytest.raises(ValueError, match="higher Laurent"):
            laurent_fit(zetas, spiked)

    def test_needs_five_samples(self, sf_fit):
        zetas, samples, _ = sf_fit
        with pytest.raises(ValueError):
            laurent_fit(zetas[:4], samples[:4])


class TestMetric:
    def test_two_routes_agree_on_semiflat(self, pentagon, pentagon_point,
                                          sf_fit):
        _, _, fit = sf_fit
        via_fit = metric_from_triple(fit.omega_plus, fit.omega_3)
        via_closed = metric_from_triple(
            omega_plus_sf(pentagon, pentagon_point),
            omega3_sf(pentagon, pentagon_point))
        assert np.max(np.abs(via_fit.g - via_closed.g)) < 1e-6
        assert via_fit.positive_definite

    def test_complex_structure_squares_to_minus_one(self, sf_fit):
        _, _, fit = sf_fit
        ms = metric_from_triple(fit.omega_plus, fit.omega_3)
        assert ms.j_squared_defect < 1e-8
        assert np.max(np.abs(ms.J.T @ ms.g @ ms.J - ms.g)) < 1e-8

    def test_triple_wedge_algebra(self, sf_fit):
        _, _, fit = sf_fit
        check = triple_wedge_check(fit.omega_plus, fit.omega_3)
        assert check.equal_squares_defect < 1e-8
        assert check.mixed_defect < 1e-8
        assert check.volume != 0.0

    def test_wedge4_is_symmetric_pairing(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 4))
        a = a - a.T
        b = rng.normal(size=(4, 4))
        b = b - b.T
        assert wedge4(a, b) == pytest.approx(wedge4(b, a))

    def test_corrected_ov_decay(self, ov):
        # corrections to the metric fall like exp(-2 pi R |u|)
        diffs = []
        for R in (1.5, 2.5):
            pt = ModelPoint(0.55, R, (0.9, 2.1))
            _, corrected, _ = fit_point(ov, pt)
            _, flat, _ = fit_point(ov, pt, semiflat_only=True)
            assert corrected.positive_definite
            diffs.append(np.max(np.abs(corrected.g - flat.g)))
        ratio = diffs[1] / diffs[0]
        want = math.exp(-2 * math.pi * 0.55)
        assert math.log(ratio) == pytest.approx(math.log(want), rel=0.25)

    def test_corrected_pentagon_point(self, pentagon):
        pt = ModelPoint(1.5 + 0.2j, 2.0, (0.37, 1.29))
        fit, metric, algebra = fit_point(pentagon, pt)
        assert fit.residual < 1e-7
        # conj_defect ties the zeta and 1/zeta coefficients together, which
        # is the reality of the corrected two-form family
        assert fit.conj_defect < 1e-8
        assert fit.omega3_imag < 1e-8
        assert metric.positive_definite
        assert algebra.equal_squares_defect < 1e-6
        assert algebra.mixed_defect < 1e-6

    def test_varpi_at_single_shot(self, pentagon, pentagon_point):
        m = varpi_at(pentagon, pentagon_point, cmath.exp(0.41j),
                     semiflat_only=True)
        want = varpi_sf(pentagon, pentagon_point, cmath.exp(0.41j))
        assert np.max(np.abs(m - want)) < 1e-7
