import math

import numpy as np
import pytest

from wvlab.errors import ResolutionTooCoarse, UnsupportedCombination
from wvlab.meter import SampledDistribution
from wvlab.noise import (
    AmrRegime,
    BeamGeometry,
    CorrelatedNoiseModel,
    JitterCase,
    PixelatedDetector,
    SaturatingDetector,
    amr_information,
    amr_variance_exact,
    cm_fisher_correlated,
    covariance,
    covariance_to_csv,
    jitter_fisher,
    load_response_csv,
    pixelate,
    pixelated_fisher_ratio,
    pixelation_info_ratio,
    readout_distribution,
    saturated_fisher,
    saturating_response,
)
from wvlab.qsys import SIGMA_Z, bloch_state, optimal_postselection


class TestCovariance:
    def test_white_limit_diagonal(self):
        m = CorrelatedNoiseModel(a=0.7, c=0.3, dt=1.0, tau_c=1e-3, n=50)
        mat = covariance(m)
        assert np.allclose(mat, np.diag(np.full(50, 1.0)))

    def test_slow_limit_constant_plus_floor(self):
        m = CorrelatedNoiseModel(a=0.5, c=0.4, dt=1.0, tau_c=1e9, n=30)
        mat = covariance(m)
        expected = 0.4 * np.ones((30, 30)) + 0.5 * np.eye(30)
        assert np.max(np.abs(mat - expected)) < 1e-7

    def test_no_correlation(self):
        m = CorrelatedNoiseModel(a=0.8, c=0.0, dt=1.0, tau_c=1.0, n=20)
        assert np.allclose(covariance(m), 0.8 * np.eye(20))

    def test_covariance_csv(self, tmp_path):
        model = CorrelatedNoiseModel(a=1.0, c=0.5, dt=1.0, tau_c=3.0, n=12)
        path = tmp_path / "cov.csv"
        covariance_to_csv(model, path)
        mat = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(mat, covariance(model))

    def test_symmetric_positive_definite(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = CorrelatedNoiseModel(
                a=rng.uniform(0.1, 2),
                c=rng.uniform(0, 2),
                dt=1.0,
                tau_c=rng.uniform(0.01, 100),
                n=rng.integers(2, 200),
            )
            mat = covariance(m)
            assert np.max(np.abs(mat - mat.T)) < 1e-12
            assert np.linalg.eigvalsh(mat).min() > 0


class TestCmFisher:
    def test_white_limit(self):
        m = CorrelatedNoiseModel(a=0.7, c=0.3, dt=1.0, tau_c=1e-3, n=1000)
        assert cm_fisher_correlated(m) == pytest.approx(1000 / 1.0, rel=1e-12)

    def test_single_measurement(self):
        m = CorrelatedNoiseModel(a=0.4, c=0.6, dt=1.0, tau_c=5.0, n=1)
        assert cm_fisher_correlated(m) == pytest.approx(1.0, rel=1e-12)

    def test_slow_limit_reaches_white_floor(self):
        # the Table's slow-limit value N/a requires the correlated power
        # (~ 2 c tau/dt) to stay below the white floor; c = 2e-5 does it
        m = CorrelatedNoiseModel(a=1.0, c=2e-5, dt=1.0, tau_c=1e3, n=1000)
        assert cm_fisher_correlated(m) == pytest.approx(1000.0, rel=0.02)

    def test_diagonal_case_exact(self):
        m = CorrelatedNoiseModel(a=0.5, c=0.0, dt=1.0, tau_c=1.0, n=64)
        assert cm_fisher_correlated(m) == pytest.approx(64 / 0.5, rel=1e-12)


class TestAmrInformation:
    def test_cm_white(self):
        m = CorrelatedNoiseModel(a=1.0, c=1.0, dt=1.0, tau_c=0.5, n=100)
        info = amr_information(m, "cm")
        assert info.regime is AmrRegime.WHITE
        assert info.value == pytest.approx(100 / 2.0)

    def test_cm_slow_saturates(self):
        for n in (10**3, 10**4, 10**5):
            m = CorrelatedNoiseModel(a=1.0, c=1.0, dt=1.0, tau_c=1e9, n=n)
            info = amr_information(m, "cm")
            assert info.regime is AmrRegime.SLOW_CM
            assert info.value == pytest.approx(n / (1 + n), rel=1e-12)
        assert info.value == pytest.approx(1.0, rel=1e-4)  # saturation at 1/c

    def test_wva_regimes(self):
        p_f = 0.01
        w = 10.0
        slow = CorrelatedNoiseModel(a=1.0, c=1.0, dt=1.0, tau_c=1e4, n=1000)
        info2 = amr_information(slow, "wva", p_f=p_f, weak_value=w)
        assert info2.regime is AmrRegime.SLOW_WVA_CORRELATED
        kept = p_f * 1000
        assert info2.value == pytest.approx(w**2 * kept / (1 + kept))
        thin = CorrelatedNoiseModel(a=1.0, c=1.0, dt=1.0, tau_c=200.0, n=1000)
        info1 = amr_information(thin, "wva", p_f=0.001, weak_value=math.sqrt(1000))
        assert info1.regime is AmrRegime.SLOW_WVA_UNCORRELATED
        assert info1.value == pytest.approx(1000 / 2.0)

    def test_tradeoff_enforced(self):
        m = CorrelatedNoiseModel(a=1.0, c=1.0, dt=1.0, tau_c=10.0, n=100)
        with pytest.raises(ValueError):
            amr_information(m, "wva", p_f=0.1, weak_value=10.0)

    def test_amr_never_beats_mle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = CorrelatedNoiseModel(
                a=rng.uniform(0.2, 2),
                c=rng.uniform(0.0, 2),
                dt=1.0,
                tau_c=rng.uniform(1e-3, 1e5),
                n=int(rng.integers(2, 300)),
            )
            info = amr_information(m, "cm")
            assert info.value <= cm_fisher_correlated(m) + 1e-9

    def test_exact_variance_matches_white(self):
        m = CorrelatedNoiseModel(a=1.0, c=0.5, dt=1.0, tau_c=1e-4, n=256)
        assert 1 / amr_variance_exact(m) == pytest.approx(256 / 1.5, rel=1e-10)


GEOM = BeamGeometry(k0=8e6, l1=0.2, l2=0.1, f=0.25, sigma=4e-4, n=1000)
# wide-beam variant: diffraction factor ~ 2e-4, negligible at zero noise
GEOM_WIDE = BeamGeometry(k0=8e6, l1=0.2, l2=0.1, f=0.25, sigma=1e-2, n=1000)


class TestJitterFisher:
    def test_noiseless_baseline(self):
        base = 4 * GEOM_WIDE.n * GEOM_WIDE.sigma**2
        for case, scheme in [
            (JitterCase.ANGULAR, "cm"),
            (JitterCase.ANGULAR, "imaginary_wva"),
            (JitterCase.DISPLACEMENT, "imaginary_wva"),
            (JitterCase.DETECTOR, "cm"),
            (JitterCase.DETECTOR, "imaginary_wva"),
        ]:
            assert jitter_fisher(case, GEOM_WIDE, 0.0, scheme) == pytest.approx(
                base, rel=1e-6
            )

    def test_angular_wva_beats_cm(self):
        b0 = 2e4  # strong angular jitter (1/length units)
        f_cm = jitter_fisher(JitterCase.ANGULAR, GEOM, b0, "cm")
        f_wva = jitter_fisher(JitterCase.ANGULAR, GEOM, b0, "imaginary_wva")
        assert f_wva > 10 * f_cm
        assert GEOM.diffraction_factor < 1.0

    def test_displacement_noise_helps_wva(self):
        f0 = jitter_fisher(JitterCase.DISPLACEMENT, GEOM, 0.0, "imaginary_wva")
        f1 = jitter_fisher(JitterCase.DISPLACEMENT, GEOM, 5e-4, "imaginary_wva")
        assert f1 > f0

    def test_detector_formulas(self):
        d0 = 3e-4
        f_cm = jitter_fisher(JitterCase.DETECTOR, GEOM, d0, "cm")
        expected = 4 * GEOM.n * GEOM.sigma**2 / (
            1 + (2 * GEOM.k0 * GEOM.sigma * d0 / GEOM.f) ** 2
        )
        assert f_cm == pytest.approx(expected, rel=1e-12)
        f_wva = jitter_fisher(JitterCase.DETECTOR, GEOM, d0, "imaginary_wva")
        assert f_wva == pytest.approx(
            4 * GEOM.n * GEOM.sigma**2 / (1 + d0**2 / GEOM.sigma**2), rel=1e-12
        )

    def test_unsupported_combination(self):
        with pytest.raises(UnsupportedCombination):
            jitter_fisher(JitterCase.DISPLACEMENT, GEOM, 1.0, "cm")


def gaussian_sampled(sigma=1.0, center=0.0, span=12.0, points=9601):
    grid = np.linspace(center - span, center + span, points)
    dens = np.exp(-((grid - center) ** 2) / (2 * sigma**2)) / math.sqrt(
        2 * math.pi * sigma**2
    )
    return SampledDistribution(grid, dens)


class TestPixelate:
    def test_mass_preserved(self):
        dist = gaussian_sampled()
        out = pixelate(dist, PixelatedDetector(r=0.3, h=0.1))
        assert out.probs.sum() == pytest.approx(1.0, abs=1e-10)

    def test_uniform_stays_uniform(self):
        grid = np.linspace(0.0, 1.0, 4001)
        dist = SampledDistribution(grid, np.ones_like(grid))
        out = pixelate(dist, PixelatedDetector(r=0.1, h=0.05))
        inner = out.probs[(out.probs > 1e-6)]
        inner = inner[1:-1]  # edge pixels only partially covered
        assert np.allclose(inner, inner[0], rtol=1e-9)

    def test_resolution_guard(self):
        dist = gaussian_sampled(points=101)
        with pytest.raises(ResolutionTooCoarse):
            pixelate(dist, PixelatedDetector(r=0.3))

    def test_fine_pixel_information_ratio(self):
        # R = r / sigma = 0.05: pixelation costs less than 1e-3 of the FI
        alpha = pixelation_info_ratio(1.0, PixelatedDetector(r=0.05, h=0.02))
        assert abs(alpha - 1.0) < 1e-3

    def test_split_detector_limit(self):
        # two bins with the boundary on the beam center: F = (2/pi)/sigma^2
        det = PixelatedDetector(r=1000.0, h=500.0)
        alpha = pixelation_info_ratio(1.0, det)
        assert alpha == pytest.approx(2 / math.pi, rel=1e-4)
        # about a third of the information is lost
        assert 1 - alpha == pytest.approx(1 / 3, rel=0.1)

    def test_data_processing(self):
        det = PixelatedDetector(r=0.8, h=0.3)
        alpha = pixelation_info_ratio(1.0, det)
        assert alpha <= 1.0 + 1e-6


class TestPixelatedRatio:
    def test_real_wva_bounded_by_one(self):
        pre = bloch_state(0.9, 0.0)
        post = optimal_postselection(pre, SIGMA_Z)
        det = PixelatedDetector(r=0.2, h=0.1)
        ratio = pixelated_fisher_ratio(
            "real_wva", 1e-4, 1.0, det, (pre, post, SIGMA_Z)
        )
        assert ratio <= 1.0 + 1e-6
        # optimal selection: Re<f|A|i>^2 = 1 = lambda_max^2, pixel terms cancel
        assert ratio == pytest.approx(1.0, rel=1e-6)

    def test_real_wva_suboptimal_selection(self):
        pre = bloch_state(0.9, 0.0)
        post = bloch_state(2.7, 0.0)
        det = PixelatedDetector(r=0.2, h=0.1)
        ratio = pixelated_fisher_ratio(
            "real_wva", 1e-4, 1.0, det, (pre, post, SIGMA_Z)
        )
        num = np.vdot(
            post.amplitudes, SIGMA_Z.matrix @ pre.amplitudes
        ).real ** 2
        assert ratio == pytest.approx(num, rel=1e-6)
        assert ratio < 1.0

    def test_imaginary_wva_fine_pixels_near_unity(self):
        pre = bloch_state(np.pi / 2, 0.0)
        post = bloch_state(-np.pi / 2, 0.1)
        det = PixelatedDetector(r=0.02, h=0.01)
        ratio = pixelated_fisher_ratio(
            "imaginary_wva", 1e-5, 1.0, det, (pre, post, SIGMA_Z)
        )
        assert ratio == pytest.approx(1.0, rel=5e-3)


class TestSaturatingDetector:
    def test_noiseless_point_mass(self):
        det = SaturatingDetector(k_s=100, readout_sigma=0.0)
        out = saturating_response(det, 42)
        assert out.probs[np.argmin(np.abs(out.labels - 42))] == 1.0

    def test_hard_clip(self):
        det = SaturatingDetector(k_s=100, readout_sigma=0.0)
        out = saturating_response(det, 250)
        assert out.probs[-1] == 1.0 and out.labels[-1] == 100.0

    def test_response_shape_mean_monotone_variance_collapse(self):
        det = SaturatingDetector(k_s=60, readout_sigma=2.0)
        means, variances = [], []
        for n_in in (10, 30, 50, 80, 120):
            out = saturating_response(det, n_in)
            mean = np.sum(out.labels * out.probs)
            var = np.sum((out.labels - mean) ** 2 * out.probs)
            means.append(mean)
            variances.append(var)
        assert np.all(np.diff(means) >= -1e-9)
        assert variances[-1] < 1e-6  # deep saturation pins the readout

    def test_readout_distribution_normalized(self):
        det = SaturatingDetector(k_s=80, eta=0.9, readout_sigma=1.5)
        pk = readout_distribution(det, 50.0)
        assert pk.sum() == pytest.approx(1.0, abs=1e-8)


class TestSaturatedFisher:
    @staticmethod
    def beam_profile(total, shift_rate, sigma=1.0, pixels=41, width=8.0):
        centers = np.linspace(-width / 2, width / 2, pixels)
        dx = centers[1] - centers[0]

        def nbar(g):
            return (
                total
                * dx
                * np.exp(-((centers - shift_rate * g) ** 2) / (2 * sigma**2))
                / math.sqrt(2 * math.pi * sigma**2)
            )

        return nbar

    def test_poisson_limit(self):
        det = SaturatingDetector(k_s=100000, readout_sigma=0.0)
        nbar = self.beam_profile(200.0, 1.0)
        res = saturated_fisher(nbar, det, 0.0)
        n0 = nbar(0.0)
        h = 1e-5
        dn = (nbar(h) - nbar(-h)) / (2 * h)
        ideal = np.sum(dn**2 / n0)
        assert res.total == pytest.approx(ideal, rel=1e-4)
        # Gamma -> 1 wherever the pixel actually responds to g (the exactly
        # centered pixel has zero derivative and reports Gamma = 0)
        responsive = np.abs(dn) > 1e-9
        assert np.all(np.abs(res.gammas[responsive] - 1.0) < 1e-3)

    def test_saturated_pixels_contribute_nothing(self):
        det = SaturatingDetector(k_s=5, readout_sigma=0.0)
        nbar = self.beam_profile(2000.0, 1.0)
        res = saturated_fisher(nbar, det, 0.0)
        hot = nbar(0.0) > 50
        assert np.all(res.gammas[hot] < 1e-3)

    def test_monotone_in_readout_noise_and_threshold(self):
        nbar = self.beam_profile(300.0, 1.0)
        totals_sigma = [
            saturated_fisher(nbar, SaturatingDetector(k_s=40, readout_sigma=s), 0.0).total
            for s in (0.0, 2.0, 6.0)
        ]
        assert totals_sigma[0] >= totals_sigma[1] >= totals_sigma[2]
        totals_ks = [
            saturated_fisher(nbar, SaturatingDetector(k_s=k, readout_sigma=1.0), 0.0).total
            for k in (10, 40, 160)
        ]
        assert totals_ks[0] <= totals_ks[1] <= totals_ks[2]

    def test_wva_advantage_under_saturation(self):
        # same input power; WVA keeps p_f N photons with an amplified shift
        det = SaturatingDetector(k_s=30, readout_sigma=0.0)
        n_total = 3000.0
        p_f, w = 0.01, 10.0  # trade-off p_f w^2 = 1
        f_cm = saturated_fisher(self.beam_profile(n_total, 1.0), det, 0.0).total
        f_wva = saturated_fisher(self.beam_profile(p_f * n_total, w), det, 0.0).total
        assert f_wva > 1.2 * f_cm

    def test_response_csv_roundtrip(self, tmp_path):
        det = SaturatingDetector(k_s=12, readout_sigma=1.0)
        rows = [saturating_response(det, n).probs for n in range(20)]
        path = tmp_path / "response.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(f"k{i}" for i in range(len(rows[0]))) + "\n")
            for r in rows:
                fh.write(",".join(format(x, ".17g") for x in r) + "\n")
        mat = load_response_csv(path)
        assert mat.shape == (20, len(rows[0]))
        assert np.allclose(mat, np.array(rows))

    def test_measured_response_matrix_reproduces_parametric(self):
        # feeding the tabulated parametric response back in changes nothing
        det = SaturatingDetector(k_s=15, readout_sigma=1.0)
        matrix = np.array([saturating_response(det, n).probs for n in range(60)])
        nbar = self.beam_profile(120.0, 1.0, pixels=15, width=6.0)
        direct = saturated_fisher(nbar, det, 0.0)
        loaded = saturated_fisher(nbar, det, 0.0, response=matrix)
        assert loaded.total == pytest.approx(direct.total, rel=1e-10)
