import json
import math

import numpy as np
import pytest

from wvlab.coupling import CouplingConfig, Generator, evolve_joint, postselect
from wvlab.errors import StepTooLarge, ZeroVariance
from wvlab.infometrics import (
    FisherMethod,
    InfoBudget,
    ParamDistribution,
    binary_selection_distribution,
    classical_fisher,
    info_budget,
    qfi_joint,
    qfi_mixed,
    qfi_postselected,
    qfi_pure,
    scaling_bounds,
    selection_fisher,
    snr,
    tmsv_phase_variance,
)
from wvlab.meter import FockMeter, GaussianMeter, to_grid
from wvlab.qsys import (
    PROJ_ONE,
    SIGMA_Z,
    SystemState,
    bloch_state,
    optimal_postselection,
)


def gaussian_location_family(sigma=1.0, span=10.0, points=4001):
    grid = np.linspace(-span, span, points)

    def density(g):
        return np.exp(-((grid - g) ** 2) / (2 * sigma**2)) / math.sqrt(
            2 * np.pi * sigma**2
        )

    return ParamDistribution("continuous", density, grid=grid)


class TestClassicalFisher:
    def test_gaussian_location(self):
        rep = classical_fisher(gaussian_location_family(), 0.1)
        assert rep.fi == pytest.approx(1.0, rel=1e-8)
        assert rep.method is FisherMethod.CENTRAL_DIFFERENCE

    def test_parameter_independent_binary_is_zero(self):
        dist = ParamDistribution("discrete", lambda g: np.array([0.3, 0.7]))
        assert classical_fisher(dist, 0.5).fi == 0.0

    def test_binary_selection_statistics(self):
        # a selection probability [1 - cos(kg + eps)]/2 carries F_p -> k^2 at
        # g -> 0 for any small eps. The photon-number coupling produces
        # k = N (see the phase-space scheme tests for the exact pipeline,
        # where F_p ~ N^2); the doubled-phase variant k = 2N would give 4N^2.
        n, eps = 300.0, 0.05
        for k in (n, 2 * n):
            dist = binary_selection_distribution(
                lambda g, kk=k: (1 - math.cos(kk * g + eps)) / 2
            )
            fi = classical_fisher(dist, 0.0, h=1e-9).fi
            assert fi == pytest.approx(k**2, rel=1e-3)

    def test_analytic_derivative_path(self):
        grid = np.linspace(-10, 10, 2001)

        def density(g):
            return np.exp(-((grid - g) ** 2) / 2) / math.sqrt(2 * np.pi)

        def deriv(g):
            return (grid - g) * density(g)

        dist = ParamDistribution("continuous", density, grid=grid, derivative=deriv)
        rep = classical_fisher(dist, 0.0)
        assert rep.method is FisherMethod.ANALYTIC and rep.step == 0.0
        assert rep.fi == pytest.approx(1.0, rel=1e-9)

    def test_step_too_large(self):
        def evaluator(g):
            if g < 0:
                raise ValueError("domain")
            return np.array([g, 1 - g])

        dist = ParamDistribution("discrete", evaluator)
        with pytest.raises(StepTooLarge):
            classical_fisher(dist, 0.3, h=0.5)

    def test_additivity_on_product(self):
        # FI of a two-fold product distribution doubles the single-copy FI
        def single(g):
            return np.array([0.2 + g, 0.8 - g])

        def product(g):
            p = single(g)
            return np.outer(p, p).ravel()

        f1 = classical_fisher(ParamDistribution("discrete", single), 0.1).fi
        f2 = classical_fisher(ParamDistribution("discrete", product), 0.1).fi
        assert f2 == pytest.approx(2 * f1, abs=1e-9)


class TestQfiPure:
    def test_displaced_gaussian(self):
        base = to_grid(GaussianMeter(1.0), 16.0, 2048)
        cfg = CouplingConfig(0.0, Generator.MOMENTUM_KICK, SIGMA_Z)

        def family(g):
            joint = evolve_joint(SystemState(np.array([1.0, 0.0])), base,
                                 CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z))
            return joint.branches[-1].meter if joint.branches[-1].eigenvalue > 0 else joint.branches[0].meter

        assert qfi_pure(family, 0.05) == pytest.approx(1.0, rel=1e-6)

    def test_two_level_generator_spread(self):
        # generator eigenvalues +-1 on the balanced superposition: QFI = 4
        def family(g):
            return np.array([np.exp(-1j * g), np.exp(1j * g)]) / math.sqrt(2)

        assert qfi_pure(family, 0.3) == pytest.approx(4.0, rel=1e-8)

    def test_qubit_meter_phase_scheme(self):
        # joint state of the qubit-meter scheme: QFI about phi equals 4
        plus = np.array([1.0, 1.0]) / math.sqrt(2)

        def family(phi):
            branches = [
                np.kron([1.0, 0.0], np.exp(-1j * phi * np.array([1, -1])) * plus),
                np.kron([0.0, 1.0], np.exp(+1j * phi * np.array([1, -1])) * plus),
            ]
            return (branches[0] + branches[1]) / math.sqrt(2)

        assert qfi_pure(family, 0.1) == pytest.approx(4.0, rel=1e-7)


class TestQfiMixed:
    @staticmethod
    def _rho(state_fn):
        def rho(g):
            v = state_fn(g)
            return np.outer(v, v.conj())

        return rho

    def test_pure_state_consistency(self):
        fam = lambda g: bloch_state(0.8 + g, 0.5).amplitudes
        qm = qfi_mixed(self._rho(fam), 0.2)
        qp = qfi_pure(lambda g: bloch_state(0.8 + g, 0.5), 0.2)
        assert qm == pytest.approx(qp, abs=1e-8)

    def test_convexity(self):
        fam_a = lambda g: bloch_state(0.9 + g, 0.4).amplitudes
        fam_b = lambda g: bloch_state(2.0 + 0.5 * g, 1.0).amplitudes

        def mix(g):
            a, b = fam_a(g), fam_b(g)
            return 0.6 * np.outer(a, a.conj()) + 0.4 * np.outer(b, b.conj())

        q_mix = qfi_mixed(mix, 0.0)
        bound = 0.6 * qfi_pure(lambda g: SystemState(fam_a(g)), 0.0) + 0.4 * qfi_pure(
            lambda g: SystemState(fam_b(g)), 0.0
        )
        assert q_mix <= bound + 1e-9

    def test_additivity(self):
        fam = self._rho(lambda g: bloch_state(0.9 + g, 0.4).amplitudes)

        def prod(g):
            r = fam(g)
            return np.kron(r, r)

        assert qfi_mixed(prod, 0.0) == pytest.approx(2 * qfi_mixed(fam, 0.0), rel=1e-6)


class TestQfiJoint:
    def test_gaussian_balanced(self):
        pre = bloch_state(np.pi / 2, 0.0)
        cfg = CouplingConfig(0.1, Generator.MOMENTUM_KICK, SIGMA_Z)
        for sigma in (0.5, 1.0, 2.0):
            assert qfi_joint(pre, GaussianMeter(sigma), cfg) == pytest.approx(
                1 / sigma**2, rel=1e-12
            )

    def test_phase_space_coherent(self):
        pre = bloch_state(np.pi / 2, 0.0)
        cfg = CouplingConfig(0.01, Generator.PHOTON_NUMBER_PHASE, PROJ_ONE)
        nbar = 9.0
        q = qfi_joint(pre, FockMeter.coherent(3.0), cfg)
        assert q == pytest.approx(2 * nbar + nbar**2, rel=1e-7)

    def test_eigenstate_drops_variance_term(self):
        pre = SystemState(np.array([1.0, 0.0]))
        cfg = CouplingConfig(0.1, Generator.MOMENTUM_KICK, SIGMA_Z)
        meter = GaussianMeter(1.0)  # <P> = 0
        assert qfi_joint(pre, meter, cfg) == pytest.approx(4 * meter.var_p(), rel=1e-12)


class TestQfiPostselected:
    def test_matches_conditioned_family_oracle(self):
        pre, post = bloch_state(0.7, 0.3), bloch_state(2.2, -0.5)
        sigma, g = 1.0, 0.08
        cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
        p_f, q_f = qfi_postselected(pre, post, cfg, GaussianMeter(sigma))
        base = to_grid(GaussianMeter(sigma), 18.0, 4096)

        def family(gp):
            joint = evolve_joint(pre, base, CouplingConfig(gp, cfg.generator, cfg.a))
            return postselect(joint, post).success_meter

        assert q_f == pytest.approx(qfi_pure(family, g), rel=1e-8)

    def test_optimal_selection_concentrates(self):
        # AAV regime: p_f Q_f catches ~ all of Q_jt at g/(2 sigma) = 0.05
        sigma = 1.0
        g = 0.1 * sigma
        pre = bloch_state(0.9, 0.0)
        post = optimal_postselection(pre, SIGMA_Z)
        cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
        p_f, q_f = qfi_postselected(pre, post, cfg, GaussianMeter(sigma))
        assert p_f * q_f / qfi_joint(pre, GaussianMeter(sigma), cfg) > 0.99

    def test_deep_regime_selection_share_vs_coupling(self):
        # the selection-statistics share at the orthogonal optimal selection
        # is exactly 2u/(e^{2u} - 1) with u = g^2/(2 sigma^2): it clears 0.99
        # for g/(2 sigma) <= 0.0707 but only reaches 0.9801 at g/(2 sigma)=0.1
        sigma = 1.0
        pre = bloch_state(np.pi / 2, 0.0)
        post = optimal_postselection(pre, SIGMA_Z)
        meter = GaussianMeter(sigma)
        for g_over_2s, expect_pass in ((0.05, True), (0.1, False)):
            g = 2 * sigma * g_over_2s
            cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
            budget = info_budget(pre, post, cfg, meter)
            ratio = budget.f_p / budget.q_jt
            u = g**2 / (2 * sigma**2)
            assert ratio == pytest.approx(2 * u / (math.expm1(2 * u)), rel=1e-6)
            assert (ratio >= 0.99) is expect_pass

    def test_deep_inverse_regime_moves_info_to_selection(self):
        sigma, g = 1.0, 0.2
        pre = bloch_state(np.pi / 2, 0.0)
        post = optimal_postselection(pre, SIGMA_Z)  # orthogonal here
        cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
        meter = GaussianMeter(sigma)
        p_f, q_f = qfi_postselected(pre, post, cfg, meter)
        f_p = selection_fisher(pre, post, cfg, meter)
        q_jt = qfi_joint(pre, meter, cfg)
        assert p_f * q_f / q_jt < 0.01
        assert f_p / q_jt > 0.95

    def test_zero_coupling_weak_value_form(self):
        # at g = 0 the conditioned-family QFI is 4 Var(P) |<f|A|i>/<f|i>|^2
        pre, post = bloch_state(0.6, 0.0), bloch_state(1.9, 0.0)
        sigma = 1.3
        cfg = CouplingConfig(0.0, Generator.MOMENTUM_KICK, SIGMA_Z)
        from wvlab.qsys import weak_value

        w = weak_value(pre, post, SIGMA_Z)
        _, q_f = qfi_postselected(pre, post, cfg, GaussianMeter(sigma))
        assert q_f == pytest.approx(4 * (1 / (4 * sigma**2)) * abs(w) ** 2, rel=1e-10)


class TestInfoBudget:
    def test_identity_random_qubits(self):
        rng = np.random.default_rng(100)
        sigma = 1.0
        for _ in range(100):
            pre = bloch_state(rng.uniform(0.1, 3.0), rng.uniform(0, 2 * np.pi))
            post = bloch_state(rng.uniform(0.1, 3.0), rng.uniform(0, 2 * np.pi))
            g = rng.uniform(0.01, 0.4)
            cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
            budget = info_budget(pre, post, cfg, GaussianMeter(sigma))
            assert budget.residual < 1e-9

    @pytest.mark.parametrize("nbar", [1.0, 10.0, 100.0])
    def test_identity_phase_space(self, nbar):
        pre = bloch_state(np.pi / 2, 0.0)
        post = SystemState(np.array([-np.exp(-0.1j), 1.0]) / math.sqrt(2))
        cfg = CouplingConfig(1e-3, Generator.PHOTON_NUMBER_PHASE, PROJ_ONE)
        budget = info_budget(pre, post, cfg, FockMeter.coherent(math.sqrt(nbar)))
        assert budget.residual < 1e-6
        assert budget.q_jt == pytest.approx(2 * nbar + nbar**2, rel=1e-7)

    def test_optimal_readouts_saturate_conditioned_qfi(self):
        # minimum-uncertainty meter: the real scheme's q readout and the
        # imaginary scheme's p readout each capture the full conditioned QFI,
        # and both maximal values equal Q_WVA ~ Q_jt = 1/sigma^2
        sigma, g = 1.0, 1e-3
        cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
        base = to_grid(GaussianMeter(sigma), 16.0, 4096)

        def readout_fisher(pre, post, momentum):
            def density(gp):
                joint = evolve_joint(
                    pre, base, CouplingConfig(gp, cfg.generator, cfg.a)
                )
                cm = postselect(joint, post).success_meter
                cm = cm.momentum() if momentum else cm
                return cm.density().density

            grid = base.momentum().q_grid if momentum else base.q_grid
            return classical_fisher(
                ParamDistribution("continuous", density, grid=grid), g
            ).fi

        pre = bloch_state(0.8, 0.0)
        post = optimal_postselection(pre, SIGMA_Z)
        p_f, q_f = qfi_postselected(pre, post, cfg, GaussianMeter(sigma))
        f_q = readout_fisher(pre, post, momentum=False)
        assert p_f * f_q == pytest.approx(p_f * q_f, rel=1e-4)

        pre_i = bloch_state(np.pi / 2, 0.0)
        post_i = bloch_state(-np.pi / 2, 0.05)  # imaginary weak value -2i/phi
        p_fi, q_fi = qfi_postselected(pre_i, post_i, cfg, GaussianMeter(sigma))
        f_p = readout_fisher(pre_i, post_i, momentum=True)
        assert p_fi * f_p == pytest.approx(p_fi * q_fi, rel=1e-4)
        # the two maximal-FI values coincide through Var(Q) Var(P) = 1/4
        assert p_f * f_q == pytest.approx(1 / sigma**2, rel=2e-3)
        assert p_fi * f_p == pytest.approx(1 / sigma**2, rel=2e-3)

    def test_budget_type_validates_identity(self):
        with pytest.raises(ValueError):
            InfoBudget(q_jt=1.0, p_f_q_f=0.5, p_r_q_r=0.1, f_p=0.1)

    def test_data_processing_bound(self):
        # measured-distribution FI never exceeds the joint QFI
        sigma, g = 1.0, 0.05
        pre = bloch_state(1.1, 0.4)
        post = bloch_state(2.3, -0.2)
        cfg = CouplingConfig(g, Generator.MOMENTUM_KICK, SIGMA_Z)
        q_jt = qfi_joint(pre, GaussianMeter(sigma), cfg)
        base = to_grid(GaussianMeter(sigma), 16.0, 4096)

        def density(gp):
            joint = evolve_joint(pre, base, CouplingConfig(gp, cfg.generator, cfg.a))
            ps = postselect(joint, post)
            return ps.p_f * ps.success_meter.density().density + (
                1 - ps.p_f
            ) * ps.failure_meter.density().density

        fam = ParamDistribution("continuous", density, grid=base.q_grid)
        assert classical_fisher(fam, g).fi <= q_jt * (1 + 1e-4)


class TestSnr:
    def test_gaussian_matches_sqrt_fisher(self):
        fam = gaussian_location_family(sigma=0.8)
        g, nu = 0.3, 50
        val = snr(fam, g, nu, x0=0.0)
        fi = classical_fisher(fam, g).fi
        assert val == pytest.approx(math.sqrt(nu) * g / 0.8, rel=1e-9)
        assert val == pytest.approx(g * math.sqrt(nu * fi), rel=1e-6)

    def test_zero_parameter(self):
        fam = gaussian_location_family()
        assert snr(fam, 0.0, 10, x0=0.0) == pytest.approx(0.0, abs=1e-12)

    def test_zero_variance_raises(self):
        dist = ParamDistribution(
            "discrete", lambda g: np.array([1.0, 0.0]), labels=np.array([0.0, 1.0])
        )
        with pytest.raises(ZeroVariance):
            snr(dist, 0.1, 5, x0=0.0)

    def test_bimodal_amr_suboptimal(self):
        # orthogonal-WVA-like bimodal distribution: SNR <= g sqrt(nu F)
        grid = np.linspace(-12, 12, 4001)

        def density(g):
            d = (grid - g) * np.exp(-((grid - g) ** 2) / 2)
            d = d**2
            return d / (np.sum(d) * (grid[1] - grid[0]))

        fam = ParamDistribution("continuous", density, grid=grid)
        g, nu = 0.2, 30
        fi = classical_fisher(fam, g).fi
        assert snr(fam, g, nu, x0=0.0) <= g * math.sqrt(nu * fi) * (1 + 1e-6)


class TestSerialization:
    def test_fisher_report_json_keys(self):
        rep = classical_fisher(gaussian_location_family(), 0.1)
        payload = json.loads(rep.to_json())
        assert set(payload) == {"fi", "method", "step"}

    def test_info_budget_json_keys(self):
        budget = InfoBudget(q_jt=1.0, p_f_q_f=0.6, p_r_q_r=0.3, f_p=0.1)
        payload = json.loads(budget.to_json())
        assert set(payload) == {"q_jt", "pf_qf", "pr_qr", "f_p"}
        assert payload["q_jt"] == 1.0


class TestScalingBounds:
    def test_single_probe(self):
        assert scaling_bounds(1, -1.0, 1.0) == (4.0, 4.0)

    def test_hundred_probes_spread_two(self):
        assert scaling_bounds(100, -1.0, 1.0) == (400.0, 40000.0)

    def test_tmsv_variance(self):
        assert tmsv_phase_variance(2.0) == pytest.approx(1 / 48)
