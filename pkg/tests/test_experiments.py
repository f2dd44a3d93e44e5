import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from oracles import tv_jittered_normal_riemann
from mihnm.dist import enumerate_mih_support, truncate_mih_support
from mihnm.experiments import (
    ExperimentFamily,
    JITTER,
    ROUND,
    apply_jitter,
    concentration_check,
    concentration_tail,
    deficiency_upper_bound_PQ,
    deficiency_upper_bound_QP,
    log_concentration_bound,
    log_concentration_tail,
    normal_family_spec,
    round_pushforward,
    tv_sqrt_jittered_vs_normal,
)
from mihnm.laws import DiscreteLaw, TailTooLargeError, point_mass
from mihnm.metrics import DegenerateCovarianceError, NormalSpec, tv_discrete
from mihnm.params import ModelParams, ParameterError, lattice_N_at_least


class TestKernels:
    def test_jitter_point_mass(self):
        j = apply_jitter(point_mass([0, 0]))
        x = np.array([[0.2, -0.4], [0.6, 0.0]])
        np.testing.assert_array_equal(j.density(x), [1.0, 0.0])

    def test_jitter_mass_and_values(self):
        j = apply_jitter(enumerate_mih_support(ModelParams(4, 1, "1/2")))
        np.testing.assert_allclose(j.density(np.array([[0.0], [1.0], [2.0]])), [1 / 2, 1 / 3, 1 / 6])
        assert j.total_mass() == 1.0
        val, _ = integrate.quad(lambda x: j.density(np.array([[x]]))[0], -1, 3, points=[-0.5, 0.5, 1.5, 2.5])
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_round_standard_normal(self):
        law = round_pushforward(NormalSpec([0.0], [[1.0]]))
        assert math.exp(law.log_mass_of([0])) == pytest.approx(0.3829249, abs=1e-7)
        assert law.tail_mass < 1e-12

    def test_round_concentrated(self):
        law = round_pushforward(NormalSpec([2.0, 5.0], np.diag([1e-4, 1e-4])))
        assert math.exp(law.log_mass_of([2, 5])) == pytest.approx(1.0, abs=1e-12)

    def test_round_window_too_small(self):
        with pytest.raises(TailTooLargeError):
            round_pushforward(NormalSpec([0.0], [[1.0]]), ([-1], [1]))

    def test_round_general_covariance(self):
        g = NormalSpec([1.0, 1.0], [[1.0, 0.5], [0.5, 1.0]])
        law = round_pushforward(g, nodes=16)
        assert law.total_mass() + law.tail_mass == pytest.approx(1.0, abs=1e-9)

    @given(st.lists(st.tuples(st.integers(-3, 6), st.integers(0, 4)), min_size=1, max_size=8, unique=True),
           st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_round_inverts_jitter(self, pts, seed):
        w = np.random.default_rng(seed).random(len(pts)) + 0.01
        law = DiscreteLaw(np.array(pts), np.log(w / w.sum()))
        back = round_pushforward(apply_jitter(law))
        assert tv_discrete(law, back).value == 0.0

    def test_kernel_specs(self):
        assert JITTER.direction == "discrete->continuous"
        assert ROUND.to_dict() == {"kind": "round-nearest-integer", "direction": "continuous->discrete"}


class TestFamilies:
    def test_q_covariance_matches_nm(self):
        g = normal_family_spec(ModelParams(None, 4, "1/2"), "Normal-Q")
        assert g.mean.tolist() == [4.0]
        assert g.covariance.tolist() == [[8.0]]

    def test_literal_sign_is_degenerate(self):
        with pytest.raises(DegenerateCovarianceError):
            normal_family_spec(ModelParams(None, 4, "1/2"), "Normal-Q", literal_sigma=True)

    def test_qbar_and_qstar(self):
        p = ModelParams(None, 5, ["3/10", "1/5"])
        g = normal_family_spec(p, "Normal-Qbar")
        np.testing.assert_allclose(g.covariance, np.diag([0.6 * 5, 0.4 * 5]))
        g = normal_family_spec(p, "Normal-Qstar")
        np.testing.assert_allclose(g.covariance, 0.25 * np.eye(2))
        np.testing.assert_allclose(g.mean, np.sqrt([3.0, 2.0]))

    @pytest.mark.parametrize("p", [["1/5"], ["4/5"], ["1/5", "3/5"], ["2/5", "2/5"], ["1/5", "1/5", "2/5"]])
    def test_q_positive_definite_on_theta(self, p):
        assert ModelParams(None, 3, p).in_theta("1/5")
        normal_family_spec(ModelParams(None, 3, p), "Normal-Q").cholesky()

    def test_theta_gate(self):
        fam = ExperimentFamily("Normal-Q", "1/4")
        params = ModelParams(100, 2, "1/5")
        assert not fam.admits(params)
        with pytest.raises(ParameterError, match="Theta_b"):
            deficiency_upper_bound_PQ(params, fam)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ExperimentFamily("Poisson")


class TestConcentration:
    def test_examples(self):
        p = ModelParams(4, 1, "1/2")
        assert concentration_tail(p, Fraction(3, 4)) == pytest.approx(1 / 6, abs=1e-15)
        assert concentration_tail(p, 1) == 0.0
        assert concentration_tail(ModelParams(30, 2, ["1/3", "1/3"]), Fraction(11, 10)) == 0.0

    def test_joint_enumeration_vs_direct_sum(self):
        params = ModelParams(30, 2, ["1/3", "1/5"])
        lt, method = log_concentration_tail(params, Fraction(1, 2))
        assert method == "exact-enumeration"
        law = enumerate_mih_support(params)
        caps = np.array([5, 3])
        direct = law.mass[np.any(law.support > caps, axis=1)].sum()
        assert math.exp(lt) == pytest.approx(direct, rel=1e-12)

    def test_bound_formula(self):
        params = ModelParams(100, 4, "1/2")
        assert log_concentration_bound(params) == pytest.approx(math.log(100) - 0.25 * 10_000 / 400)

    def test_sweep_threshold(self):
        sweep = concentration_check(["1/2"], 1, [40, 80, 160])
        assert [r.N for r in sweep.rows] == [40, 80, 160]
        # the bound exceeds one for small N, so it holds trivially there
        assert sweep.rows[0].holds
        assert sweep.threshold == 40

    def test_bound_fails_for_large_N(self):
        # the exact tail decays like exp(-c N) and the bound like exp(-c N^2)
        sweep = concentration_check(["1/2"], 1, [160, 320, 640, 1280])
        assert not sweep.rows[-1].holds
        assert sweep.threshold is None


def _oracle_tv(law, g):
    mu, sd = float(g.mean[0]), math.sqrt(g.covariance[0, 0])
    lo, hi = law.support.min() - 0.5, law.support.max() + 0.5
    return tv_jittered_normal_riemann(law.support[:, 0], law.mass, mu, sd, lo, hi, m=4_000_000)


class TestDeficiency:
    def test_pq_dense_grid(self):
        params = ModelParams(10_000, 25, "2/5")
        rep = deficiency_upper_bound_PQ(params, "Normal-Q")
        law = truncate_mih_support(params)
        assert 0 < rep.upper_bound < 1
        assert rep.upper_bound == pytest.approx(_oracle_tv(law, normal_family_spec(params, "Normal-Q")), abs=1e-4)
        assert rep.via == JITTER
        assert [c.metric for c in rep.components] == ["tv", "hellinger"]

    def test_qp_dense_grid(self):
        params = ModelParams(10_000, 25, "2/5")
        rep = deficiency_upper_bound_QP(params, "Normal-Qbar")
        law = truncate_mih_support(params)
        g = normal_family_spec(params, "Normal-Qbar")
        mu, sd = float(g.mean[0]), math.sqrt(g.covariance[0, 0])
        ks = law.support[:, 0]
        gm = np.array([integrate.quad(lambda x: stats.norm.pdf(x, mu, sd), k - 0.5, k + 0.5)[0] for k in ks])
        oracle = 0.5 * (np.abs(law.mass - gm).sum() + 1 - gm.sum())
        assert rep.upper_bound == pytest.approx(oracle, abs=1e-4)

    def test_qstar_against_direct_integral(self):
        params = ModelParams(200, 3, "1/2")
        law = enumerate_mih_support(params)
        g = normal_family_spec(params, "Normal-Qstar")
        mu = float(g.mean[0])
        rep = tv_sqrt_jittered_vs_normal(law, g, nodes=32)
        # density of sqrt(max(K + U, 0)) on y > 0 is 2 y P(K = round(y^2)); the atom at 0 has mass P(K = 0) / 2
        m = dict(zip(law.support[:, 0].tolist(), law.mass.tolist()))
        f = lambda y: 2 * y * m.get(int(np.floor(y * y + 0.5)), 0.0)
        phi = lambda y: stats.norm.pdf(y, mu, 0.5)
        top = math.sqrt(law.support.max() + 0.5)
        brk = [math.sqrt(k + 0.5) for k in range(int(law.support.max()) + 1)]
        inside, _ = integrate.quad(lambda y: abs(f(y) - phi(y)), 0, top, points=brk, limit=500, epsabs=1e-12)
        outside = stats.norm.cdf(0, mu, 0.5) + stats.norm.sf(top, mu, 0.5)
        oracle = 0.5 * (inside + outside + m[0] / 2)
        assert rep.value == pytest.approx(oracle, abs=1e-6)

    @pytest.mark.parametrize("kind", ["Normal-Q", "Normal-Qbar", "Normal-Qstar"])
    @pytest.mark.parametrize("p", ["1/5", "1/2", "4/5"])
    def test_data_processing(self, kind, p):
        n = 16
        params = ModelParams(lattice_N_at_least(n**3, n, [p]), n, p)
        rep = deficiency_upper_bound_QP(params, kind)
        assert rep.upper_bound <= rep.forward_bound + rep.error_estimate + rep.forward_error

    def test_data_processing_2d(self):
        params = ModelParams(lattice_N_at_least(16**3 / 2, 16, ["1/5", "2/5"]), 16, ["1/5", "2/5"])
        for kind in ("Normal-Q", "Normal-Qbar", "Normal-Qstar"):
            rep = deficiency_upper_bound_QP(params, kind)
            assert rep.upper_bound <= rep.forward_bound + rep.error_estimate + rep.forward_error

    @pytest.mark.parametrize("kind", ["Normal-Q", "Normal-Qbar", "Normal-Qstar"])
    def test_tiny_n(self, kind):
        rep = deficiency_upper_bound_QP(ModelParams(10, 1, "1/2"), kind)
        assert 0 <= rep.upper_bound <= 1 and 0 <= rep.forward_bound <= 1

    def test_report_serializes(self):
        rep = deficiency_upper_bound_QP(ModelParams(1000, 10, "1/2"), "Normal-Q")
        d = rep.to_dict()
        assert d["direction"] == "Q->P" and d["via"]["kind"] == "round-nearest-integer"
        assert d["theoretical_rhs"] == pytest.approx(1 / math.sqrt(10))
