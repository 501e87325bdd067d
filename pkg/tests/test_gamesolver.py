import numpy as np
import pytest

from channels import CondPmf, DistortionMatrix, Pmf, binary_entropy, steg_feasible
from gamesolver import (
    GameConfig, _MaxMinGame, _StartResult, _certificate_gap, _j_value_and_grad, best_attack, capacity_active, capacity_binary_hamming,
    capacity_no_cover, capacity_passive, capacity_pubwm, capacity_sweep, exponent_active,
    exponent_curve, exponent_passive, exponent_pubwm, hamming_threshold, rd_bound, verify_no_loss_cyclic,
    zero_crossing,
)

H02 = binary_entropy(0.2)


def binary_cfg(D1, D2, L=2, **kwargs):
    return GameConfig(Pmf.uniform(2), DistortionMatrix.hamming(2), D1, D2, L, **kwargs)


class TestClosedForm:
    def test_threshold(self):
        assert hamming_threshold(0.2) == pytest.approx(1.0 - 2.0 ** (-H02))

    def test_linear_segment(self):
        assert capacity_binary_hamming(0.3, 0.2) == pytest.approx(0.18704, abs=5e-4)

    def test_middle_segment(self):
        assert capacity_binary_hamming(0.4, 0.2) == pytest.approx(binary_entropy(0.4) - H02)

    def test_saturation(self):
        assert capacity_binary_hamming(0.6, 0.2) == pytest.approx(1.0 - H02)

    def test_noiseless(self):
        assert capacity_binary_hamming(0.2, 0.0) == pytest.approx(H02)

    @pytest.mark.parametrize('D1, D2', [(-0.1, 0.1), (0.3, 0.5), (0.3, -0.1)])
    def test_rejects_bad_budgets(self, D1, D2):
        with pytest.raises(ValueError):
            capacity_binary_hamming(D1, D2)


class TestGameConfig:
    def test_rejects_mismatched_alphabets(self):
        with pytest.raises(ValueError):
            GameConfig(Pmf.uniform(3), DistortionMatrix.hamming(2), 0.1)

    def test_rejects_negative_budget(self):
        with pytest.raises(ValueError):
            binary_cfg(-0.1, 0.0)

    def test_rejects_empty_auxiliary(self):
        with pytest.raises(ValueError):
            binary_cfg(0.1, 0.0, L=0)

    def test_dict_round_trip(self):
        cfg = binary_cfg(0.3, 0.1, L=3, seed=7)
        back = GameConfig.from_dict(cfg.to_dict())
        assert back.to_dict() == cfg.to_dict()


def test_danskin_gradient_matches_finite_difference(rng):
    p = np.array([0.3, 0.7])
    law = rng.dirichlet(np.ones(6), size=2).reshape(2, 2, 3)
    attack = CondPmf.bsc(0.15).matrix
    direction = rng.normal(size=law.shape)
    direction -= direction.mean(axis=(1, 2), keepdims=True)
    _, grad = _j_value_and_grad(p, law, attack)
    h = 1e-6
    numeric = (_j_value_and_grad(p, law + h * direction, attack)[0]
               - _j_value_and_grad(p, law - h * direction, attack)[0]) / (2 * h)
    assert np.sum(grad * direction) == pytest.approx(numeric, rel=1e-5, abs=1e-8)


class TestBestAttack:
    def test_bsc_is_worst_for_uniform_input(self):
        P_ux = np.diag([0.5, 0.5])
        A, value = best_attack(P_ux, np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]), 0.2)
        assert value == pytest.approx(1.0 - H02, abs=1e-6)
        assert A[0, 1] == pytest.approx(0.2, abs=1e-3)

    def test_cyclic_class_agrees(self):
        P_ux = np.diag([0.5, 0.5])
        _, value = best_attack(P_ux, np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]), 0.2,
                               cyclic=True)
        assert value == pytest.approx(1.0 - H02, abs=1e-6)

    def test_plateau_erases_everything(self):
        P_ux = np.diag([0.2, 0.8])
        A, value = best_attack(P_ux, np.array([0.2, 0.8]), np.array([[0.0, 1.0], [1.0, 0.0]]), 0.25)
        assert value == 0.0
        assert np.allclose(A, [[0.0, 1.0], [0.0, 1.0]])

    def test_no_budget_means_identity(self):
        P_ux = np.diag([0.5, 0.5])
        A, value = best_attack(P_ux, np.array([0.5, 0.5]), np.array([[0.0, 1.0], [1.0, 0.0]]), 0.0)
        assert np.array_equal(A, np.eye(2))
        assert value == pytest.approx(1.0)


class TestPassive:
    def test_binary_hamming(self, bern_half, hamming2):
        result = capacity_passive(bern_half, hamming2, 0.2)
        assert result.value == pytest.approx(H02, abs=1e-6)
        assert steg_feasible(result.best_covert.x_given_s, bern_half, hamming2, 0.2)

    def test_zero_budget(self, bern_half, hamming2):
        assert capacity_passive(bern_half, hamming2, 0.0).value == 0.0

    def test_degenerate_source(self, hamming2):
        assert capacity_passive(Pmf([1.0, 0.0]), hamming2, 0.3).value == 0.0

    def test_ternary_is_bounded_by_rate_distortion(self):
        p_S, d = Pmf([0.5, 0.3, 0.2]), DistortionMatrix.hamming(3)
        value = capacity_passive(p_S, d, 0.15).value
        assert 0.0 < value <= rd_bound(p_S, d, 0.15) + 1e-6

    def test_rd_bound_binary(self, hamming2):
        p_S = Pmf.bernoulli(0.3)
        bound = rd_bound(p_S, hamming2, 0.1)
        assert bound == pytest.approx(binary_entropy(0.1), abs=1e-3)
        assert bound >= capacity_passive(p_S, hamming2, 0.1).value

    def test_rd_bound_saturates_at_entropy(self, hamming2):
        p_S = Pmf.bernoulli(0.3)
        assert rd_bound(p_S, hamming2, 0.35) == pytest.approx(p_S.entropy())


def test_no_cover_capacity(bern_half, hamming2):
    assert capacity_no_cover(bern_half, hamming2, 0.2) == pytest.approx(1.0 - H02, abs=1e-6)
    assert capacity_no_cover(bern_half, hamming2, 0.5) == 0.0


def test_active_zero_budget_is_zero():
    result = capacity_active(binary_cfg(0.0, 0.2))
    assert result.value == 0.0
    assert result.converged


def test_capacity_sweep_closed_form():
    frame = capacity_sweep('binary', binary_cfg(0.1, 0.2), 'D1', np.linspace(0.0, 0.6, 13))
    assert list(frame.columns) == ['D1', 'C']
    assert np.all(np.diff(frame['C']) >= -1e-12)
    assert frame['C'].iloc[-1] == pytest.approx(1.0 - H02)


def test_capacity_sweep_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        capacity_sweep('binary', binary_cfg(0.1, 0.2), 'L', [1, 2])


class TestPassiveExponent:
    def test_zero_budget_gives_zero_exponent(self, bern_half, hamming2):
        assert exponent_passive(bern_half, hamming2, 0.0, 0.3) == pytest.approx(0.0, abs=1e-12)

    def test_zero_above_capacity(self, bern_half, hamming2):
        assert exponent_passive(bern_half, hamming2, 0.4, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_nonincreasing_in_rate(self, bern_half, hamming2):
        values = [exponent_passive(bern_half, hamming2, 0.4, R) for R in (0.0, 0.5, 0.9)]
        assert values[0] > 0.0
        assert values[0] >= values[1] >= values[2] > 0.0

    def test_curve_zero_crossing(self, bern_half, hamming2):
        cfg = GameConfig(bern_half, hamming2, 0.4)
        curve = exponent_curve(cfg, np.linspace(0.0, 1.2, 13), mode='passive')
        assert zero_crossing(curve) == pytest.approx(1.0)
        assert np.all(curve.exponents[curve.rates >= 1.0 - 1e-9] == 0.0)
        assert list(curve.to_frame().columns) == ['R', 'E_r']

    def test_rejects_negative_rate(self, bern_half, hamming2):
        with pytest.raises(ValueError):
            exponent_passive(bern_half, hamming2, 0.4, -0.1)


def test_exponent_needs_binary_source():
    cfg = GameConfig(Pmf.uniform(3), DistortionMatrix.hamming(3), 0.3, 0.1)
    with pytest.raises(ValueError):
        exponent_active(cfg, 0.1, seeds=[])


def test_exponent_active_zero_budget():
    assert exponent_active(binary_cfg(0.0, 0.2), 0.1) == 0.0


def test_exponent_curve_unknown_mode():
    with pytest.raises(ValueError):
        exponent_curve(binary_cfg(0.4, 0.2), [0.1], mode='sideways')


def test_passive_capacity_below_rate_distortion_bound(hamming2):
    for p_S, d in ((Pmf.bernoulli(0.3), hamming2), (Pmf([0.5, 0.3, 0.2]), DistortionMatrix.hamming(3))):
        for D1 in np.linspace(0.0, 0.5, 6):
            assert capacity_passive(p_S, d, D1).value <= rd_bound(p_S, d, D1) + 1e-6


def test_certificate_flags_a_stalled_solution():
    cfg = binary_cfg(0.4, 0.2, multistarts=0)
    game = _MaxMinGame(cfg.p_S.probs, cfg.d.d, cfg.D1, cfg.D2, cfg.L)
    value, _, A = game.evaluate(game.trivial)
    assert value == pytest.approx(0.0, abs=1e-12)
    stalled = _StartResult(value, game.trivial, A, 0, 0)
    # any fixed attack leaves at least the game value on the table
    assert _certificate_gap(game, cfg, stalled, [game.trivial]) > 0.1


def test_no_loss_check_needs_cyclic_distortion():
    with pytest.raises(ValueError):
        verify_no_loss_cyclic(2, DistortionMatrix([[0.0, 1.0], [2.0, 0.0]]), 0.4, 0.2, 2)


@pytest.mark.slow
class TestActiveGame:
    def test_middle_segment(self):
        result = capacity_active(binary_cfg(0.4, 0.2, multistarts=4))
        assert result.value == pytest.approx(binary_entropy(0.4) - H02, abs=5e-3)
        assert steg_feasible(result.best_covert.x_given_s, Pmf.uniform(2), DistortionMatrix.hamming(2), 0.4)

    def test_saturation(self):
        assert capacity_active(binary_cfg(0.6, 0.2, multistarts=4)).value == pytest.approx(1.0 - H02, abs=5e-3)

    def test_noiseless_attack(self):
        assert capacity_active(binary_cfg(0.2, 0.0, multistarts=4)).value == pytest.approx(H02, abs=5e-3)

    def test_time_sharing_needs_a_third_symbol(self):
        result = capacity_active(binary_cfg(0.3, 0.2, L=3, multistarts=4))
        assert result.value == pytest.approx(capacity_binary_hamming(0.3, 0.2), abs=5e-3)

    def test_pubwm_is_never_below_steg(self):
        cfg = binary_cfg(0.4, 0.2, multistarts=4)
        assert capacity_pubwm(cfg).value >= capacity_active(cfg).value - 5e-3

    def test_no_loss_binary_hamming(self):
        report = verify_no_loss_cyclic(2, DistortionMatrix.hamming(2), 0.4, 0.2, 2, multistarts=4)
        assert report.pubwm.value == pytest.approx(report.steg.value, abs=5e-3)
        assert report.restricted.value == pytest.approx(report.steg.value, abs=5e-3)

    @pytest.mark.parametrize('R', [0.26, 0.30])
    def test_exponent_vanishes_above_capacity(self, R):
        cfg = binary_cfg(0.4, 0.2, multistarts=2)
        assert exponent_active(cfg, R) <= cfg.tol

    @pytest.mark.parametrize('R', [0.05, 0.10])
    def test_exponent_positive_below_capacity(self, R):
        cfg = binary_cfg(0.4, 0.2, multistarts=2)
        assert exponent_active(cfg, R) >= 0.005

    def test_steg_exponent_below_pubwm(self):
        cfg = binary_cfg(0.4, 0.2, multistarts=2)
        assert exponent_active(cfg, 0.1) <= exponent_pubwm(cfg, 0.1) + 5e-3

    def test_capacity_grows_with_auxiliary_size(self):
        short = capacity_active(binary_cfg(0.3, 0.2, L=2, multistarts=4))
        padded = np.concatenate([short.best_covert.law, np.zeros((2, 2, 1))], axis=2)
        longer = capacity_active(binary_cfg(0.3, 0.2, L=3, multistarts=4), seeds=[padded])
        assert longer.value >= short.value - 1e-6

    def test_no_attack_reduces_to_passive(self):
        p_S, d = Pmf.bernoulli(0.3), DistortionMatrix.hamming(2)
        active = capacity_active(GameConfig(p_S, d, 0.1, 0.0, 2, multistarts=4)).value
        assert active == pytest.approx(capacity_passive(p_S, d, 0.1).value, abs=2e-3)

    def test_no_loss_ternary_cyclic(self):
        d = DistortionMatrix.cyclic([0.0, 1.0, 1.0])
        report = verify_no_loss_cyclic(3, d, 0.4, 0.0, 3, multistarts=4)
        assert report.steg.value == pytest.approx(report.pubwm.value, abs=5e-3)
        assert report.restricted.value == pytest.approx(report.steg.value, abs=5e-3)
        # max H(X|S) for a uniform ternary source with P(X != S) <= 0.4
        assert report.steg.value == pytest.approx(binary_entropy(0.4) + 0.4, abs=5e-3)
        assert report.ordered

    def test_finite_auxiliary_ordering_under_attack(self):
        d = DistortionMatrix.cyclic([0.0, 1.0, 1.0])
        report = verify_no_loss_cyclic(3, d, 0.3, 0.1, 2, multistarts=4)
        assert report.ordered
        assert report.pubwm.value <= report.restricted.value + report.tol
        assert report.restricted.value <= report.steg.value + report.tol
