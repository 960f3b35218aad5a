"""Unit tests for the NAF Q-model head, loss and persistence."""

import numpy as np
import pytest

from src.simq.diffnet import forward, save_network
from src.simq.errors import ConfigError, ModelFileError, NumericalError, ShapeError
from src.simq.models import Experience, ExperienceBatch
from src.simq.naf import (
    NafConfig,
    QModel,
    analytic_model,
    batch_loss_and_grad,
    greedy_action,
    load_model,
    naf_eval,
    q_value,
    save_model,
    soft_update,
    td_target,
)


# -----------------------------------------------------------------------------
# Fixtures
# -----------------------------------------------------------------------------


def with_head_bias(model: QModel, bias: list[float]) -> QModel:
    """Zero the output weights and set the raw head outputs through the output bias."""
    last = len(model.main.specs) - 1
    data = model.main.data.copy()
    data[model.main.weight_slice(last)] = 0.0
    data[model.main.bias_slice(last)] = bias
    params = model.main.with_data(data)
    return QModel(config=model.config, main=params, target=params.copy(), seed=model.seed)


@pytest.fixture
def two_action_model():
    """n_a = 2 model with V = 1.5, mu = (0.5, -0.25), L = [[1, 0], [3, 1]]."""
    model = QModel.create(NafConfig(n_x=2, n_a=2, hidden=(3,)), seed=0)
    return with_head_bias(model, [1.5, np.arctanh(0.5), np.arctanh(-0.25), 0.0, 3.0, 0.0])


@pytest.fixture
def smooth_model():
    """tanh hidden layer so finite differences see no kinks."""
    return QModel.create(NafConfig(n_x=2, n_a=2, hidden=(6,), activation="tanh"), seed=1)


@pytest.fixture
def batch():
    rng = np.random.default_rng(3)
    return ExperienceBatch(
        x=rng.uniform(-1, 1, (5, 2)),
        a=rng.uniform(-0.9, 0.9, (5, 2)),
        x_next=rng.uniform(-1, 1, (5, 2)),
        r=rng.uniform(-2, 0, 5),
    )


# -----------------------------------------------------------------------------
# Head
# -----------------------------------------------------------------------------


class TestNafConfig:
    """Tests for NafConfig."""

    @pytest.mark.parametrize("n_a,expected", [(1, 3), (2, 6), (3, 10)])
    def test_output_dim(self, n_a, expected):
        """Should reserve 1 + n_a + n_a(n_a+1)/2 outputs."""
        assert NafConfig(n_x=2, n_a=n_a).output_dim == expected

    def test_rejects_nonpositive_dimensions(self):
        """Should reject zero-sized state or action."""
        with pytest.raises(ShapeError):
            NafConfig(n_x=0, n_a=1)

    def test_state_scale_must_match_state_dimension(self):
        with pytest.raises(ShapeError):
            NafConfig(n_x=2, n_a=1, state_scale=(1.0,))

    @pytest.mark.parametrize("field,value", [("state_scale", (1.0, 0.0)), ("value_scale", 0.0), ("diag_limit", -1.0)])
    def test_rejects_nonpositive_scales(self, field, value):
        with pytest.raises(ConfigError):
            NafConfig(n_x=2, n_a=1, **{field: value})

    def test_meta_round_trip(self):
        cfg = NafConfig(n_x=2, n_a=1, hidden=(5, 4), state_scale=(np.pi, 8.0), value_scale=100.0, diag_limit=6.0)

        assert NafConfig.from_meta(cfg.to_meta()) == cfg

    def test_meta_without_scaling_keys_gives_unscaled_head(self):
        cfg = NafConfig.from_meta({"n_x": 2, "n_a": 1, "hidden": [3]})

        assert cfg.state_scale is None
        assert cfg.value_scale == 1.0


class TestNafEval:
    """Tests for naf_eval."""

    def test_builds_lower_triangular_factor_with_exp_diagonal(self, two_action_model):
        """Should exponentiate the diagonal entries and fill the strict lower triangle."""
        e = naf_eval(two_action_model, "main", np.zeros(2))

        np.testing.assert_allclose(e.L, [[1.0, 0.0], [3.0, 1.0]])
        np.testing.assert_allclose(e.P, [[1.0, 3.0], [3.0, 10.0]])
        np.testing.assert_allclose(e.mu, [0.5, -0.25])
        assert e.V == pytest.approx(1.5)

    def test_P_is_symmetric_positive_definite(self, smooth_model):
        """Should produce an SPD P for arbitrary states."""
        for x in np.random.default_rng(0).normal(size=(10, 2)):
            P = naf_eval(smooth_model, "main", x).P
            np.testing.assert_allclose(P, P.T)
            assert np.all(np.linalg.eigvalsh(P) > 0.0)

    def test_P_is_spd_and_advantage_vanishes_at_mu_for_random_models(self):
        """Should hold over 1000 random (parameters, state) pairs of both action sizes and activations."""
        rng = np.random.default_rng(11)
        for i in range(1000):
            n_a = 1 + i % 2
            activation = "relu" if i % 4 < 2 else "tanh"
            model = QModel.create(NafConfig(n_x=2, n_a=n_a, hidden=(6,), activation=activation), seed=i)
            x = rng.normal(scale=3.0, size=2)

            e = naf_eval(model, "main", x)

            np.testing.assert_allclose(e.P, e.P.T, rtol=1e-12, atol=1e-12)
            assert np.all(np.linalg.eigvalsh(e.P) > 0.0)
            assert q_value(e, e.mu)[1] == 0.0

    def test_value_scale_multiplies_V_and_P_only(self, two_action_model):
        scaled_cfg = NafConfig(n_x=2, n_a=2, hidden=(3,), value_scale=100.0)
        scaled = QModel(config=scaled_cfg, main=two_action_model.main, target=two_action_model.target)

        base = naf_eval(two_action_model, "main", np.zeros(2))
        e = naf_eval(scaled, "main", np.zeros(2))

        assert e.V == pytest.approx(100.0 * base.V)
        np.testing.assert_allclose(e.P, 100.0 * base.P)
        np.testing.assert_array_equal(e.mu, base.mu)
        np.testing.assert_array_equal(e.L, base.L)

    def test_state_scale_divides_network_input(self, smooth_model):
        cfg = NafConfig(n_x=2, n_a=2, hidden=(6,), activation="tanh", state_scale=(2.0, 4.0))
        scaled = QModel(config=cfg, main=smooth_model.main, target=smooth_model.target)
        x = np.array([1.2, -3.6])

        e = naf_eval(scaled, "main", x)
        reference = naf_eval(smooth_model, "main", x / np.array([2.0, 4.0]))

        np.testing.assert_allclose(e.P, reference.P)
        np.testing.assert_allclose(e.mu, reference.mu)
        assert e.V == pytest.approx(reference.V)

    def test_large_log_diagonal_is_clamped(self):
        """Should cap the diagonal of L at exp(diag_limit) instead of overflowing."""
        model = analytic_model([[-4.0, -1.0]], [800.0])

        e = naf_eval(model, "main", np.array([0.1, 0.0]))

        np.testing.assert_allclose(e.P, [[np.exp(20.0)]])

    def test_overflowing_P_raises_numerical_error(self, two_action_model):
        """Should refuse a P whose entries overflow even when the raw outputs are finite."""
        model = with_head_bias(two_action_model, [0.0, 0.0, 0.0, 0.0, 1e200, 0.0])

        with pytest.raises(NumericalError):
            naf_eval(model, "main", np.zeros(2))

    def test_mu_stays_inside_unit_box(self, smooth_model):
        """Should squash mu through tanh."""
        for x in np.random.default_rng(1).normal(scale=50.0, size=(10, 2)):
            assert np.all(np.abs(naf_eval(smooth_model, "main", x).mu) < 1.0)

    def test_rejects_wrong_state_length(self, smooth_model):
        """Should raise ShapeError for a state of the wrong length."""
        with pytest.raises(ShapeError):
            naf_eval(smooth_model, "main", np.zeros(3))

    def test_rejects_unknown_network(self, smooth_model):
        """Should only accept main or target."""
        with pytest.raises(ConfigError):
            naf_eval(smooth_model, "other", np.zeros(2))


class TestQValue:
    """Tests for q_value and greedy_action."""

    def test_advantage_is_zero_at_mu(self, two_action_model):
        """Should return Q = V and A = 0 at the greedy action."""
        e = naf_eval(two_action_model, "main", np.zeros(2))

        q, adv = q_value(e, e.mu)

        assert adv == 0.0
        assert q == pytest.approx(1.5)

    def test_advantage_is_quadratic_in_the_offset(self, two_action_model):
        """Should return -1/2 d^T P d."""
        e = naf_eval(two_action_model, "main", np.zeros(2))

        _, adv_first = q_value(e, e.mu + np.array([1.0, 0.0]))
        _, adv_second = q_value(e, e.mu + np.array([0.0, 0.1]))

        assert adv_first == pytest.approx(-0.5)
        assert adv_second == pytest.approx(-0.05)

    def test_greedy_action_maximizes_q(self, smooth_model):
        """Should never be beaten by any other action."""
        rng = np.random.default_rng(2)
        e = naf_eval(smooth_model, "main", np.array([0.3, -0.4]))
        best, _ = q_value(e, greedy_action(e))

        for a in rng.uniform(-1, 1, (50, 2)):
            assert q_value(e, a)[0] <= best

    def test_rejects_wrong_action_length(self, two_action_model):
        """Should raise ShapeError for an action of the wrong length."""
        e = naf_eval(two_action_model, "main", np.zeros(2))

        with pytest.raises(ShapeError):
            q_value(e, np.zeros(3))


# -----------------------------------------------------------------------------
# Learning
# -----------------------------------------------------------------------------


class TestTdTarget:
    """Tests for td_target."""

    def test_uses_target_network_value(self, two_action_model):
        """Should return r + gamma V_target(x')."""
        model = QModel(
            config=two_action_model.config,
            main=two_action_model.main,
            target=with_head_bias(two_action_model, [2.0, 0, 0, 0, 0, 0]).main,
        )

        assert td_target(model, -1.0, np.zeros(2), 0.5) == pytest.approx(0.0)

    @pytest.mark.parametrize("gamma", [-0.1, 1.0])
    def test_rejects_gamma_outside_unit_interval(self, two_action_model, gamma):
        """Should require 0 <= gamma < 1."""
        with pytest.raises(ConfigError):
            td_target(two_action_model, 0.0, np.zeros(2), gamma)


class TestBatchLossAndGrad:
    """Tests for batch_loss_and_grad."""

    def test_gradient_matches_finite_differences(self, smooth_model, batch):
        """Should agree with central differences of the loss in the main parameters."""

        def loss(theta):
            m = QModel(config=smooth_model.config, main=smooth_model.main.with_data(theta), target=smooth_model.target)
            return batch_loss_and_grad(m, batch, 0.9)[0]

        _, grad = batch_loss_and_grad(smooth_model, batch, 0.9)

        theta = smooth_model.main.data
        num = np.zeros_like(theta)
        h = 1e-6
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = h
            num[i] = (loss(theta + e) - loss(theta - e)) / (2 * h)
        np.testing.assert_allclose(grad, num, rtol=1e-5, atol=1e-8)

    @pytest.mark.parametrize("scaled", [False, True])
    def test_gradient_matches_finite_differences_on_random_batches(self, scaled):
        """Should agree with central differences on 50 random minibatches, with and without output scaling."""
        rng = np.random.default_rng(17 + scaled)
        cfg = NafConfig(
            n_x=2,
            n_a=2,
            hidden=(5,),
            activation="tanh",
            state_scale=(np.pi, 8.0) if scaled else None,
            value_scale=100.0 if scaled else 1.0,
        )
        for trial in range(50):
            model = QModel.create(cfg, seed=trial)
            model = QModel(config=cfg, main=model.main, target=model.main.with_data(0.9 * model.main.data))
            n = int(rng.integers(1, 9))
            batch = ExperienceBatch(
                x=rng.uniform(-4, 4, (n, 2)),
                a=rng.uniform(-1, 1, (n, 2)),
                x_next=rng.uniform(-4, 4, (n, 2)),
                r=rng.uniform(-50, 0, n),
            )

            def loss(theta):
                m = QModel(config=cfg, main=model.main.with_data(theta), target=model.target)
                return batch_loss_and_grad(m, batch, 0.99)[0]

            _, grad = batch_loss_and_grad(model, batch, 0.99)

            theta = model.main.data
            num = np.zeros_like(theta)
            h = 1e-6
            for i in range(theta.size):
                e = np.zeros_like(theta)
                e[i] = h
                num[i] = (loss(theta + e) - loss(theta - e)) / (2 * h)
            np.testing.assert_allclose(grad, num, rtol=1e-4, atol=1e-6 * max(1.0, np.abs(num).max()))

    def test_clamped_diagonal_gets_no_gradient(self):
        """Should stop the gradient through a diagonal entry held at the clamp."""
        model = analytic_model([[-4.0, -1.0]], [800.0])
        experiences = [Experience(x=np.array([0.2, 0.1]), a=np.array([0.5]), x_next=np.zeros(2), r=-1.0)]

        _, grad = batch_loss_and_grad(model, experiences, 0.9)

        last = len(model.main.specs) - 1
        bias_grad = grad[model.main.bias_slice(last)]
        assert bias_grad[2] == 0.0
        assert bias_grad[0] != 0.0

    def test_loss_is_mean_of_squared_td_errors(self, smooth_model, batch):
        """Should average (t_i - Q_i)^2 over the minibatch."""
        expected = []
        for e in batch:
            q, _ = q_value(naf_eval(smooth_model, "main", e.x), e.a)
            expected.append((td_target(smooth_model, e.r, e.x_next, 0.9) - q) ** 2)

        loss, _ = batch_loss_and_grad(smooth_model, batch, 0.9)

        assert loss == pytest.approx(np.mean(expected))

    def test_zero_loss_when_targets_match(self, smooth_model):
        """Should give zero loss and gradient when r equals Q with gamma = 0."""
        x, a = np.array([0.2, 0.1]), np.array([0.3, -0.3])
        q, _ = q_value(naf_eval(smooth_model, "main", x), a)
        experiences = [Experience(x=x, a=a, x_next=np.zeros(2), r=q)]

        loss, grad = batch_loss_and_grad(smooth_model, experiences, 0.0)

        assert loss == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_rejects_empty_batch(self, smooth_model):
        """Should raise ShapeError for an empty minibatch."""
        with pytest.raises(ShapeError):
            batch_loss_and_grad(smooth_model, [], 0.9)


class TestSoftUpdate:
    """Tests for soft_update."""

    def test_tau_one_copies_main(self, smooth_model, two_action_model):
        """Should copy the main parameters into the target when tau = 1."""
        m = QModel(config=smooth_model.config, main=smooth_model.main, target=smooth_model.main.with_data(
            np.zeros(len(smooth_model.main))))

        updated = soft_update(m, 1.0)

        np.testing.assert_array_equal(updated.target.data, m.main.data)

    def test_blends_main_into_target(self, smooth_model):
        """Should move the target a fraction tau toward main."""
        zeros = smooth_model.main.with_data(np.zeros(len(smooth_model.main)))
        m = QModel(config=smooth_model.config, main=smooth_model.main, target=zeros)

        updated = soft_update(m, 0.25)

        np.testing.assert_allclose(updated.target.data, 0.25 * smooth_model.main.data)
        np.testing.assert_array_equal(updated.main.data, smooth_model.main.data)

    @pytest.mark.parametrize("tau", [0.0, -0.5, 1.5])
    def test_rejects_tau_outside_half_open_interval(self, smooth_model, tau):
        """Should require 0 < tau <= 1."""
        with pytest.raises(ConfigError):
            soft_update(smooth_model, tau)


# -----------------------------------------------------------------------------
# Hand-set members and persistence
# -----------------------------------------------------------------------------


class TestAnalyticModel:
    """Tests for analytic_model."""

    def test_realizes_closed_form_head(self):
        """Should give V = v0 - sum c|x|, mu = tanh(K x) and constant P."""
        model = analytic_model([[-4.0, -1.0]], [np.log(2.0)], value_weights=[1.0, 0.5], value_offset=0.25)
        x = np.array([0.3, -0.8])

        e = naf_eval(model, "main", x)

        assert e.V == pytest.approx(0.25 - 0.3 - 0.4)
        np.testing.assert_allclose(e.mu, np.tanh([-4.0 * 0.3 + 0.8]))
        np.testing.assert_allclose(e.P, [[4.0]])

    def test_rejects_wrong_number_of_l_entries(self):
        """Should require n_a(n_a+1)/2 raw L entries."""
        with pytest.raises(ShapeError):
            analytic_model([[1.0, 0.0]], [0.0, 0.0])


class TestModelPersistence:
    """Tests for save_model and load_model."""

    def test_round_trip_preserves_both_networks(self, smooth_model, tmp_path):
        """Should restore config, main and target bit for bit."""
        m = soft_update(
            QModel(config=smooth_model.config, main=smooth_model.main, target=smooth_model.main.with_data(
                np.ones(len(smooth_model.main)))),
            0.5,
        )
        path = tmp_path / "member.npz"

        save_model(path, m, {"system_id": "1"})
        loaded = load_model(path)

        assert loaded.config == m.config
        assert loaded.seed == m.seed
        np.testing.assert_array_equal(loaded.main.data, m.main.data)
        np.testing.assert_array_equal(loaded.target.data, m.target.data)
        x = np.array([0.7, -0.1])
        np.testing.assert_array_equal(forward(loaded.main, x)[0], forward(m.main, x)[0])

    def test_plain_network_file_is_rejected(self, smooth_model, tmp_path):
        """Should raise ModelFileError for a file without NAF metadata."""
        path = tmp_path / "plain.npz"
        save_network(path, smooth_model.main, seed=0)

        with pytest.raises(ModelFileError):
            load_model(path)

    def test_round_trip_keeps_output_scaling(self, tmp_path):
        cfg = NafConfig(n_x=2, n_a=1, hidden=(4,), state_scale=(np.pi, 8.0), value_scale=100.0)
        m = QModel.create(cfg, seed=3)
        path = tmp_path / "scaled.npz"

        save_model(path, m)
        loaded = load_model(path)

        assert loaded.config == cfg
        x = np.array([2.0, -5.0])
        assert naf_eval(loaded, "main", x).V == naf_eval(m, "main", x).V

    def test_non_finite_target_network_is_rejected(self, smooth_model, tmp_path):
        """Should raise ModelFileError when the stored target parameters hold NaN."""
        bad = smooth_model.main.data.copy()
        bad[0] = np.nan
        path = tmp_path / "nan-target.npz"
        save_network(path, smooth_model.main, seed=0, meta={"naf": smooth_model.config.to_meta()}, arrays={"target": bad})

        with pytest.raises(ModelFileError):
            load_model(path)
