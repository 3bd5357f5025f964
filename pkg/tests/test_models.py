import math

import numpy as np
import pytest

from rankabstain.models import (LINEAR, RELU_NN, ConstraintSpec, LinearModel,
                                ReluNetModel, from_text, is_feasible, lp_norm,
                                margin_range, null_model, params_vec, project,
                                project_l1_ball, random_model, score,
                                score_grads, scores, to_text, with_params)

C2 = ConstraintSpec(W=1.0, B=1.0, Lam=1.0, q=2.0)


def random_ball_point(rng, dim, p):
    x = rng.uniform(-1, 1, dim)
    n = lp_norm(x, p)
    return x / (n * (1 + 1e-9)) if n > 1 else x


class TestEval:
    def test_linear_dot_product(self):
        h = LinearModel(np.array([1.0, 0.0]), 0.5, C2)
        assert score(h, np.array([0.5, 0.3])) == 1.0

    def test_relu_dead_unit(self):
        c = ConstraintSpec(W=1.0, B=2.0)
        h = ReluNetModel(np.array([[1.0, 0.0]]), np.array([-2.0]), np.array([1.0]), c)
        assert score(h, np.array([0.9, 0.1])) == 0.0

    def test_null_model_scores_zero(self):
        for kind in (LINEAR, RELU_NN):
            h = null_model(kind, 2, C2)
            assert score(h, np.array([0.3, -0.4])) == 0.0

    def test_dimension_mismatch(self):
        h = LinearModel(np.array([1.0, 0.0]), 0.0, C2)
        with pytest.raises(ValueError):
            scores(h, np.zeros((3, 5)))


class TestProject:
    def test_radial_scaling_q2(self):
        h = project(LinearModel(np.array([3.0, 4.0]), 0.0, C2))
        assert np.allclose(h.w, [0.6, 0.8])

    def test_feasible_passes_through(self):
        h = LinearModel(np.array([0.3, 0.4]), 0.5, C2)
        h2 = project(h)
        assert np.array_equal(h2.w, h.w) and h2.b == h.b

    def test_clip_q_inf(self):
        c = ConstraintSpec(W=1.0, q=math.inf)
        h = project(LinearModel(np.array([2.0, -0.5]), 0.0, c))
        assert np.allclose(h.w, [1.0, -0.5])

    def test_l1_ball_projection(self):
        v = project_l1_ball(np.array([0.8, 0.8]), 1.0)
        assert np.sum(np.abs(v)) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(v, [0.5, 0.5])

    def test_bias_clipped(self):
        h = project(LinearModel(np.array([0.1, 0.1]), 5.0, C2))
        assert h.b == 1.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            project(LinearModel(np.array([math.nan, 0.0]), 0.0, C2))

    @pytest.mark.parametrize("q", [1.0, 2.0, math.inf])
    @pytest.mark.parametrize("kind", [LINEAR, RELU_NN])
    def test_random_projections_feasible(self, q, kind):
        rng = np.random.default_rng(3)
        c = ConstraintSpec(W=0.7, B=0.4, Lam=1.3, q=q)
        for _ in range(50):
            if kind == LINEAR:
                raw = LinearModel(rng.normal(scale=3, size=3), rng.normal(scale=3), c)
            else:
                raw = ReluNetModel(rng.normal(scale=3, size=(4, 3)),
                                   rng.normal(scale=3, size=4),
                                   rng.normal(scale=3, size=4), c)
            h = project(raw)
            assert is_feasible(h, tol=1e-12)
            # idempotence: projecting a feasible model changes nothing
            assert np.array_equal(params_vec(project(h)), params_vec(h))


class TestMarginRange:
    def test_linear(self):
        assert margin_range(ConstraintSpec(W=2.0), LINEAR, 0.5) == (-1.0, 1.0)

    def test_relu_uses_lambda_w(self):
        c = ConstraintSpec(W=2.0, Lam=3.0)
        assert margin_range(c, RELU_NN, 0.5) == (-3.0, 3.0)

    def test_zero_distance(self):
        assert margin_range(C2, LINEAR, 0.0) == (0.0, 0.0)

    @pytest.mark.parametrize("q", [1.0, 2.0, math.inf])
    @pytest.mark.parametrize("kind", [LINEAR, RELU_NN])
    def test_margin_containment(self, q, kind):
        rng = np.random.default_rng(11)
        c = ConstraintSpec(W=1.5, B=0.8, Lam=1.2, q=q)
        p = c.p
        for _ in range(250):
            h = random_model(rng, kind, 2, c, n_hidden=3)
            x = random_ball_point(rng, 2, p)
            xp = random_ball_point(rng, 2, p)
            lo, hi = margin_range(c, kind, lp_norm(x - xp, p))
            m = score(h, xp) - score(h, x)
            assert lo - 1e-9 <= m <= hi + 1e-9

    @pytest.mark.parametrize("q", [2.0, math.inf])
    def test_linear_endpoints_achievable(self, q):
        rng = np.random.default_rng(7)
        c = ConstraintSpec(W=1.5, q=q)
        p = c.p
        for _ in range(50):
            x = random_ball_point(rng, 3, p)
            xp = random_ball_point(rng, 3, p)
            delta = xp - x
            if lp_norm(delta, p) < 1e-12:
                continue
            if q == 2.0:
                w = c.W * delta / np.linalg.norm(delta)
            else:
                w = c.W * np.sign(delta)
            h = LinearModel(w, 0.0, c)
            assert is_feasible(h, tol=1e-9)
            _, hi = margin_range(c, LINEAR, lp_norm(delta, p))
            assert score(h, xp) - score(h, x) == pytest.approx(hi, abs=1e-9)

    @pytest.mark.parametrize("kind", [LINEAR, RELU_NN])
    def test_equicontinuity(self, kind):
        rng = np.random.default_rng(13)
        c = ConstraintSpec(W=2.0, B=0.5, Lam=1.5)
        lip = c.w_effective(kind)
        for _ in range(100):
            h = random_model(rng, kind, 2, c, n_hidden=4)
            x = random_ball_point(rng, 2, 2.0)
            xp = random_ball_point(rng, 2, 2.0)
            assert abs(score(h, x) - score(h, xp)) <= \
                lip * lp_norm(x - xp, 2.0) + 1e-9


class TestConstraintSpec:
    def test_conjugates(self):
        assert ConstraintSpec(W=1.0, q=1.0).p == math.inf
        assert ConstraintSpec(W=1.0, q=2.0).p == 2.0
        assert ConstraintSpec(W=1.0, q=math.inf).p == 1.0

    def test_unsupported_q(self):
        with pytest.raises(ValueError):
            ConstraintSpec(W=1.0, q=3.0)

    def test_positive_w_required(self):
        with pytest.raises(ValueError):
            ConstraintSpec(W=0.0)


class TestParamsRoundTrip:
    @pytest.mark.parametrize("kind", [LINEAR, RELU_NN])
    def test_vec_round_trip(self, kind):
        rng = np.random.default_rng(17)
        h = random_model(rng, kind, 3, C2, n_hidden=4)
        h2 = with_params(h, params_vec(h))
        assert np.allclose(params_vec(h2), params_vec(h))

    @pytest.mark.parametrize("kind", [LINEAR, RELU_NN])
    def test_score_grads_match_finite_differences(self, kind):
        rng = np.random.default_rng(19)
        h = random_model(rng, kind, 2, C2, n_hidden=3)
        X = rng.uniform(-0.7, 0.7, size=(5, 2))
        G = score_grads(h, X)
        theta = params_vec(h)
        eps = 1e-6
        for j in range(theta.size):
            tp, tm = theta.copy(), theta.copy()
            tp[j] += eps
            tm[j] -= eps
            fd = (scores(with_params(h, tp), X) - scores(with_params(h, tm), X)) / (2 * eps)
            assert np.allclose(G[:, j], fd, atol=1e-5)


class TestSerialization:
    @pytest.mark.parametrize("kind", [LINEAR, RELU_NN])
    def test_text_round_trip_exact(self, kind):
        rng = np.random.default_rng(23)
        h = random_model(rng, kind, 3, ConstraintSpec(W=0.9, B=0.3, Lam=1.1, q=1.0),
                         n_hidden=4)
        h2 = from_text(to_text(h))
        assert h2.kind == h.kind
        assert np.array_equal(params_vec(h2), params_vec(h))
        assert h2.constraints == h.constraints

    def test_missing_field_rejected(self):
        with pytest.raises(ValueError):
            from_text("kind = linear\ndim = 2\n")
