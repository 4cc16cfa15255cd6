import math

import numpy as np
import pytest

from dynal.kernels import KernelSpec, cross_gram
from dynal.tradeoff import (
    AldConfig,
    AldEvaluator,
    ChainState,
    HyperPriorBounds,
    McmcConfig,
    adaptive_tau2,
    ald_distance,
    beta_log_density,
    gibbs_step_alpha,
    gibbs_step_beta,
    gibbs_step_eta,
    initial_state,
    run_chain,
)


class ScriptedRng:
    """Deterministic generator stub for driving Metropolis steps."""

    def __init__(self, normals=(), uniforms=()):
        self._normals = list(normals)
        self._uniforms = list(uniforms)

    def normal(self, loc, scale):
        return self._normals.pop(0)

    def random(self):
        return self._uniforms.pop(0)


class TestBetaLogDensity:
    def test_uniform_case_is_flat(self):
        for eta in (0.1, 0.5, 0.9):
            assert beta_log_density(eta, 1.0, 1.0) == pytest.approx(0.0)

    def test_linear_density_closed_form(self):
        # Beta(2, 1) has density 2*eta
        assert beta_log_density(0.5, 2.0, 1.0) == pytest.approx(math.log(1.0))
        assert beta_log_density(0.25, 2.0, 1.0) == pytest.approx(math.log(0.5))

    def test_u_shape_has_interior_minimum_at_half(self):
        grid = np.linspace(0.01, 0.99, 99)
        dens = [beta_log_density(e, 0.5, 0.5) for e in grid]
        assert np.argmin(dens) == np.argmin(np.abs(grid - 0.5))

    def test_endpoints_return_sentinel(self):
        assert beta_log_density(0.0, 2.0, 2.0) == -math.inf
        assert beta_log_density(1.0, 2.0, 2.0) == -math.inf


class TestAdaptiveTau2:
    def test_worked_example_near_upper_bound(self):
        assert adaptive_tau2(0.75, (0.0, 1.0)) == pytest.approx(
            ((1 - 0.75) / 3) ** 2)
        assert adaptive_tau2(0.75, (0.0, 1.0)) == pytest.approx(0.007,
                                                                abs=5e-4)

    def test_midpoint_maximizes_variance(self):
        support = (0.0, 1.0)
        mid = adaptive_tau2(0.5, support)
        for c in (0.1, 0.3, 0.7, 0.95):
            assert adaptive_tau2(c, support) <= mid

    def test_center_at_half(self):
        assert adaptive_tau2(0.5, (0.0, 1.0)) == pytest.approx((0.5 / 3) ** 2)

    def test_floor_at_boundary(self):
        assert adaptive_tau2(0.0, (0.0, 1.0)) == pytest.approx(1e-6)


def least_squares_delta(spec, X_o, x_hat):
    """Independent oracle: explicit least squares in an eigenfeature basis
    of the joint Gram matrix."""
    full = np.vstack([X_o, np.atleast_2d(x_hat)])
    K = cross_gram(spec, full, full)
    w, V = np.linalg.eigh(K)
    w = np.clip(w, 0.0, None)
    features = V * np.sqrt(w)  # row i is phi(x_i) in this basis
    A = features[:-1].T
    b = features[-1]
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return float(np.sum((A @ coef - b) ** 2))


class TestAldDistance:
    def test_training_point_is_linearly_dependent(self):
        X = np.array([[0.0], [1.0], [2.0]])
        config = AldConfig(kernel=KernelSpec("matern32"))
        delta, a_star = ald_distance(config, X, [1.0])
        assert delta == pytest.approx(0.0, abs=1e-6)
        assert a_star[1] == pytest.approx(1.0, abs=1e-3)

    def test_far_candidate_approaches_prior_variance(self):
        X = np.array([[0.0], [1.0]])
        config = AldConfig(kernel=KernelSpec("matern32", signal_variance=2.0,
                                             length_scale=0.5))
        delta, _ = ald_distance(config, X, [50.0])
        assert delta == pytest.approx(2.0, abs=1e-6)

    def test_matches_least_squares_oracle(self):
        spec = KernelSpec("matern32", length_scale=0.8)
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, (3, 1))
        x_hat = rng.uniform(-1, 1, 1)
        delta, _ = ald_distance(AldConfig(kernel=spec), X, x_hat)
        assert delta == pytest.approx(least_squares_delta(spec, X, x_hat),
                                      abs=1e-8)

    def test_oracle_equivalence_over_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(1, 8))
            d = int(rng.integers(1, 3))
            spec = KernelSpec("matern32",
                              signal_variance=float(rng.uniform(0.5, 2.0)),
                              length_scale=float(rng.uniform(0.5, 2.0)))
            X = rng.uniform(-2, 2, (n, d))
            x_hat = rng.uniform(-2, 2, d)
            delta, _ = ald_distance(AldConfig(kernel=spec), X, x_hat)
            assert delta == pytest.approx(
                least_squares_delta(spec, X, x_hat), abs=1e-8)

    def test_memoized_lookup_matches_direct(self):
        evaluator = AldEvaluator(AldConfig(kernel=KernelSpec("matern32")),
                                 np.array([[0.0], [1.0]]))
        direct, _ = evaluator.distance([0.4])
        assert evaluator.distance_by_index(7, [0.4]) == pytest.approx(direct)
        # cached value returned without recomputation
        assert evaluator.distance_by_index(7, [99.0]) == pytest.approx(direct)


BOUNDS = HyperPriorBounds()


class TestShapeSteps:
    def test_out_of_support_proposal_rejected(self):
        state = ChainState(alpha=1.0, beta=1.0, eta=0.5)
        gibbs_step_alpha(state, BOUNDS, ScriptedRng(normals=[7.0]))
        assert state.alpha == 1.0
        gibbs_step_beta(state, BOUNDS, ScriptedRng(normals=[0.01]))
        assert state.beta == 1.0

    def test_identity_proposal_accepted(self):
        state = ChainState(alpha=2.0, beta=1.5, eta=0.4)
        gibbs_step_alpha(state, BOUNDS, ScriptedRng(normals=[2.0],
                                                    uniforms=[0.999]))
        assert state.alpha == 2.0  # ratio 1, accepted as the same value

    def test_acceptance_ratio_matches_hand_computation(self):
        # eta=0.9, beta=0.5, alpha 1.0 -> 2.0
        state = ChainState(alpha=1.0, beta=0.5, eta=0.9)
        log_r = (beta_log_density(0.9, 2.0, 0.5)
                 - beta_log_density(0.9, 1.0, 0.5))
        r = math.exp(log_r)
        assert r > 1  # this proposal is uphill, always accepted
        gibbs_step_alpha(state, BOUNDS, ScriptedRng(normals=[2.0]))
        assert state.alpha == 2.0

        # mirrored beta move, downhill: accepted iff u < r
        state = ChainState(alpha=0.5, beta=2.0, eta=0.1)
        log_r = (beta_log_density(0.1, 0.5, 1.0)
                 - beta_log_density(0.1, 0.5, 2.0))
        r = math.exp(log_r)
        assert r < 1
        state_rej = ChainState(alpha=0.5, beta=2.0, eta=0.1)
        gibbs_step_beta(state_rej, BOUNDS,
                        ScriptedRng(normals=[1.0], uniforms=[r * 1.01]))
        assert state_rej.beta == 2.0
        state_acc = ChainState(alpha=0.5, beta=2.0, eta=0.1)
        gibbs_step_beta(state_acc, BOUNDS,
                        ScriptedRng(normals=[1.0], uniforms=[r * 0.99]))
        assert state_acc.beta == 1.0


def make_ald(X, length_scale=1.0, nu=0.001):
    return AldEvaluator(
        AldConfig(kernel=KernelSpec("matern32", length_scale=length_scale),
                  nu=nu),
        X,
    )


class TestEtaStep:
    def test_gate_closed_when_candidate_duplicates_training_point(self):
        X = np.array([[0.0], [1.0]])
        ald = make_ald(X)
        scorer = lambda eta: (0, np.array([0.0]))  # nominates a training point
        state = ChainState(alpha=1.0, beta=1.0, eta=0.5)
        eta, delta, accepted = gibbs_step_eta(
            state, scorer, ald, ScriptedRng(normals=[0.6]))
        assert eta == 0.5 and not accepted
        assert delta < ald.config.nu

    def test_identity_proposal_with_open_gate_accepted(self):
        X = np.array([[0.0]])
        ald = make_ald(X)
        scorer = lambda eta: (0, np.array([10.0]))  # far candidate
        state = ChainState(alpha=2.0, beta=3.0, eta=0.5)
        eta, delta, accepted = gibbs_step_eta(
            state, scorer, ald, ScriptedRng(normals=[0.5]))
        assert accepted and eta == 0.5
        assert delta >= ald.config.nu

    def test_uniform_prior_accepts_every_open_gate_proposal(self):
        # alpha = beta = 1 collapses the prior ratio to 1; acceptance rate
        # equals the fraction of in-support proposals with an open gate.
        X = np.array([[0.0]])
        ald = make_ald(X)
        scorer = lambda eta: (0, np.array([10.0]))
        state = ChainState(alpha=1.0, beta=1.0, eta=0.5)
        rng = np.random.default_rng(0)
        in_support = 0
        accepted_count = 0
        for _ in range(1000):
            before = state.eta
            eta, delta, accepted = gibbs_step_eta(state, scorer, ald, rng)
            if not math.isnan(delta):
                in_support += 1
                assert accepted  # gate open + flat prior => always accept
            accepted_count += accepted
        assert accepted_count == in_support


class TestRunChain:
    def test_single_iteration_returns_single_sample(self):
        X = np.array([[0.0]])
        ald = make_ald(X)
        scorer = lambda eta: (0, np.array([10.0]))
        rng = np.random.default_rng(1)
        eta_bar, chain = run_chain((1.0, 1.0, 0.3), McmcConfig(iterations=1),
                                   BOUNDS, scorer, ald, rng)
        assert len(chain) == 1
        assert eta_bar == pytest.approx(chain.eta[0])

    def test_infinite_threshold_freezes_eta(self):
        X = np.array([[0.0]])
        ald = AldEvaluator(
            AldConfig(kernel=KernelSpec("matern32"), nu=1e12), X)
        scorer = lambda eta: (0, np.array([10.0]))
        rng = np.random.default_rng(2)
        eta_bar, chain = run_chain((1.0, 1.0, 0.3),
                                   McmcConfig(iterations=200), BOUNDS,
                                   scorer, ald, rng)
        assert eta_bar == pytest.approx(0.3)
        assert np.all(chain.eta == 0.3)

    def test_support_invariants_and_determinism(self):
        X = np.array([[0.0], [0.5]])
        scorer = lambda eta: (0, np.array([10.0]))
        histories = []
        for _ in range(2):
            rng = np.random.default_rng(7)
            ald = make_ald(X)
            _, chain = run_chain((2.0, 3.0, 0.4),
                                 McmcConfig(iterations=1000), BOUNDS,
                                 scorer, ald, rng)
            assert np.all(chain.alpha >= BOUNDS.a)
            assert np.all(chain.alpha <= BOUNDS.b)
            assert np.all(chain.beta >= BOUNDS.a)
            assert np.all(chain.beta <= BOUNDS.b)
            assert np.all(chain.eta >= 0.0)
            assert np.all(chain.eta <= 1.0)
            histories.append(np.column_stack([chain.alpha, chain.beta,
                                              chain.eta]))
        assert np.array_equal(histories[0], histories[1])

    def test_gate_soundness_recorded_in_history(self):
        X = np.array([[0.0], [0.5]])
        rng = np.random.default_rng(8)
        pool = np.linspace(-3, 3, 50)[:, None]
        scorer = lambda eta: (int(eta * 49), pool[int(eta * 49)])
        ald = make_ald(X, nu=0.01)
        _, chain = run_chain((1.0, 1.0, 0.5), McmcConfig(iterations=500),
                             BOUNDS, scorer, ald, rng)
        changed = chain.eta[1:] != chain.eta[:-1]
        for s in np.flatnonzero(changed) + 1:
            assert chain.accepted[s]
            assert chain.delta[s] >= ald.config.nu

    def test_accept_all_chain_is_symmetric_about_half(self):
        # With a flat prior and an always-open gate the recorded walk is
        # symmetric about 0.5; the pooled mean of several independent
        # chains must sit within 3 standard errors of 0.5.
        X = np.array([[0.0]])
        scorer = lambda eta: (0, np.array([10.0]))
        means = []
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            ald = make_ald(X)
            eta0 = float(rng.uniform())
            eta_bar, _ = run_chain((1.0, 1.0, eta0),
                                   McmcConfig(iterations=1000),
                                   HyperPriorBounds(a=0.999999, b=1.000001),
                                   scorer, ald, rng)
            means.append(eta_bar)
        se = np.std(means, ddof=1) / math.sqrt(len(means))
        assert abs(np.mean(means) - 0.5) <= 3 * se

    def test_invalid_initial_state_rejected(self):
        X = np.array([[0.0]])
        ald = make_ald(X)
        scorer = lambda eta: (0, np.array([10.0]))
        with pytest.raises(ValueError):
            run_chain((0.0, 1.0, 0.5), McmcConfig(), BOUNDS, scorer, ald,
                      np.random.default_rng(0))
        with pytest.raises(ValueError):
            run_chain((1.0, 1.0, 1.5), McmcConfig(), BOUNDS, scorer, ald,
                      np.random.default_rng(0))

    def test_initial_state_drawn_from_priors(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            a, b, e = initial_state(BOUNDS, rng)
            assert BOUNDS.a <= a <= BOUNDS.b
            assert BOUNDS.a <= b <= BOUNDS.b
            assert 0.0 <= e <= 1.0
