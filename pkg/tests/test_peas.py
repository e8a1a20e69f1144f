"""Tests for ET scoring, exploration, candidate selection and PEAS-then-query."""

import numpy as np
import pytest

from src.attacks.gradient import attack_pgd
from src.attacks.models import AttackSpec, ExternalParams, SimbaParams
from src.attacks.simba import QueryOracle
from src.augment.distance import PerceptualDistance
from src.augment.presets import LOW_RES
from src.augment.sampling import SamplingFunction, build_sampling
from src.peas import (
    Candidate,
    ETScore,
    SelectionStrategy,
    candidates_to_dict,
    expected_transferability,
    expected_transferability_batch,
    explore,
    peas_attack,
    peas_then_query,
    rank_candidates,
    select_candidate,
)
from src.utils.exceptions import AttackConfigError, PeasError

EPS = 8 / 255
PGD = AttackSpec("pgd", epsilon=EPS, steps=3)


def _candidate(index, et, start_et=0.0, natural=None, fooled=None, shape=(1, 2, 2)):
    return Candidate(
        index=index,
        start=np.full(shape, 0.1 * index, dtype=np.float32),
        adversarial=np.full(shape, 0.1 * index + 0.05, dtype=np.float32),
        et=ETScore(et, ()),
        start_et=ETScore(start_et, ()),
        distance=PerceptualDistance(0.0, 0.0),
        fools_victim_naturally=natural,
        adversarial_fools_victim=fooled,
    )


@pytest.fixture
def setup(make_conv_net):
    """Surrogate, two ranking models, a victim and one image with its label."""
    f_prime = make_conv_net(10)
    ranking = [("r1", make_conv_net(11)), ("r2", make_conv_net(12))]
    victim = make_conv_net(13)
    x = np.random.default_rng(0).uniform(0.2, 0.8, size=f_prime.input_shape).astype(np.float32)
    return f_prime, ranking, victim, x, 1


class TestExpectedTransferability:
    @pytest.mark.parametrize("bias,expected", [([50.0, 0.0], 0.0), ([0.0, 50.0], 1.0), ([0.0, 0.0], 0.5)])
    def test_single_model(self, make_dense_net, bias, expected):
        net = make_dense_net(np.zeros((4, 2), dtype=np.float32), np.array(bias, dtype=np.float32))
        score = expected_transferability(np.full((1, 1, 4), 0.5, dtype=np.float32), 0, [("m", net)])
        assert score.value == pytest.approx(expected, abs=1e-6)
        assert score.terms[0][0] == "m"

    def test_mean_over_models(self, make_dense_net):
        zeros = np.zeros((4, 2), dtype=np.float32)
        ranking = [
            ("even", make_dense_net(zeros)),
            ("wrong", make_dense_net(zeros, np.array([0.0, 50.0], dtype=np.float32))),
        ]
        score = expected_transferability(np.zeros((1, 1, 4), dtype=np.float32), 0, ranking)
        assert score.value == pytest.approx(0.75, abs=1e-6)

    def test_order_of_ranking_models_does_not_matter(self, setup):
        _, ranking, victim, x, y = setup
        models = ranking + [("v", victim)]
        a = expected_transferability(x, y, models)
        b = expected_transferability(x, y, list(reversed(models)))
        assert a.value == b.value
        assert 0.0 <= a.value <= 1.0

    def test_batch_matches_single(self, setup):
        _, ranking, _, x, y = setup
        batch = np.stack([x, 1.0 - x])
        scores = expected_transferability_batch(batch, y, ranking)
        assert scores[1].value == pytest.approx(expected_transferability(1.0 - x, y, ranking).value, abs=1e-6)
        assert expected_transferability_batch(batch[:0], y, ranking) == []

    def test_empty_ranking(self, setup):
        _, _, _, x, y = setup
        with pytest.raises(PeasError, match="non-empty ranking"):
            expected_transferability(x, y, [])


class TestSelectCandidate:
    def test_highest_adversarial_et(self):
        candidates = [_candidate(0, 0.2), _candidate(1, 0.9), _candidate(2, 0.5)]
        selection = select_candidate(candidates, SelectionStrategy())
        assert selection.index == 1
        assert np.array_equal(selection.image, candidates[1].adversarial)

    def test_ties_keep_lowest_index(self):
        candidates = [_candidate(0, 0.3), _candidate(1, 0.7), _candidate(2, 0.7)]
        assert select_candidate(candidates, SelectionStrategy()).index == 1

    def test_constant_shift_keeps_choice(self):
        values = [0.11, 0.52, 0.49, 0.3]
        shifted = [_candidate(i, v + 0.25) for i, v in enumerate(values)]
        plain = [_candidate(i, v) for i, v in enumerate(values)]
        assert select_candidate(shifted, SelectionStrategy()).index == select_candidate(plain, SelectionStrategy()).index

    def test_single_candidate(self):
        assert select_candidate([_candidate(0, 0.0)], SelectionStrategy()).index == 0

    def test_top1_augmented_returns_unattacked_start(self):
        candidates = [_candidate(0, 0.9, start_et=0.1), _candidate(1, 0.1, start_et=0.8)]
        selection = select_candidate(candidates, SelectionStrategy("top1-augmented"))
        assert selection.index == 1
        assert np.array_equal(selection.image, candidates[1].start)

    def test_random_strategies(self):
        candidates = [_candidate(i, 0.1 * i) for i in range(6)]
        picks = {select_candidate(candidates, SelectionStrategy("random-adversarial"), np.random.default_rng(s)).index
                 for s in range(30)}
        assert len(picks) > 1
        first = select_candidate(candidates, SelectionStrategy("random-augmented"), np.random.default_rng(4))
        again = select_candidate(candidates, SelectionStrategy("random-augmented"), np.random.default_rng(4))
        assert first.index == again.index
        assert np.array_equal(first.image, candidates[first.index].start)
        with pytest.raises(AttackConfigError, match="random generator"):
            select_candidate(candidates, SelectionStrategy("random-adversarial"))

    def test_oracle_prefers_candidates_that_fool_the_victim(self):
        candidates = [
            _candidate(0, 0.9, natural=False, fooled=False),
            _candidate(1, 0.4, natural=False, fooled=True),
            _candidate(2, 0.6, natural=False, fooled=True),
        ]
        assert select_candidate(candidates, SelectionStrategy("oracle-perfect")).index == 2

    def test_oracle_without_fooling_candidate_is_top1(self):
        candidates = [_candidate(0, 0.2, natural=False, fooled=False), _candidate(1, 0.8, natural=False, fooled=False)]
        assert select_candidate(candidates, SelectionStrategy("oracle-perfect")).index == 1

    def test_filtered_skips_natural_misclassifications(self):
        candidates = [_candidate(0, 0.9, natural=True, fooled=True), _candidate(1, 0.5, natural=False, fooled=False)]
        selection = select_candidate(candidates, SelectionStrategy("filtered-top1-adversarial"))
        assert selection.index == 1 and not selection.fallback

    def test_filtered_fallback_is_flagged(self):
        candidates = [_candidate(0, 0.4, natural=True, fooled=True), _candidate(1, 0.6, natural=True, fooled=True)]
        selection = select_candidate(candidates, SelectionStrategy("filtered-top1-augmented"))
        assert selection.fallback
        assert selection.index == 0  # start_et ties at 0.0

    def test_victim_flags_required(self):
        with pytest.raises(AttackConfigError, match="analysis mode"):
            select_candidate([_candidate(0, 0.5)], SelectionStrategy("oracle-perfect"))

    def test_empty_and_unknown(self):
        with pytest.raises(PeasError):
            select_candidate([], SelectionStrategy())
        with pytest.raises(AttackConfigError, match="Unknown selection strategy"):
            SelectionStrategy("top5")

    def test_rank_candidates_is_stable(self):
        candidates = [_candidate(0, 0.5), _candidate(1, 0.9), _candidate(2, 0.5), _candidate(3, 0.1)]
        assert [c.index for c in rank_candidates(candidates)] == [1, 0, 2, 3]


class TestExplore:
    def test_candidates_are_attacked_within_budget(self, setup):
        f_prime, ranking, _, x, y = setup
        sampling = build_sampling("S2", LOW_RES, seed=3)
        candidates = explore(x, y, f_prime, ranking, sampling, PGD, 5)
        assert [c.index for c in candidates] == list(range(5))
        for c in candidates:
            assert np.max(np.abs(c.adversarial - c.start)) <= EPS + 1e-6
            assert c.fools_victim_naturally is None
            assert 0.0 <= c.et.value <= 1.0
            assert c.distance.linf == pytest.approx(float(np.max(np.abs(c.start - x))), abs=1e-6)

    def test_worker_count_does_not_change_candidates(self, setup):
        f_prime, ranking, victim, x, y = setup
        sampling = SamplingFunction.noise(EPS, LOW_RES, seed=2)
        one = explore(x, y, f_prime, ranking, sampling, PGD, 40, victim=victim, workers=1)
        many = explore(x, y, f_prime, ranking, sampling, PGD, 40, victim=victim, workers=3)
        for a, b in zip(one, many):
            assert np.array_equal(a.adversarial, b.adversarial)
            assert a.et == b.et
            assert a.adversarial_fools_victim == b.adversarial_fools_victim

    def test_prefix_of_larger_exploration(self, setup):
        f_prime, ranking, _, x, y = setup
        sampling = build_sampling("S1", LOW_RES, seed=8)
        small = explore(x, y, f_prime, ranking, sampling, PGD, 3)
        large = explore(x, y, f_prime, ranking, sampling, PGD, 6)
        for a, b in zip(small, large):
            assert np.array_equal(a.start, b.start)
            assert np.allclose(a.adversarial, b.adversarial, atol=1e-5)

    def test_invalid_arguments(self, setup):
        f_prime, ranking, _, x, y = setup
        sampling = build_sampling("S2", LOW_RES)
        with pytest.raises(AttackConfigError, match=">= 1"):
            explore(x, y, f_prime, ranking, sampling, PGD, 0)
        with pytest.raises(AttackConfigError, match="base attack"):
            explore(x, y, f_prime, ranking, sampling, AttackSpec("simba"), 2)


class TestPeasAttack:
    def test_noise_exploration_matches_straight_line_loop(self, setup):
        f_prime, ranking, _, x, y = setup
        sampling = SamplingFunction.noise(EPS, LOW_RES, seed=5)
        n = 6
        best_index, best_et, best_image = -1, -1.0, None
        for i in range(n):
            start = sampling.stream(i).sample(x)
            adversarial = attack_pgd(f_prime, start, y, PGD).adversarial
            et = expected_transferability(adversarial, y, ranking).value
            if et > best_et:
                best_index, best_et, best_image = i, et, adversarial
        result = peas_attack(x, y, f_prime, ranking, sampling, PGD, n)
        assert result.selected_index == best_index
        assert np.allclose(result.x_star, best_image, atol=1e-5)
        assert len(result.candidates) == n and not result.fallback

    def test_reproducible(self, setup):
        f_prime, ranking, _, x, y = setup
        sampling = build_sampling("S2", LOW_RES, seed=1)
        a = peas_attack(x, y, f_prime, ranking, sampling, PGD, 4)
        b = peas_attack(x, y, f_prime, ranking, sampling, PGD, 4)
        assert a.selected_index == b.selected_index
        assert np.array_equal(a.x_star, b.x_star)

    def test_victim_strategies_need_a_victim(self, setup):
        f_prime, ranking, _, x, y = setup
        with pytest.raises(AttackConfigError, match="needs victim access"):
            peas_attack(x, y, f_prime, ranking, build_sampling("S2", LOW_RES), PGD, 2,
                        strategy=SelectionStrategy("oracle-perfect"))

    def test_oracle_fools_victim_whenever_top1_does(self, setup):
        f_prime, ranking, victim, x, y = setup
        sampling = build_sampling("S2", LOW_RES, seed=6)
        oracle = peas_attack(x, y, f_prime, ranking, sampling, PGD, 6,
                             strategy=SelectionStrategy("oracle-perfect"), victim=victim)
        top1 = select_candidate(oracle.candidates, SelectionStrategy())
        if oracle.candidates[top1.index].adversarial_fools_victim:
            assert oracle.candidates[oracle.selected_index].adversarial_fools_victim

    def test_candidates_to_dict(self):
        data = candidates_to_dict([_candidate(0, 0.3), _candidate(1, 0.6)], selected_index=1)
        assert data["selected_index"] == 1
        assert [c["et"] for c in data["candidates"]] == [0.3, 0.6]
        assert set(data["candidates"][0]) >= {"index", "start_et", "l2", "linf", "success_on_surrogate"}


class TestPeasThenQuery:
    def test_zero_queries_returns_selected_start(self, setup):
        f_prime, ranking, victim, x, y = setup
        sampling = build_sampling("S2", LOW_RES, seed=2)
        query = AttackSpec("simba", epsilon=EPS, simba=SimbaParams(max_queries=0))
        oracle = QueryOracle(victim)
        result = peas_then_query(x, y, f_prime, ranking, sampling, 3, query, oracle)
        expected = peas_attack(x, y, f_prime, ranking, sampling, AttackSpec("pgd", epsilon=EPS), 3).x_star
        assert np.array_equal(result.adversarial, expected)
        assert result.queries_used == 0 and oracle.queries == 0

    def test_every_query_comes_from_the_query_attack(self, setup):
        f_prime, ranking, victim, x, y = setup
        sampling = build_sampling("S2", LOW_RES, seed=2)
        oracle = QueryOracle(victim)
        query = AttackSpec("simba", epsilon=EPS, simba=SimbaParams(max_queries=25))
        result = peas_then_query(x, y, f_prime, ranking, sampling, 3, query, oracle)
        assert 1 <= result.queries_used <= 25
        assert oracle.queries == result.queries_used

    def test_reuses_given_candidates(self, setup):
        f_prime, ranking, victim, x, y = setup
        candidates = [_candidate(0, 0.1, shape=f_prime.input_shape), _candidate(1, 0.7, shape=f_prime.input_shape)]
        query = AttackSpec("simba", epsilon=EPS, simba=SimbaParams(max_queries=0))
        result = peas_then_query(
            x, y, f_prime, ranking, build_sampling("S2", LOW_RES), 2, query,
            QueryOracle(victim), candidates=candidates,
        )
        assert np.array_equal(result.adversarial, candidates[1].adversarial)

    def test_external_query_attack_starts_from_x_star(self, setup, query_attack_command):
        f_prime, ranking, victim, x, y = setup
        sampling = build_sampling("S2", LOW_RES, seed=2)
        oracle = QueryOracle(victim)
        query = AttackSpec("external", epsilon=EPS,
                           external=ExternalParams(command=query_attack_command(), mode="query", max_queries=5))
        result = peas_then_query(x, y, f_prime, ranking, sampling, 3, query, oracle, surrogate_id="f-prime")
        expected = peas_attack(x, y, f_prime, ranking, sampling, AttackSpec("pgd", epsilon=EPS), 3).x_star
        assert np.allclose(result.adversarial, expected, atol=1e-7)
        assert result.queries_used == 1 == oracle.queries

    def test_needs_a_query_attack(self, setup):
        f_prime, ranking, victim, x, y = setup
        with pytest.raises(AttackConfigError, match="query attack"):
            peas_then_query(x, y, f_prime, ranking, build_sampling("S2", LOW_RES), 2, PGD, QueryOracle(victim))
