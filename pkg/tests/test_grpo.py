"""Advantage, ratio, KL-estimate and clipped-objective tests, plus the
finite-difference gradient validation on the categorical toy policy."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from rolereward import (
    BanditBatchEntry,
    GrpoConfig,
    ResponseLogProbs,
    bandit_objective_and_gradient,
    group_advantages,
    grpo_gradient_check,
    grpo_objective,
    kl_estimate,
    token_ratios,
)
from rolereward.grpo import log_softmax
from rolereward.trainer import ToyCategoricalPolicy


def random_logprobs(rng, length=None):
    length = length or rng.randint(1, 6)
    def column():
        return tuple(-rng.uniform(0.01, 4.0) for _ in range(length))
    return ResponseLogProbs(column(), column(), column())


class TestGroupAdvantages:
    def test_uniform_rewards_zero_advantages(self):
        assert group_advantages([1.0, 1.0, 1.0], 1e-4) == [0.0, 0.0, 0.0]

    def test_two_element_case(self):
        advantages = group_advantages([0.0, 2.0], 1e-4)
        expected = 1.0 / (1.0 + 1e-4)
        assert advantages[0] == pytest.approx(-expected, abs=1e-9)
        assert advantages[1] == pytest.approx(expected, abs=1e-9)

    def test_sum_is_zero_on_1000_random_groups(self):
        rng = random.Random(404)
        for _ in range(1000):
            rewards = [rng.uniform(-3, 3) for _ in range(rng.randint(2, 9))]
            advantages = group_advantages(rewards, 1e-4)
            assert abs(sum(advantages)) <= 1e-12

    def test_population_std_at_most_one(self):
        rng = random.Random(5)
        for _ in range(200):
            rewards = [rng.uniform(-2, 2) for _ in range(rng.randint(2, 8))]
            advantages = group_advantages(rewards, 1e-4)
            mean = sum(advantages) / len(advantages)
            std = math.sqrt(sum((a - mean) ** 2 for a in advantages) / len(advantages))
            assert std <= 1.0 + 1e-12

    def test_requires_group_of_two(self):
        with pytest.raises(ValueError):
            group_advantages([1.0], 1e-4)


class TestTokenRatios:
    def test_on_policy_ratios_are_one(self):
        lp = ResponseLogProbs((-1.0, -2.0), (-1.0, -2.0), (-0.5, -0.5))
        assert token_ratios(lp) == [1.0, 1.0]

    def test_log_two_gap(self):
        lp = ResponseLogProbs((-1.0,), (-1.0 - math.log(2),), (-1.0,))
        assert token_ratios(lp)[0] == pytest.approx(2.0, abs=1e-12)

    def test_matches_elementwise_recomputation(self):
        rng = random.Random(10)
        for _ in range(100):
            lp = random_logprobs(rng)
            ratios = token_ratios(lp)
            for t, ratio in enumerate(ratios):
                assert ratio == pytest.approx(
                    math.exp(lp.logp_new[t] - lp.logp_old[t]), abs=1e-12
                )
                assert ratio > 0

    def test_validation(self):
        with pytest.raises(ValueError):
            ResponseLogProbs((-1.0,), (-1.0, -2.0), (-1.0,))
        with pytest.raises(ValueError):
            ResponseLogProbs((), (), ())
        with pytest.raises(ValueError):
            ResponseLogProbs((0.5,), (-1.0,), (-1.0,))
        with pytest.raises(ValueError):
            ResponseLogProbs((math.nan,), (-1.0,), (-1.0,))


class TestKlEstimate:
    def test_equal_policies_zero(self):
        lp = ResponseLogProbs((-1.0, -0.25), (-2.0, -2.0), (-1.0, -0.25))
        assert kl_estimate(lp) == [0.0, 0.0]

    def test_log_two_case(self):
        lp = ResponseLogProbs((-1.0 - math.log(2),), (-1.0,), (-1.0,))
        assert kl_estimate(lp)[0] == pytest.approx(2 - math.log(2) - 1, abs=1e-12)

    def test_non_negative_on_1000_random_pairs(self):
        rng = random.Random(2025)
        for _ in range(1000):
            lp = random_logprobs(rng)
            for value in kl_estimate(lp):
                assert value >= 0.0


class TestGrpoObjective:
    def test_on_policy_equals_mean_advantage(self):
        rng = random.Random(3)
        for _ in range(50):
            length = rng.randint(1, 5)
            column = tuple(-rng.uniform(0.1, 3.0) for _ in range(length))
            group = [ResponseLogProbs(column, column, column) for _ in range(4)]
            advantages = [rng.uniform(-2, 2) for _ in range(4)]
            value = grpo_objective(group, advantages, GrpoConfig(kl_beta=0.3))
            assert value == pytest.approx(sum(advantages) / 4, abs=1e-12)

    def test_positive_advantage_clip_caps_gain(self):
        lp = ResponseLogProbs((-0.5,), (-0.5 - math.log(2),), (-0.5,))
        value = grpo_objective([lp], [1.0], GrpoConfig(clip_epsilon=0.2, kl_beta=0.0))
        assert value == pytest.approx(1.2, abs=1e-12)

    def test_negative_advantage_not_rescued_by_clip(self):
        lp = ResponseLogProbs((-0.5,), (-0.5 - math.log(2),), (-0.5,))
        value = grpo_objective([lp], [-1.0], GrpoConfig(clip_epsilon=0.2, kl_beta=0.0))
        assert value == pytest.approx(-2.0, abs=1e-12)

    def test_token_and_response_order_invariance(self):
        rng = random.Random(8)
        group = [random_logprobs(rng, length=4) for _ in range(3)]
        advantages = [0.5, -1.0, 0.25]
        config = GrpoConfig()
        baseline = grpo_objective(group, advantages, config)

        permuted_tokens = [
            ResponseLogProbs(lp.logp_new[::-1], lp.logp_old[::-1], lp.logp_ref[::-1])
            for lp in group
        ]
        assert grpo_objective(permuted_tokens, advantages, config) == pytest.approx(
            baseline, abs=1e-12
        )

        order = [2, 0, 1]
        assert grpo_objective(
            [group[i] for i in order], [advantages[i] for i in order], config
        ) == pytest.approx(baseline, abs=1e-12)

    def test_shape_mismatch(self):
        lp = ResponseLogProbs((-1.0,), (-1.0,), (-1.0,))
        with pytest.raises(ValueError):
            grpo_objective([lp], [1.0, 2.0], GrpoConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GrpoConfig(clip_epsilon=0.0)
        with pytest.raises(ValueError):
            GrpoConfig(clip_epsilon=1.5)
        with pytest.raises(ValueError):
            GrpoConfig(kl_beta=-0.1)
        with pytest.raises(ValueError):
            GrpoConfig(adv_epsilon=0.0)
        with pytest.raises(ValueError):
            GrpoConfig(grpo_group_size=1)


def random_bandit_batch(rng: np.random.Generator, prompts=4, actions=5, group=4):
    logits = {}
    batch = []
    for p in range(prompts):
        pid = f"p{p}"
        logits[pid] = rng.normal(0.0, 1.0, actions)
        batch.append(
            BanditBatchEntry(
                prompt_id=pid,
                old_logits=rng.normal(0.0, 1.0, actions),
                ref_logits=rng.normal(0.0, 1.0, actions),
                candidate_indices=tuple(int(i) for i in rng.integers(0, actions, group)),
                advantages=tuple(float(a) for a in rng.normal(0.0, 1.5, group)),
            )
        )
    return ToyCategoricalPolicy(logits), batch


class TestGradientCheck:
    def test_randomized_batches_within_1e_minus_5(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            policy, batch = random_bandit_batch(rng)
            config = GrpoConfig(clip_epsilon=0.2, kl_beta=0.05)
            assert grpo_gradient_check(policy, batch, config) <= 1e-5

    def test_zero_advantage_zero_beta_gradient_is_exactly_zero(self):
        rng = np.random.default_rng(7)
        policy, batch = random_bandit_batch(rng)
        batch = [
            BanditBatchEntry(
                entry.prompt_id,
                entry.old_logits,
                entry.ref_logits,
                entry.candidate_indices,
                tuple(0.0 for _ in entry.advantages),
            )
            for entry in batch
        ]
        config = GrpoConfig(kl_beta=0.0)
        for entry in batch:
            _, gradient = bandit_objective_and_gradient(
                policy.logits[entry.prompt_id], entry, config
            )
            np.testing.assert_array_equal(gradient, np.zeros_like(gradient))

    def test_kl_gradient_stationary_at_equality(self):
        rng = np.random.default_rng(11)
        logits = rng.normal(0.0, 1.0, 6)
        entry = BanditBatchEntry(
            prompt_id="p",
            old_logits=logits.copy(),
            ref_logits=logits.copy(),
            candidate_indices=(0, 3),
            advantages=(0.0, 0.0),
        )
        _, gradient = bandit_objective_and_gradient(
            logits, entry, GrpoConfig(kl_beta=5.0)
        )
        np.testing.assert_allclose(gradient, np.zeros_like(gradient), atol=1e-15)

    def test_on_policy_objective_matches_generic_evaluator(self):
        # The bandit evaluator must agree with grpo_objective on one-token
        # responses built from the same log-probabilities.
        rng = np.random.default_rng(42)
        policy, batch = random_bandit_batch(rng, prompts=1)
        entry = batch[0]
        config = GrpoConfig(kl_beta=0.07)
        value, _ = bandit_objective_and_gradient(
            policy.logits[entry.prompt_id], entry, config
        )
        logp_new = log_softmax(policy.logits[entry.prompt_id])
        logp_old = log_softmax(entry.old_logits)
        logp_ref = log_softmax(entry.ref_logits)
        group = [
            ResponseLogProbs(
                (float(logp_new[c]),), (float(logp_old[c]),), (float(logp_ref[c]),)
            )
            for c in entry.candidate_indices
        ]
        expected = grpo_objective(group, list(entry.advantages), config)
        assert value == pytest.approx(expected, abs=1e-12)
