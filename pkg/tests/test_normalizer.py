"""EMA statistics, standardization, aggregation and snapshot tests."""

from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest

from rolereward import (
    NormalizerState,
    RewardVector,
    WeightVector,
    aggregate,
    restore,
    snapshot,
)
from rolereward.normalizer import REWARD_TYPES, RunningStat, SnapshotError, VersionError


def vector(value, valid=True):
    return RewardVector(value, value, value, valid)


class TestUpdate:
    def test_first_update_formula(self):
        state = NormalizerState(decay=0.99)
        state.update(0, vector(1.0))
        stat = state.stats[(0, "focus")]
        assert stat.mean == pytest.approx(0.01, abs=1e-15)
        assert stat.var == pytest.approx(0.99 * 1.0 + 0.01 * 1.0, abs=1e-15)
        assert stat.count == 1

    def test_constant_stream_converges_geometrically(self):
        c = 0.7
        decay = 0.9
        state = NormalizerState(decay=decay)
        for n in range(1, 60):
            state.update(0, vector(c))
            stat = state.stats[(0, "focus")]
            assert abs(stat.mean - c) <= decay**n * abs(c) + 1e-12

    def test_iid_stream_statistical_oracle(self):
        rng = np.random.default_rng(123)
        state = NormalizerState(decay=0.99, epsilon=1e-8)
        for _ in range(10_000):
            state.update(0, vector(float(rng.normal(0.5, 0.1))))
        stat = state.stats[(0, "ref")]
        assert 0.47 <= stat.mean <= 0.53

    def test_gated_zero_vectors_update_stats(self):
        state = NormalizerState()
        state.update(0, RewardVector(0.0, 0.0, 0.0, False))
        assert state.stats[(0, "focus")].count == 1

    def test_unknown_group_errors(self):
        state = NormalizerState(num_groups=3)
        with pytest.raises(ValueError):
            state.update(3, vector(1.0))
        with pytest.raises(ValueError):
            state.update(-1, vector(1.0))
        with pytest.raises(ValueError):
            state.normalize(7, vector(1.0))

    def test_variance_never_negative(self):
        rng = random.Random(5)
        state = NormalizerState(decay=0.8)
        for _ in range(2000):
            state.update(0, vector(rng.uniform(-5, 5)))
            for kind in REWARD_TYPES:
                assert state.stats[(0, kind)].var >= 0.0

    def test_count_monotone(self):
        state = NormalizerState()
        for expected in range(1, 10):
            state.update(1, vector(0.3))
            assert state.stats[(1, "focus")].count == expected


class TestNormalize:
    def test_bootstrap_identity(self):
        state = NormalizerState(epsilon=1e-8)
        normalized = state.normalize(0, vector(0.0))
        assert normalized.focus == 0.0
        assert normalized.focus_attr == 0.0
        assert normalized.ref == 0.0

    def test_direct_formula(self):
        state = NormalizerState(epsilon=1e-8)
        state.stats[(0, "focus")] = RunningStat(mean=0.5, var=0.04, count=10)
        normalized = state.normalize(0, RewardVector(0.7, 0.0, 0.0, True))
        assert normalized.focus == pytest.approx(1.0, abs=1e-6)

    def test_normalize_is_pure_read(self):
        state = NormalizerState()
        state.update(0, vector(0.4))
        before = snapshot(state)
        state.normalize(0, vector(0.9))
        assert snapshot(state) == before

    def test_format_valid_passes_through(self):
        state = NormalizerState()
        assert state.normalize(0, vector(1.0, valid=True)).format_valid
        assert not state.normalize(0, vector(1.0, valid=False)).format_valid

    def test_per_group_isolation(self):
        state = NormalizerState()
        baseline = state.normalize(1, vector(0.5))
        for _ in range(50):
            state.update(0, vector(0.9))
        after = state.normalize(1, vector(0.5))
        assert after == baseline

    def test_affine_invariance_when_variance_dominates_epsilon(self):
        # Holds once the identity bootstrap (var=1, which does not scale
        # with a) has decayed out of both states: decay^300 ~ 1e-14 here.
        rng = random.Random(31)
        checked = 0
        for _ in range(50):
            a = rng.uniform(0.2, 0.5)
            b = rng.uniform(0.0, 0.4)
            base = NormalizerState(epsilon=1e-8, decay=0.9)
            shifted = NormalizerState(epsilon=1e-8, decay=0.9)
            values = [rng.random() for _ in range(300)]
            for value in values:
                base.update(0, vector(value))
                shifted.update(0, vector(a * value + b))
            probe = rng.random()
            stat = base.stats[(0, "focus")]
            if a * a * stat.var >= 1e4 * base.epsilon:
                lhs = shifted.normalize(0, vector(a * probe + b)).focus
                rhs = base.normalize(0, vector(probe)).focus
                assert abs(lhs - rhs) <= 1e-3
                checked += 1
        assert checked > 0

    def test_convergent_standardization(self):
        # After burn-in, standardized outputs of an i.i.d. stream look N(0, 1).
        rng = np.random.default_rng(2024)
        state = NormalizerState(decay=0.99, epsilon=1e-8)
        outputs = []
        for index in range(10_000):
            value = float(rng.normal(0.5, 0.1))
            state.update(0, vector(value))
            outputs.append(state.normalize(0, vector(value)).focus)
        tail = np.array(outputs[-1000:])
        assert abs(tail.mean()) < 0.1
        assert 0.85 <= tail.std() <= 1.15


class TestAggregate:
    def test_reference_weights(self):
        normalized = NormalizerState().normalize(0, vector(1.0))
        weights = WeightVector(0.4, 0.2, 0.2)
        assert aggregate(normalized, weights) == pytest.approx(0.8, abs=1e-6)

    def test_zero_weights(self):
        normalized = NormalizerState().normalize(0, vector(123.0))
        assert aggregate(normalized, WeightVector(0.0, 0.0, 0.0)) == 0.0

    def test_dot_product(self):
        from rolereward.normalizer import NormalizedRewards

        normalized = NormalizedRewards(2.0, -1.0, 0.5, True)
        assert aggregate(normalized, WeightVector(0.4, 0.2, 0.2)) == pytest.approx(0.7)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            WeightVector(-0.1, 0.2, 0.2)
        with pytest.raises(ValueError):
            WeightVector(math.inf, 0.2, 0.2)


def random_state(rng: random.Random) -> NormalizerState:
    state = NormalizerState(
        epsilon=rng.choice([1e-8, 1e-6, 1e-4]),
        decay=rng.uniform(0.5, 0.999),
    )
    for _ in range(rng.randint(0, 12)):
        group = rng.randint(0, 5)
        for _ in range(rng.randint(1, 5)):
            state.update(
                group,
                RewardVector(rng.random(), rng.random(), rng.random(), rng.random() > 0.2),
            )
    return state


class TestSnapshot:
    def test_round_trip_identity_500_random_states(self):
        rng = random.Random(77)
        for _ in range(500):
            state = random_state(rng)
            restored = restore(snapshot(state))
            assert restored.epsilon == state.epsilon
            assert restored.decay == state.decay
            assert restored.stats == state.stats
            # bit-exact through a JSON text round trip as well
            assert snapshot(restore(json.loads(json.dumps(snapshot(state))))) == snapshot(state)

    def test_unsupported_version(self):
        document = snapshot(NormalizerState())
        document["version"] = 999
        with pytest.raises(VersionError):
            restore(document)

    def test_empty_state_document(self):
        document = snapshot(NormalizerState())
        assert document["stats"] == []
        assert document["version"] == 1
        restored = restore(document)
        normalized = restored.normalize(0, vector(0.25))
        assert normalized.focus == pytest.approx(0.25, abs=1e-6)

    def test_malformed_documents(self):
        with pytest.raises(SnapshotError):
            restore({"version": 1})
        with pytest.raises(SnapshotError):
            restore({"version": 1, "epsilon": 1e-8, "decay": 0.9, "stats": [{}]})
        with pytest.raises(SnapshotError):
            restore([1, 2, 3])
        with pytest.raises(SnapshotError):
            restore(
                {
                    "version": 1,
                    "epsilon": 1e-8,
                    "decay": 0.9,
                    "stats": [
                        {"group": 0, "reward": "sentiment", "mean": 0, "var": 1, "count": 1}
                    ],
                }
            )

    def test_schema_field_names(self):
        state = NormalizerState()
        state.update(2, vector(0.5))
        document = snapshot(state)
        assert set(document) == {"version", "epsilon", "decay", "stats"}
        assert set(document["stats"][0]) == {"group", "reward", "mean", "var", "count"}
        assert [row["reward"] for row in document["stats"]] == ["focus", "focus_attr", "ref"]
