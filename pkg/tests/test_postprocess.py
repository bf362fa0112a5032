import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvqa.dynamics import Distribution, sample_shots
from pvqa.model import Qubo, all_bits, index_to_bits
from pvqa.postprocess import (
    RepairModel,
    default_a_prime,
    delta_q_bound,
    greedy_repair,
    linear_penalty,
    repair_table,
    repair_trace_json,
    transform_distribution,
)
from pvqa.problems import Inequality, KHot, build_pair, constraint_of, gen_gpp

from conftest import random_qubo


def repair_model(instance):
    return RepairModel.with_default(build_pair(instance, 1.0).objective, constraint_of(instance))


def exhaustive_flip_max(q):
    e = q.energies()
    idx = np.arange(e.shape[0])
    return max(np.abs(e[idx ^ (1 << i)] - e).max() for i in range(q.n))


class TestPenaltyAndBound:
    def test_linear_penalty_examples(self):
        k = KHot(2, (0, 1, 2, 3))
        assert linear_penalty(k, (1, 1, 0, 0)) == 0
        assert linear_penalty(k, (1, 1, 1, 1)) == 2
        assert linear_penalty(Inequality((3, 5, 2), 0, 6), (1, 1, 0)) == 2

    def test_bound_examples(self):
        assert delta_q_bound(Qubo(2, {0: 3.0}, {(0, 1): -2.0})) == 5.0
        assert delta_q_bound(Qubo(3)) == 0.0
        assert 5.0 < default_a_prime(Qubo(2, {0: 3.0}, {(0, 1): -2.0})) < 5.00001
        assert default_a_prime(Qubo(2)) > 0

    def test_bound_dominates_every_flip(self, rng):
        for _ in range(5):
            q = random_qubo(8, rng)
            assert exhaustive_flip_max(q) <= delta_q_bound(q) + 1e-12

    def test_model_rejects_small_a_prime(self):
        q = Qubo(2, {0: 3.0}, {(0, 1): -2.0})
        with pytest.raises(ValueError, match="must exceed"):
            RepairModel(q, KHot(1, (0, 1)), 5.0)

    def test_model_rejects_bad_constraint(self):
        with pytest.raises(ValueError, match="condition 2"):
            RepairModel(Qubo(1), Inequality((9,), 0, 6), 1.0)


class TestGreedyRepair:
    def test_tie_goes_to_lowest_index(self):
        rm = RepairModel(Qubo(2), KHot(1, (0, 1)), default_a_prime(Qubo(2)))
        out, flips = greedy_repair(rm, (1, 1), trace=True)
        assert out.tolist() == [0, 1] and flips == [0]

    def test_local_minimum_unchanged(self, gpp8):
        rm = repair_model(gpp8[0])
        image = repair_table(rm)
        fixed = np.flatnonzero(image == np.arange(256))
        for b in fixed[:10]:
            x = index_to_bits(b, 8)
            assert np.array_equal(greedy_repair(rm, x), x)

    @pytest.mark.parametrize("kind", ["gpp", "qkp"])
    def test_exhaustive_soundness(self, kind, gpp8, qkp8):
        for inst in (gpp8 if kind == "gpp" else qkp8):
            rm = repair_model(inst)
            for b in range(256):
                x = index_to_bits(b, 8)
                y, flips = greedy_repair(rm, x, trace=True)
                assert rm.feasible[int(y @ (1 << np.arange(8)))]
                assert np.array_equal(greedy_repair(rm, y), y)
                # replay: every accepted flip strictly lowers Q'
                z, prev = x.copy(), rm.energy(x)
                for i in flips:
                    z[i] ^= 1
                    cur = rm.energy(z)
                    assert cur < prev
                    prev = cur
                if rm.feasible[b]:
                    assert rm.cost_table[int(y @ (1 << np.arange(8)))] <= rm.cost_table[b] + 1e-9

    def test_table_agrees_with_incremental_route(self, gpp8, qkp8):
        for inst in gpp8[:5] + qkp8[:5]:
            rm = repair_model(inst)
            table = repair_table(rm)
            direct = [int(greedy_repair(rm, index_to_bits(b, 8)) @ (1 << np.arange(8))) for b in range(256)]
            assert table.tolist() == direct

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 6))
    def test_random_inequality_property(self, seed, n):
        rng = np.random.default_rng(seed)
        q = random_qubo(n, rng)
        a = rng.integers(1, 6, size=n)
        b_max = int(rng.integers(a.max() - 1, a.sum() + 1))
        b_min = int(rng.integers(0, max(b_max - a.max() + 1, 0) + 1))
        rm = RepairModel.with_default(q, Inequality(tuple(int(v) for v in a), b_min, b_max))
        image = repair_table(rm)
        assert rm.feasible[image].all()
        assert np.array_equal(image[image], image)
        assert np.all(rm.energy_table[image] <= rm.energy_table + 1e-12)

    def test_trace_json(self, gpp8):
        data = json.loads(repair_trace_json(repair_model(gpp8[1]), [1] * 8))
        assert data["start"] == [1] * 8
        assert sum(data["end"]) == 4
        assert data["q_prime"][1] < data["q_prime"][0]


class TestTransform:
    def test_two_spin_scenario(self):
        rm = RepairModel(Qubo(2), KHot(1, (0, 1)), default_a_prime(Qubo(2)))
        d = transform_distribution(Distribution(np.array([0.5, 0.0, 0.0, 0.5])), rm)
        assert d.probs[rm.feasible].sum() == pytest.approx(1.0)

    def test_uniform_input(self, gpp8):
        rm = repair_model(gpp8[3])
        d = transform_distribution(Distribution(np.full(256, 1 / 256)), rm)
        assert d.probs.sum() == pytest.approx(1.0)
        assert set(d.support()) <= set(np.flatnonzero(rm.feasible))

    def test_fixed_points_unchanged(self, gpp8):
        rm = repair_model(gpp8[4])
        image = repair_table(rm)
        fixed = np.flatnonzero(image == np.arange(256))
        p = np.zeros(256)
        p[fixed] = 1 / fixed.size
        assert np.array_equal(transform_distribution(Distribution(p), rm).probs, p)

    def test_top_k_keeps_cheapest_shots(self, gpp8):
        rm = repair_model(gpp8[5])
        shots = sample_shots(Distribution(np.full(256, 1 / 256)), 100, seed=0)
        kept = transform_distribution(shots, rm, top_k=50)
        assert kept.shots == 50 and kept.probs.sum() == pytest.approx(1.0)
        full = transform_distribution(shots, rm)
        cutoff = rm.cost_table[kept.support()].max()
        assert np.all(rm.cost_table[full.support()][~np.isin(full.support(), kept.support())] >= cutoff)

    def test_top_k_ignored_for_exact(self, gpp8):
        rm = repair_model(gpp8[5])
        d = Distribution(np.full(256, 1 / 256))
        assert np.array_equal(transform_distribution(d, rm, top_k=5).probs, transform_distribution(d, rm).probs)

    def test_dimension_mismatch(self, gpp8):
        with pytest.raises(ValueError, match="dimension mismatch"):
            transform_distribution(Distribution(np.full(4, 0.25)), repair_model(gpp8[0]))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_mass_conserved(self, seed):
        rng = np.random.default_rng(seed)
        rm = repair_model(gen_gpp(6, 0.5, seed=seed))
        p = rng.dirichlet(np.ones(64))
        out = transform_distribution(Distribution(p), rm)
        assert out.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert out.probs[~rm.feasible].sum() == 0.0


def test_all_bits_consistent_with_table(gpp8):
    rm = repair_model(gpp8[0])
    e = np.array([rm.energy(x) for x in all_bits(8).astype(int)])
    assert np.allclose(e, rm.energy_table)
