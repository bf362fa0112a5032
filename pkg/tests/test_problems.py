import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvqa.model import all_bits, eval_qubo
from pvqa.problems import (
    BenchmarkParseError,
    ConstraintConditionError,
    GppInstance,
    Inequality,
    KHot,
    QkpInstance,
    brute_force_optima,
    constraint_of,
    derive_qkp,
    feasible_mask,
    format_qkp_benchmark,
    gen_gpp,
    gen_qkp_base,
    gpp_qubo,
    instance_from_json,
    instance_to_json,
    is_feasible,
    load_instance,
    parse_qkp_benchmark,
    qkp_qubo,
    save_instance,
)


class TestGpp:
    def test_complete_graph_at_full_density(self):
        g = gen_gpp(6, 1.0, seed=3)
        assert len(g.edges) == 15

    def test_deterministic(self):
        assert gen_gpp(8, 0.5, seed=11) == gen_gpp(8, 0.5, seed=11)

    def test_edge_count_binomial(self):
        # mean over 1000 graphs against the binomial mean, 3 sigma band
        pairs = 32 * 31 // 2
        counts = np.array([len(gen_gpp(32, 0.5, seed=s).edges) for s in range(1000)])
        sigma_mean = np.sqrt(pairs * 0.25 / 1000)
        assert abs(counts.mean() - 0.5 * pairs) < 3 * sigma_mean

    @pytest.mark.parametrize("n", [3, 7])
    def test_odd_nodes_rejected(self, n):
        with pytest.raises(ValueError, match="nodes must be even"):
            gen_gpp(n, 0.5, seed=0)

    def test_instance_validation(self):
        with pytest.raises(ValueError):
            GppInstance(4, ((0, 0),))
        with pytest.raises(ValueError):
            GppInstance(4, ((0, 1), (1, 0)))
        with pytest.raises(ValueError):
            GppInstance(4, ((0, 4),))

    def test_path_graph_cuts(self, path_graph):
        obj = gpp_qubo(path_graph, 1.0).objective
        assert eval_qubo(obj, (1, 1, 0, 0)) == 1.0
        assert eval_qubo(obj, (1, 0, 1, 0)) == 3.0

    def test_balanced_constraint_vanishes(self, gpp8):
        pair = gpp_qubo(gpp8[0], 2.0)
        e = pair.constraint.energies()
        balanced = all_bits(8).sum(axis=1) == 4
        assert np.all(e[balanced] == 0.0)
        assert np.all(e[~balanced] > 0.0)

    def test_objective_is_cut_size_on_balanced(self, gpp8):
        for g in gpp8:
            obj = gpp_qubo(g, 1.0).objective
            table = obj.energies()
            for b, x in enumerate(all_bits(8).astype(int)):
                if x.sum() == 4:
                    assert table[b] == g.cut_size(x)


class TestQkp:
    def test_toy_encoding(self, toy_qkp):
        pair = qkp_qubo(toy_qkp, 3.0)
        assert eval_qubo(pair.objective, (0, 0)) == 0.0
        assert eval_qubo(pair.constraint, (0, 0)) == 0.0
        assert eval_qubo(pair.objective, (1, 1)) == -10.0
        assert pair.penalty_coefficient * eval_qubo(pair.constraint, (1, 1)) == pytest.approx(3.0)

    def test_objective_is_negated_profit(self, qkp8):
        for q in qkp8:
            table = qkp_qubo(q, 1.0).objective.energies()
            for b, x in enumerate(all_bits(8).astype(int)):
                direct = sum(p for (i, j), p in q.profits.items() if x[i] and x[j])
                assert table[b] == pytest.approx(-direct, abs=1e-9)

    def test_derive_capacities(self):
        base = gen_qkp_base(100, 1.0, seed=5)
        assert derive_qkp(base, 100).profits == base.profits
        assert derive_qkp(base, 100).capacity == base.capacity
        base1000 = QkpInstance(100, base.profits, base.weights, 1000)
        assert derive_qkp(base1000, 50).capacity == 500
        assert derive_qkp(base1000, 33).capacity == 330

    def test_derive_truncates(self):
        base = gen_qkp_base(100, 0.5, seed=1)
        q = derive_qkp(base, 10)
        assert q.weights == base.weights[:10]
        assert all(j < 10 for _, j in q.profits)
        with pytest.raises(ValueError):
            derive_qkp(base, 101)

    def test_validation(self):
        with pytest.raises(ValueError):
            QkpInstance(2, {(0, 0): -1.0}, (1, 1), 2)
        with pytest.raises(ValueError):
            QkpInstance(2, {}, (0, 1), 2)


class TestConstraints:
    def test_gpp_khot(self, gpp8):
        assert constraint_of(gpp8[0]) == KHot(4, tuple(range(8)))

    def test_qkp_inequality(self):
        q = QkpInstance(3, {(0, 0): 1}, (3, 5, 2), 6)
        c = constraint_of(q)
        assert c == Inequality((3, 5, 2), 0, 6)
        assert is_feasible(c, (1, 0, 1))
        assert not is_feasible(c, (1, 1, 0))

    def test_condition_two_violation(self):
        q = QkpInstance(1, {(0, 0): 1}, (9,), 6)
        with pytest.raises(ConstraintConditionError, match="condition 2 violated"):
            constraint_of(q)

    def test_khot_membership(self):
        c = KHot(2, (0, 1, 2, 3))
        assert is_feasible(c, (1, 1, 0, 0))
        assert not is_feasible(c, (1, 1, 1, 0))

    def test_mask_agrees_with_direct_check(self, gpp8, qkp8):
        for inst in (gpp8[0], qkp8[0]):
            c = constraint_of(inst)
            mask = feasible_mask(c, 8)
            for b, x in enumerate(all_bits(8).astype(int)):
                if isinstance(inst, GppInstance):
                    direct = x.sum() == 4
                else:
                    direct = int(np.dot(inst.weights, x)) <= inst.capacity
                assert mask[b] == direct == is_feasible(c, x)


class TestOptima:
    def test_path_graph(self, path_graph):
        S, c_opt = brute_force_optima(path_graph, gpp_qubo(path_graph, 1.0))
        assert c_opt == 1.0
        assert S == {(1, 1, 0, 0), (0, 0, 1, 1)}

    def test_k4(self, k4):
        S, c_opt = brute_force_optima(k4, gpp_qubo(k4, 1.0))
        assert c_opt == 4.0
        assert len(S) == 6 and all(sum(s) == 2 for s in S)

    def test_toy_qkp(self, toy_qkp):
        S, c_opt = brute_force_optima(toy_qkp, qkp_qubo(toy_qkp, 1.0))
        assert c_opt == -10.0 and S == {(1, 1)}

    def test_rescan(self, gpp8, qkp8):
        for inst in gpp8[:3] + qkp8[:3]:
            pair = gpp_qubo(inst, 1.0) if isinstance(inst, GppInstance) else qkp_qubo(inst, 1.0)
            S, c_opt = brute_force_optima(inst, pair)
            c = constraint_of(inst)
            for x in itertools.product((0, 1), repeat=8):
                if is_feasible(c, x):
                    assert eval_qubo(pair.objective, x) >= c_opt - 1e-9
            for s in S:
                assert is_feasible(c, s)
                assert eval_qubo(pair.objective, s) == pytest.approx(c_opt)

    def test_tiny_instances(self):
        g = GppInstance(4, ((0, 1),))
        q = QkpInstance(2, {(0, 0): 1}, (1, 1), 1)
        assert brute_force_optima(q, qkp_qubo(q, 1.0))[1] == -1.0
        assert brute_force_optima(g, gpp_qubo(g, 1.0))[1] == 0.0

    def test_size_guard(self):
        g = GppInstance(26, ())
        with pytest.raises(ValueError, match="too large"):
            brute_force_optima(g, gpp_qubo(g, 1.0))


class TestBenchmarkFormat:
    def test_three_item_fixture(self, fixtures_dir):
        q = parse_qkp_benchmark((fixtures_dir / "three_items.txt").read_text())
        assert q.name == "three_items"
        assert q.profits == {(0, 0): 4.0, (0, 1): 2.0, (1, 1): 7.0, (1, 2): 5.0, (2, 2): 1.0}
        assert q.weights == (3, 5, 2) and q.capacity == 10

    def test_truncated_weights(self, fixtures_dir):
        text = (fixtures_dir / "three_items.txt").read_text().replace("3 5 2", "3 5")
        with pytest.raises(BenchmarkParseError, match="line 9: weight row has 2 values"):
            parse_qkp_benchmark(text)

    def test_truncated_file(self):
        with pytest.raises(BenchmarkParseError, match="unexpected end of file"):
            parse_qkp_benchmark("x\n3\n1 2 3\n")

    def test_round_trip(self, fixtures_dir):
        q = gen_qkp_base(100, 0.25, seed=9)
        assert parse_qkp_benchmark(format_qkp_benchmark(q)) == q
        base = load_instance(fixtures_dir / "base100.txt")
        assert base.n_items == 100 and base.capacity == 840
        assert parse_qkp_benchmark(format_qkp_benchmark(base)) == base

    def test_json_round_trip(self, tmp_path, gpp8, toy_qkp):
        for inst in (gpp8[2], toy_qkp):
            assert instance_from_json(instance_to_json(inst)) == inst
            path = tmp_path / "inst.json"
            save_instance(inst, path)
            assert load_instance(path) == inst


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([4, 6]))
def test_gpp_balanced_cut_property(seed, n):
    g = gen_gpp(n, 0.6, seed=seed)
    obj = gpp_qubo(g, 1.0).objective
    for x in itertools.product((0, 1), repeat=n):
        if sum(x) == n // 2:
            assert eval_qubo(obj, x) == g.cut_size(x)
