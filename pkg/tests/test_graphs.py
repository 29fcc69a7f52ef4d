import io

import pytest

from dampen.core import BudgetAccountant, InvalidInputError, SearchBudgetError
from dampen.fixtures import (
    random_graph_instance,
    shared_neighbors_gadget,
    trend_graph,
)
from dampen.graphs import (
    EdgeGraph,
    TopKResult,
    delta_ebc,
    delta_ebc_value,
    ebc,
    ebc_oracle,
    ebc_problem,
    edge_flip_enumerator,
    global_sensitivity_ebc,
    parse_edge_list,
    priv_topk,
    topk_accuracy,
    true_topk,
)
from dampen.mechanisms import (
    expected_error,
    select_exponential,
    select_local_dampening,
    select_shifted_local_dampening,
)
from dampen.sensitivity import (
    bound_sensitivity,
    brute_sensitivity,
    check_admissibility,
    flatten_sensitivity,
)


class TestEbc:
    def test_gadget_scores(self):
        g = shared_neighbors_gadget()
        assert ebc(g, "a") == 7.5
        dropped = g.flip_edge("a", "b")
        assert ebc(dropped, "a") == 15.0

    def test_bridge_graph_score(self, bridge_graph):
        assert ebc(bridge_graph, "a") == 6.5
        assert ebc(bridge_graph, "b") == 6.5
        assert all(ebc(bridge_graph, f"v{i}") == 0.0 for i in range(6))

    def test_triangle_is_zero(self):
        g = EdgeGraph("xyz", [("x", "y"), ("y", "z"), ("x", "z")])
        assert all(ebc(g, v) == 0.0 for v in "xyz")

    def test_unknown_node_rejected(self, bridge_graph):
        with pytest.raises(InvalidInputError):
            ebc(bridge_graph, "nope")


class TestEbcOracle:
    def test_path_center(self):
        g = EdgeGraph("abc", [("a", "c"), ("c", "b")])
        assert ebc_oracle(g, "c") == 1.0
        assert ebc(g, "c") == 1.0

    def test_worked_examples(self, bridge_graph):
        assert ebc_oracle(bridge_graph, "a") == 6.5
        g = shared_neighbors_gadget()
        assert ebc_oracle(g, "a") == 7.5
        assert ebc_oracle(g.flip_edge("a", "b"), "a") == 15.0

    def test_agrees_with_fast_path_on_random_graphs(self, rng):
        for _ in range(40):
            g = random_graph_instance(rng, n=int(rng.integers(3, 10)))
            for v in g.nodes:
                assert ebc(g, v) == pytest.approx(ebc_oracle(g, v), abs=1e-9)

    def test_neighborhood_cap(self):
        g = shared_neighbors_gadget()
        with pytest.raises(SearchBudgetError):
            ebc_oracle(g, "a", max_neighborhood=3)


class TestSensitivityFormulas:
    def test_global_small_degree(self):
        g = EdgeGraph("abc", [("a", "b"), ("b", "c")])
        assert global_sensitivity_ebc(g) == 2.0   # max(0.5, 2)

    def test_global_formula_values(self):
        g = EdgeGraph(["x"], [], max_degree_bound=343)
        assert global_sensitivity_ebc(g) == pytest.approx(29_326.5)
        h = EdgeGraph(["x"], [], max_degree_bound=6)
        assert global_sensitivity_ebc(h) == 7.5

    def test_degree_based_delta_values(self, bridge_graph):
        isolated = EdgeGraph(["u", "v"], [])
        assert delta_ebc_value(isolated, 0, "u") == 0.0
        five = EdgeGraph(
            ["c", "x1", "x2", "x3", "x4", "x5"],
            [("c", f"x{i}") for i in range(1, 6)],
        )
        assert delta_ebc_value(five, 0, "c") == 5.0
        assert delta_ebc_value(five, 2, "c") == 10.5

    def test_degree_delta_admissible_on_random_graphs(self, rng):
        for _ in range(20):
            g = random_graph_instance(rng, n=6)
            problem = ebc_problem(g)
            report = check_admissibility(
                delta_ebc(), problem, edge_flip_enumerator(), max_t=2
            )
            assert report.passed, (g.edges(), report)

    def test_per_node_flip_bound(self, rng):
        for _ in range(15):
            g = random_graph_instance(rng, n=6)
            for flipped in edge_flip_enumerator().neighbors(g):
                for v in g.nodes:
                    d = max(g.degree(v), flipped.degree(v))
                    bound = max(d * (d - 1) / 4.0, float(d))
                    assert abs(ebc(g, v) - ebc(flipped, v)) <= bound + 1e-9


class TestPrivTopk:
    def test_full_range_is_a_permutation(self, bridge_graph, rng):
        res = priv_topk(bridge_graph, 4.0, 8, "em", rng)
        assert sorted(res.chosen) == sorted(bridge_graph.nodes)

    def test_generous_budget_finds_the_bridge_pair(self, bridge_graph, rng):
        acc = BudgetAccountant()
        res = priv_topk(
            bridge_graph, 2e5, 2, "sld", rng, accountant=acc,
            global_sensitivity=7.5,
        )
        assert set(res.chosen) == {"a", "b"}
        # exact two-step composition: the probability of drawing exactly
        # {a, b} is the product of per-iteration masses
        problem = ebc_problem(bridge_graph, global_sensitivity=7.5)
        delta = bound_sensitivity(delta_ebc(), 7.5, problem.database_size)
        _, first = select_shifted_local_dampening(problem, delta, 1e5, rng)
        mass = 0.0
        for lead in ("a", "b"):
            rest = tuple(v for v in bridge_graph.nodes if v != lead)
            reduced = ebc_problem(
                bridge_graph, candidates=rest, global_sensitivity=7.5
            )
            _, second = select_shifted_local_dampening(reduced, delta, 1e5, rng)
            other = "b" if lead == "a" else "a"
            mass += first.probability_of(lead) * second.probability_of(other)
        assert mass > 0.999

    def test_single_pick_equals_exponential_example(self, bridge_graph, rng):
        acc = BudgetAccountant()
        res = priv_topk(
            bridge_graph, 2.0, 1, "em", rng, accountant=acc,
            global_sensitivity=7.5,
        )
        assert len(res.chosen) == 1
        problem = ebc_problem(bridge_graph, global_sensitivity=7.5)
        _, dist = select_exponential(problem, 2.0, rng)
        assert dist.probability_of("a") == pytest.approx(0.22, abs=0.005)
        assert dist.probability_of("v2") == pytest.approx(0.09, abs=0.005)

    def test_budget_accounting_is_exact(self, bridge_graph, rng):
        for k in (1, 3, 7):
            acc = BudgetAccountant()
            eps = 1.0
            res = priv_topk(bridge_graph, eps, k, "pf", rng, accountant=acc,
                            scope=("topk", k))
            assert res.per_iteration_epsilon == pytest.approx(eps / k)
            assert acc.scope_total(("topk", k)) == pytest.approx(eps, abs=1e-12)
            assert len(set(res.chosen)) == k

    def test_k_bounds(self, bridge_graph, rng):
        with pytest.raises(InvalidInputError):
            priv_topk(bridge_graph, 1.0, 0, "em", rng)
        with pytest.raises(InvalidInputError):
            priv_topk(bridge_graph, 1.0, 9, "em", rng)


class TestTopkAccuracy:
    def test_overlap_fractions(self, bridge_graph):
        truth = true_topk(bridge_graph, 2)
        assert set(truth) == {"a", "b"}
        exact = TopKResult(chosen=truth, per_iteration_epsilon=1.0,
                           accountant_scope="s")
        assert topk_accuracy(exact, bridge_graph, 2) == 1.0
        disjoint = TopKResult(chosen=("v0", "v1"), per_iteration_epsilon=1.0,
                              accountant_scope="s")
        assert topk_accuracy(disjoint, bridge_graph, 2) == 0.0
        half = TopKResult(chosen=("a", "v0"), per_iteration_epsilon=1.0,
                          accountant_scope="s")
        assert topk_accuracy(half, bridge_graph, 2) == 0.5


class TestMechanismOrdering:
    def test_single_pick_mass_and_error_ordering(self, bridge_problem, rng):
        enum = edge_flip_enumerator()
        raw = brute_sensitivity(bridge_problem, enum, node_budget=500_000)
        flat = bound_sensitivity(
            flatten_sensitivity(raw, bridge_problem),
            bridge_problem.global_sensitivity, bridge_problem.database_size,
        )
        degree = bound_sensitivity(
            delta_ebc(), bridge_problem.global_sensitivity,
            bridge_problem.database_size,
        )
        _, em = select_exponential(bridge_problem, 2.0, rng)
        _, ld = select_local_dampening(bridge_problem, flat, 2.0, rng)
        _, sld = select_shifted_local_dampening(bridge_problem, degree, 2.0, rng)
        mass = {
            d.mechanism: d.probability_of("a") + d.probability_of("b")
            for d in (em, ld, sld)
        }
        assert mass["sld"] >= mass["ld"] >= mass["em"]
        errs = {d.mechanism: expected_error(d, bridge_problem)
                for d in (em, ld, sld)}
        assert errs["sld"] <= errs["ld"] + 1e-9 <= errs["em"] + 2e-9

    def test_trend_graph_sweep(self, rng):
        g = trend_graph()
        problem = ebc_problem(g)
        assert problem.global_sensitivity == 390.0    # pessimistic public bound
        enum = edge_flip_enumerator()
        raw = brute_sensitivity(problem, enum, node_budget=500_000)
        flat = bound_sensitivity(
            flatten_sensitivity(raw, problem),
            problem.global_sensitivity, problem.database_size,
        )
        degree = bound_sensitivity(
            delta_ebc(), problem.global_sensitivity, problem.database_size
        )
        for eps in (0.1, 1.0, 10.0):
            _, em = select_exponential(problem, eps, rng)
            _, ld = select_local_dampening(problem, flat, eps, rng)
            _, sld = select_shifted_local_dampening(problem, degree, eps, rng)
            e = [expected_error(d, problem) for d in (sld, ld, em)]
            assert e[0] <= e[1] + 1e-9 <= e[2] + 2e-9


class TestEdgeListParsing:
    def test_comments_dupes_and_loops(self):
        text = "# a comment\nu v\nv u\nw w\nu w\n"
        graph, report = parse_edge_list(io.StringIO(text))
        assert graph.num_edges() == 2
        assert report == {
            "edges_kept": 2, "duplicates_dropped": 1,
            "self_loops_dropped": 1, "comment_lines": 1,
        }

    def test_malformed_line_is_numbered(self):
        with pytest.raises(InvalidInputError, match="line 2"):
            parse_edge_list(io.StringIO("a b\na b c\n"))

    def test_node_order_is_first_seen(self):
        graph, _ = parse_edge_list(io.StringIO("b a\nc a\n"))
        assert graph.nodes == ("b", "a", "c")
