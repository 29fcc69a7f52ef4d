import math

import numpy as np
import pytest

from dampen.core import BudgetAccountant, InvalidInputError
from dampen.fixtures import (
    TINY_TABLE_SCHEMA,
    TOY_TABLE_ATTRIBUTES,
    random_table_instance,
    separable_table,
)
from dampen.trees import (
    CandidateCache,
    Categorical,
    Continuous,
    Internal,
    LabeledTable,
    Leaf,
    TableSchema,
    accuracy,
    bin_index,
    build_diffp_id3,
    build_id3,
    candidates_ig,
    classify,
    cross_validate,
    discretize,
    f_add,
    g_remove,
    global_sensitivity_ig,
    h_pair,
    ig_utility,
    ls0_ig,
    ls_t_ig,
    noisy_count,
    row_edit_enumerator,
    schema_from_json,
)


def two_value_table(rows):
    return LabeledTable(TINY_TABLE_SCHEMA, rows)


def count_matrix(table):
    counts = table.counts("A")
    return tuple(
        tuple(counts[j][c] for c in table.schema.class_values) for j in (0, 1)
    )


def matrix_ls0(matrix):
    return max(h_pair(sum(row), b) for row in matrix for b in row)


def exhaustive_ls_t(table, t):
    """BFS over typed single-row edits of the contingency counts."""
    start = count_matrix(table)
    seen = {start}
    frontier = [start]
    best = matrix_ls0(start)
    for _ in range(t):
        nxt = []
        for m in frontier:
            for j in range(2):
                for c in range(2):
                    for d in (+1, -1):
                        if d < 0 and m[j][c] == 0:
                            continue
                        mm = [list(r) for r in m]
                        mm[j][c] += d
                        key = tuple(tuple(r) for r in mm)
                        if key not in seen:
                            seen.add(key)
                            nxt.append(key)
                            best = max(best, matrix_ls0(key))
        frontier = nxt
    return best


class TestSplitScore:
    def test_pure_split_scores_zero(self):
        table = two_value_table(
            [{"A": 0, "y": "c0"}, {"A": 0, "y": "c0"}, {"A": 1, "y": "c1"}]
        )
        assert ig_utility(table, "A") == 0.0

    def test_mixed_split_hand_value(self):
        # one value holding one row of each class, the other holding a pure
        # pair: minus the size-scaled conditional entropy gives -2
        table = two_value_table(
            [{"A": 0, "y": "c0"}, {"A": 0, "y": "c1"},
             {"A": 1, "y": "c0"}, {"A": 1, "y": "c0"}]
        )
        score = ig_utility(table, "A")
        assert score == pytest.approx(-2.0)
        # independent entropy route
        h_cond = 0.0
        for tau_j, cells in ((2, (1, 1)), (2, (2, 0))):
            for tau_jc in cells:
                if tau_jc:
                    h_cond -= (tau_jc / tau_j) * math.log2(tau_jc / tau_j) * tau_j
        assert score == pytest.approx(-h_cond)

    def test_empty_table_scores_zero(self):
        assert ig_utility(two_value_table([]), "A") == 0.0

    def test_global_sensitivity_values(self):
        assert global_sensitivity_ig(0) == pytest.approx(1.4426950408889634)
        assert global_sensitivity_ig(3) == pytest.approx(2 + 1.4426950408889634)
        assert global_sensitivity_ig(1) == pytest.approx(1 + 1.4426950408889634)


class TestDistanceZero:
    def test_empty_table(self):
        assert ls0_ig(two_value_table([]), "A") == 0.0

    def test_single_row_movement(self):
        table = two_value_table([{"A": 0, "y": "c1"}])
        # the empty (0, c0) cell gains the most from one addition
        assert ls0_ig(table, "A") == pytest.approx(f_add(1) - f_add(0))
        assert f_add(1) - f_add(0) == pytest.approx(2.0)

    def test_matches_exhaustive_single_edits(self, rng):
        enum = row_edit_enumerator(TINY_TABLE_SCHEMA)
        for _ in range(80):
            table = random_table_instance(rng, max_rows=6)
            base = ig_utility(table, "A")
            want = max(
                (abs(base - ig_utility(nb, "A")) for nb in enum.neighbors(table)),
                default=0.0,
            )
            assert ls0_ig(table, "A") == pytest.approx(want, abs=1e-9)


class TestCandidates:
    def test_base_case(self):
        table = two_value_table(
            [{"A": 0, "y": "c0"}, {"A": 0, "y": "c0"}, {"A": 0, "y": "c1"}]
        )
        assert candidates_ig(table, "A", 0, 0, "c1") == frozenset({(3, 1)})

    def test_size_gate_blocks_addition(self):
        table = two_value_table(
            [{"A": 0, "y": "c0"}, {"A": 0, "y": "c0"}, {"A": 0, "y": "c1"}]
        )
        # (3, 1) with tau = 3: the addition move is gated off
        assert candidates_ig(table, "A", 1, 0, "c1") == frozenset({(2, 0)})

    def test_removal_guard(self):
        table = two_value_table(
            [{"A": 0, "y": "c1"}, {"A": 1, "y": "c0"},
             {"A": 1, "y": "c0"}, {"A": 1, "y": "c1"}]
        )
        # (1, 0) for (j=0, c=c0): nothing to remove, addition applies
        assert candidates_ig(table, "A", 1, 0, "c0") == frozenset({(2, 0)})

    def test_cache_is_transparent(self, rng):
        for _ in range(25):
            table = random_table_instance(rng, max_rows=5)
            cache = CandidateCache()
            for t in (0, 1, 2, 3):
                for j in (0, 1):
                    for c in ("c0", "c1"):
                        assert candidates_ig(table, "A", t, j, c, cache) == (
                            candidates_ig(table, "A", t, j, c)
                        )

    def test_pairs_are_reachable_counts(self, rng):
        for _ in range(25):
            table = random_table_instance(rng, max_rows=5)
            counts = table.counts("A")
            for j in (0, 1):
                a0 = sum(counts[j].values())
                for c in ("c0", "c1"):
                    b0 = counts[j][c]
                    for t in (1, 2, 3):
                        for a, b in candidates_ig(table, "A", t, j, c):
                            assert 0 <= b <= a
                            # p removals and q additions, p + q = t
                            p = b0 - b
                            q = (a - a0) + p
                            assert p >= 0 and q >= 0 and p + q == t

    def test_gate_makes_recursion_undershoot(self):
        # with every row on one attribute value the gate freezes the
        # expansion, while an actual added row keeps raising the bound;
        # the ungated distance-t sensitivity sees it
        table = two_value_table(
            [{"A": 0, "y": "c0"}, {"A": 0, "y": "c0"}]
        )
        gated = max(
            h_pair(a, b)
            for t in (0, 1)
            for c in ("c0", "c1")
            for a, b in candidates_ig(table, "A", t, 0, c)
        )
        assert exhaustive_ls_t(table, 1) > gated + 0.4
        assert ls_t_ig(table, 1, "A") == pytest.approx(exhaustive_ls_t(table, 1))


class TestDistanceT:
    def test_distance_zero_equals_ls0(self, rng):
        for _ in range(20):
            table = random_table_instance(rng, max_rows=5)
            assert ls_t_ig(table, 0, "A") == pytest.approx(ls0_ig(table, "A"))

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(120):
            table = random_table_instance(rng, max_rows=6)
            cache = CandidateCache()
            for t in (0, 1, 2, 3):
                got = ls_t_ig(table, t, "A", cache)
                want = exhaustive_ls_t(table, t)
                assert got == pytest.approx(want, abs=1e-9), (table.rows, t)

    def test_monotone_and_incremental(self, rng):
        table = random_table_instance(rng, max_rows=5)
        cache = CandidateCache()
        values = [ls_t_ig(table, t, "A", cache) for t in range(6)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_movement_potentials_monotone(self):
        fs = [f_add(x) for x in range(2001)]
        gs = [g_remove(x) for x in range(2001)]
        assert all(a <= b + 1e-12 for a, b in zip(fs, fs[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(gs, gs[1:]))

    def test_ls0_below_global_bound_with_worst_case(self, rng):
        for _ in range(40):
            n = int(rng.integers(0, 201))
            rows = [
                {"A": int(rng.integers(2)), "y": ("c0", "c1")[int(rng.integers(2))]}
                for _ in range(n)
            ]
            table = two_value_table(rows)
            assert ls0_ig(table, "A") <= global_sensitivity_ig(n) + 1e-9
        # single-value single-class tables attain the exact size-n supremum,
        # which approaches the closed-form bound from below
        n = 200
        worst = two_value_table([{"A": 0, "y": "c0"}] * n)
        attained = ls0_ig(worst, "A")
        assert attained == pytest.approx(f_add(n), abs=1e-12)
        assert attained <= global_sensitivity_ig(n)
        assert global_sensitivity_ig(n) - attained < 0.01


class TestNoisyCount:
    def test_huge_budget_recovers_count(self, rng):
        assert noisy_count(42, 1e9, rng) == pytest.approx(42, abs=1e-6)

    def test_variance_matches_laplace(self, rng):
        eps = 0.7
        draws = np.array([noisy_count(10, eps, rng) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(10, abs=0.05)
        assert draws.var() == pytest.approx(2 / eps ** 2, rel=0.05)

    def test_seeded_reproducibility(self):
        a = noisy_count(5, 1.0, np.random.default_rng(3))
        b = noisy_count(5, 1.0, np.random.default_rng(3))
        assert a == b


class TestBuilder:
    def test_depth_zero_is_a_majority_leaf(self, rng):
        table = separable_table()
        tree, acc = build_diffp_id3(
            table, TOY_TABLE_ATTRIBUTES, 0, 1e6, "global", rng
        )
        assert isinstance(tree, Leaf)
        counts = table.class_counts()
        assert tree.label == max(counts, key=counts.get)
        assert acc.total() == pytest.approx(1e6)

    def test_huge_budget_reproduces_exact_induction(self):
        table = separable_table()
        for depth in (2, 5):
            oracle = build_id3(table, TOY_TABLE_ATTRIBUTES, depth)
            for variant in ("global", "local", "shifted"):
                tree, _ = build_diffp_id3(
                    table, TOY_TABLE_ATTRIBUTES, depth, 1e6, variant,
                    np.random.default_rng(17),
                )
                assert tree == oracle, (depth, variant)

    def test_budget_ledger_structure(self, rng):
        table = separable_table()
        acc = BudgetAccountant()
        eps = 3.0
        build_diffp_id3(
            table, TOY_TABLE_ATTRIBUTES, 2, eps, "global", rng,
            accountant=acc, scope_prefix="t",
        )
        stage = eps / 6.0
        for level in range(3):
            for kind in ("count", "select"):
                assert acc.scope_total(("t", level, kind)) == pytest.approx(stage)
        assert acc.total() == pytest.approx(eps, abs=1e-12)

    def test_no_attribute_repeats_along_paths(self, rng):
        table = separable_table()
        tree, _ = build_diffp_id3(
            table, TOY_TABLE_ATTRIBUTES, 5, 0.5, "shifted", rng
        )

        def walk(node, path):
            if isinstance(node, Leaf):
                return True
            assert node.attribute not in path
            return all(walk(c, path + (node.attribute,))
                       for _, c in node.children)

        assert walk(tree, ())
        assert tree.depth() <= 5

    def test_rejects_bad_inputs(self, rng):
        table = separable_table()
        with pytest.raises(InvalidInputError):
            build_diffp_id3(table, TOY_TABLE_ATTRIBUTES, 2, 0.0, "global", rng)
        with pytest.raises(InvalidInputError):
            build_diffp_id3(table, TOY_TABLE_ATTRIBUTES, 2, 1.0, "nope", rng)


class TestDiscretize:
    def test_midpoint_goes_to_lower_bin(self):
        assert [bin_index(v, 0.0, 1.0, 2) for v in (0.0, 0.5, 1.0)] == [0, 0, 1]

    def test_all_equal_values_share_a_bin(self):
        assert bin_index(0.3, 0.3, 0.3, 4) == 0

    def test_uniform_grid_splits_evenly(self):
        values = [j / 7 for j in range(8)]
        bins = [bin_index(v, 0.0, 1.0, 4) for v in values]
        assert [bins.count(b) for b in range(4)] == [2, 2, 2, 2]

    def test_table_rewrite(self):
        schema = TableSchema(
            attributes=(("x", Continuous(0.0, 1.0, 2)), ("A", Categorical((0, 1)))),
            class_attribute="y", class_values=("c0", "c1"),
        )
        table = LabeledTable(schema, [
            {"x": 0.0, "A": 0, "y": "c0"},
            {"x": 0.5, "A": 1, "y": "c1"},
            {"x": 1.0, "A": 0, "y": "c1"},
        ])
        binned = discretize(table, "x")
        assert binned.schema.spec_of("x") == Categorical((0, 1))
        assert sorted(binned.column("x")) == [0, 0, 1]


class TestClassification:
    def test_cross_validation_perfect_at_huge_budget(self):
        table = separable_table()
        score = cross_validate(table, depth=4, epsilon=1e6, variant="global",
                               seed=5, folds=10)
        assert score == 1.0

    def test_constant_class_matches_prior(self, rng):
        rows = [{"A": int(rng.integers(2)), "y": "c0"} for _ in range(60)]
        table = two_value_table(rows)
        score = cross_validate(table, depth=1, epsilon=50.0, variant="global",
                               seed=1, folds=5)
        assert score == 1.0   # the prior class is everything there is

    def test_seeded_reproducibility(self):
        table = separable_table()
        a = cross_validate(table, 2, 1.0, "local", seed=9)
        b = cross_validate(table, 2, 1.0, "local", seed=9)
        assert a == b

    def test_unseen_branch_falls_back_to_majority(self):
        tree = Internal(
            attribute="A",
            children=((0, Leaf("c0")), (1, Leaf("c1"))),
            majority="c1",
        )
        assert classify(tree, {"A": 0}) == "c0"
        assert classify(tree, {"A": "unexpected"}) == "c1"

    def test_accuracy_on_training_table(self):
        table = separable_table()
        tree = build_id3(table, TOY_TABLE_ATTRIBUTES, 4)
        assert accuracy(tree, table) == 1.0


class TestSchemaLoading:
    def test_sidecar_round_trip(self, tmp_path):
        doc = {
            "A": {"categorical": ["x", "y"]},
            "z": {"continuous": {"min": 0, "max": 2, "bins": 4}},
            "class": "label",
            "classes": ["n", "p"],
        }
        schema = schema_from_json(doc)
        assert schema.class_attribute == "label"
        assert schema.spec_of("A") == Categorical(("x", "y"))
        assert schema.spec_of("z") == Continuous(0.0, 2.0, 4)

    def test_missing_class_key(self):
        with pytest.raises(InvalidInputError):
            schema_from_json({"A": {"categorical": [1]}})

    def test_out_of_domain_value_is_named(self):
        schema = TableSchema(
            attributes=(("A", Categorical(("x",))),),
            class_attribute="y", class_values=("c0",),
        )
        with pytest.raises(InvalidInputError, match="'weird'"):
            LabeledTable(schema, [{"A": "weird", "y": "c0"}])


class TestBoundedSensitivityTail:
    def test_bounded_split_score_saturates_at_global(self, rng):
        from dampen.sensitivity import bound_sensitivity
        from dampen.trees import ig_sensitivity, global_sensitivity_ig

        table = separable_table()
        gs = global_sensitivity_ig(len(table))
        bounded = bound_sensitivity(ig_sensitivity(), gs, len(table))
        for attr in TOY_TABLE_ATTRIBUTES:
            assert bounded(table, len(table), attr) == gs
            assert bounded(table, len(table) + 7, attr) == gs
            assert bounded(table, 0, attr) <= gs
