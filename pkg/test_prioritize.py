"""
Tests for the MR ordering generators, including a brute-force greedy oracle
"""

import numpy as np
import pytest

from conftest import matrix, random_matrix
from mr_prioritizer.core_model import CoverageProfile, Criterion, KillMatrix, Method
from mr_prioritizer.errors import DataError, EmptyMatrix, MissingCriterion
from mr_prioritizer.metrics import detection_curve
from mr_prioritizer.prioritize import (
    coverage_based_order,
    fault_based_order,
    optimal_order,
    random_orders,
    select_top,
    sub_seed,
)


def brute_force_best_gain(km, placed):
    """Largest number of new faults any single unplaced MR reveals"""
    covered = set().union(*(km.killed_by(mr) for mr in placed)) if placed else set()
    return max(len(km.killed_by(mr) - covered) for mr in km.mrs if mr not in placed)


class TestFaultBasedOrder:
    def test_hand_example(self, three_mr_matrix):
        ordering, trace = fault_based_order(three_mr_matrix, seed=7)
        assert ordering.order[0] == "A"
        assert trace.gains == [3, 1, 0]
        # B and C each reveal only f4 after A
        assert set(trace.steps[1].tie_set) == {"B", "C"}
        assert trace.steps[2].residual
        assert ordering.method is Method.FAULT_BASED
        assert ordering.seed == 7

    def test_second_place_tie_resolves_both_ways(self, three_mr_matrix):
        orders = {fault_based_order(three_mr_matrix, seed=s)[0].order for s in range(64)}
        assert orders == {("A", "B", "C"), ("A", "C", "B")}

    def test_tie_free(self, tie_free_matrix):
        ordering, trace = fault_based_order(tie_free_matrix, seed=7)
        assert ordering.order == ("A", "B", "C")
        assert trace.gains == [4, 2, 1]
        assert all(len(step.tie_set) == 1 for step in trace.steps)

    def test_single_mr(self):
        ordering, _ = fault_based_order(matrix({"A": {"f1"}}, ["f1"]), seed=0)
        assert ordering.order == ("A",)

    def test_perfect_tie_is_reproducible(self):
        km = matrix({"A": {"f1"}, "B": {"f1"}}, ["f1"])
        for seed in (1, 2, 3, 99):
            first, _ = fault_based_order(km, seed)
            again, _ = fault_based_order(km, seed)
            assert first.order == again.order

    def test_perfect_tie_uses_both_branches(self):
        km = matrix({"A": {"f1"}, "B": {"f1"}}, ["f1"])
        firsts = {fault_based_order(km, seed)[0].order[0] for seed in range(40)}
        assert firsts == {"A", "B"}

    def test_residual_orders_by_total_kills(self):
        km = matrix({"A": {"f1", "f2"}, "B": {"f1"}, "C": {"f1", "f2"}, "D": set()}, ["f1", "f2"])
        _, trace = fault_based_order(km, seed=3)
        residual = [s for s in trace.steps if s.residual]
        # A and C tie on both faults; whichever is left over leads the residual tail
        assert residual[0].chosen in ("A", "C")
        assert [s.chosen for s in residual[1:]] == ["B", "D"]
        assert all(s.marginal_gain == 0 for s in residual)

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            fault_based_order(KillMatrix((), (), np.zeros((0, 0), dtype=bool)), seed=0)

    def test_greedy_matches_brute_force_oracle(self):
        rng = np.random.default_rng(20240611)
        violations = 0
        for trial in range(200):
            km = random_matrix(rng, max_mrs=8, max_faults=30)
            ordering, trace = fault_based_order(km, seed=trial)
            assert ordering.is_permutation_of(km.mrs)
            for k, step in enumerate(trace.steps):
                if step.residual:
                    break
                if step.marginal_gain != brute_force_best_gain(km, ordering.order[:k]):
                    violations += 1
        assert violations == 0

    def test_gains_never_increase(self):
        rng = np.random.default_rng(5)
        for trial in range(50):
            _, trace = fault_based_order(random_matrix(rng), seed=trial)
            assert all(a >= b for a, b in zip(trace.gains, trace.gains[1:]))


class TestCoverageBasedOrder:
    def test_statement_example(self, coverage_profile):
        ordering, trace = coverage_based_order(coverage_profile, Criterion.STATEMENT, seed=7)
        assert ordering.order[0] == "A"
        assert trace.gains == [3, 1, 0]
        assert ordering.method is Method.STATEMENT_COVERAGE

    def test_empty_set_goes_last(self):
        cov = CoverageProfile(("A", "B"), statements={"A": set(), "B": {"s1"}})
        ordering, _ = coverage_based_order(cov, Criterion.STATEMENT, seed=0)
        assert ordering.order == ("B", "A")

    def test_branch_criterion(self, coverage_profile):
        ordering, trace = coverage_based_order(coverage_profile, Criterion.BRANCH, seed=1)
        assert ordering.order[0] == "C"
        assert ordering.method is Method.BRANCH_COVERAGE

    def test_identical_sets_are_full_ties(self):
        cov = CoverageProfile(("A", "B", "C"), statements={mr: {"s1", "s2"} for mr in "ABC"})
        ordering, trace = coverage_based_order(cov, Criterion.STATEMENT, seed=11)
        assert set(trace.steps[0].tie_set) == {"A", "B", "C"}
        assert ordering.is_permutation_of("ABC")

    def test_missing_criterion(self):
        cov = CoverageProfile(("A",), statements={"A": {"s1"}})
        with pytest.raises(MissingCriterion):
            coverage_based_order(cov, Criterion.BRANCH, seed=0)


class TestRandomOrders:
    def test_single_mr(self):
        orders = random_orders(["A"], n=1, seed=0)
        assert [o.order for o in orders] == [("A",)]

    def test_deterministic(self):
        mrs = [f"MR{i}" for i in range(1, 9)]
        first = [o.order for o in random_orders(mrs, n=100, seed=42)]
        second = [o.order for o in random_orders(mrs, n=100, seed=42)]
        assert first == second

    def test_permutations(self):
        for ordering in random_orders(["A", "B"], n=3, seed=9):
            assert ordering.is_permutation_of(["A", "B"])
            assert ordering.method is Method.RANDOM

    def test_sub_seeds(self):
        orders = random_orders(["A", "B", "C"], n=3, seed=2 ** 64 - 1)
        assert [o.seed for o in orders] == [2 ** 64 - 1, 0, 1]
        assert sub_seed(2 ** 64 - 1, 1) == 0

    def test_any_index_is_independent(self):
        full = random_orders(list("ABCDEF"), n=10, seed=100)
        alone = random_orders(list("ABCDEF"), n=1, seed=sub_seed(100, 7))
        assert full[7].order == alone[0].order

    def test_n_must_be_positive(self):
        with pytest.raises(DataError):
            random_orders(["A"], n=0, seed=0)


class TestOptimalOrder:
    def test_matches_fault_based_on_same_tie_free_data(self, tie_free_matrix):
        fault_based, _ = fault_based_order(tie_free_matrix, seed=1)
        optimal, _ = optimal_order(tie_free_matrix, seed=2)
        assert fault_based.order == optimal.order
        assert detection_curve(fault_based, tie_free_matrix) == detection_curve(optimal, tie_free_matrix)

    def test_tied_first_step_reaches_full_detection_at_two(self):
        km = matrix({"A": {"f1", "f2"}, "B": {"f2", "f3"}, "C": {"f3"}}, ["f1", "f2", "f3"])
        for seed in range(10):
            ordering, trace = optimal_order(km, seed)
            assert set(trace.steps[0].tie_set) == {"A", "B"}
            assert detection_curve(ordering, km).at(2) == 100.0

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            optimal_order(KillMatrix((), (), np.zeros((0, 0), dtype=bool)), seed=0)

    def test_self_consistency_on_random_tie_free_matrices(self):
        rng = np.random.default_rng(77)
        checked = 0
        while checked < 30:
            km = random_matrix(rng, max_mrs=6, max_faults=20)
            fault_based, trace = fault_based_order(km, seed=checked)
            if any(len(step.tie_set) > 1 for step in trace.steps):
                continue
            optimal, _ = optimal_order(km, seed=checked + 1000)
            assert fault_based.order == optimal.order
            assert detection_curve(fault_based, km).values == detection_curve(optimal, km).values
            checked += 1


class TestSelectTop:
    def test_truncates(self, tie_free_matrix):
        ordering, _ = fault_based_order(tie_free_matrix, seed=0)
        assert select_top(ordering, 2) == ("A", "B")
        assert select_top(ordering, 10) == ("A", "B", "C")

    def test_n_must_be_positive(self, tie_free_matrix):
        ordering, _ = fault_based_order(tie_free_matrix, seed=0)
        with pytest.raises(DataError):
            select_top(ordering, 0)
