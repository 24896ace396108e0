"""Tests for SHD, F1, d-separation, SID and the metric reports."""

import itertools

import networkx as nx
import numpy as np
import pytest

from causal_cde.errors import ContractViolation
from causal_cde.graphs import Dag, enumerate_dags, sample_random_dag
from causal_cde.metrics import (
    ErrorRateReport,
    TrialRecord,
    d_separated,
    evaluate_graphs,
    f1_score,
    markov_equivalent,
    precision_recall,
    shd,
    sid,
    v_structures,
)

is_d_separator = getattr(nx, "is_d_separator", None) or nx.d_separated


def _linear_weights(dag, rng):
    """B[c, p] != 0 for every edge p -> c, with random signs and magnitudes."""
    B = np.zeros((dag.dim, dag.dim))
    for parent, child in dag.edges:
        B[child, parent] = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
    return B


def _regression_sid(true_g, pred_g, B):
    """Count pairs whose regression-adjusted effect misses the true total effect.

    In a linear Gaussian model with unit noise, x = (I - B)^-1 e, the total
    effect of i on j is [(I - B)^-1]_ji. Adjusting for PA_pred(i) estimates it
    by the coefficient of x_i when regressing x_j on x_i and the parents; a
    parent j of i is predicted to have no effect at all.
    """
    D = true_g.dim
    T = np.linalg.inv(np.eye(D) - B)
    cov = T @ T.T
    wrong = 0
    for i in range(D):
        Z = pred_g.parents(i)
        for j in range(D):
            if j == i:
                continue
            if j in Z:
                predicted = 0.0
            else:
                S = [i, *Z]
                predicted = np.linalg.solve(cov[np.ix_(S, S)], cov[S, j])[0]
            wrong += abs(predicted - T[j, i]) > 1e-8
    return wrong


class TestShd:
    """Tests for the structural Hamming distance."""

    def test_reversal_costs_two(self):
        """Test that a reversed edge on two nodes counts twice."""
        assert shd(Dag.from_edges(2, [(0, 1)]), Dag.from_edges(2, [(1, 0)])) == 2

    def test_missing_edges(self, chain3):
        """Test the distance to the empty graph."""
        assert shd(chain3, Dag.empty(3)) == 2

    def test_empty_prediction_against_fifteen_edges(self):
        """Test shd 15 and f1 0 for an empty prediction."""
        truth = Dag.from_edges(10, list(itertools.combinations(range(10), 2))[:15])
        assert shd(truth, Dag.empty(10)) == 15
        assert f1_score(truth, Dag.empty(10)) == 0.0

    def test_metric_axioms_on_three_nodes(self):
        """Test symmetry, identity and the triangle inequality over all three-node DAGs."""
        dags = enumerate_dags(3)
        dist = np.array([[shd(a, b) for b in dags] for a in dags])
        assert np.array_equal(dist, dist.T)
        assert np.all((dist == 0) == np.eye(len(dags), dtype=bool))
        # dist[a, c] <= dist[a, b] + dist[b, c] for every triple
        assert np.all(dist[:, None, :] <= dist[:, :, None] + dist[None, :, :])

    def test_size_mismatch(self, chain3):
        """Test that graphs of different sizes cannot be compared."""
        with pytest.raises(ContractViolation):
            shd(chain3, Dag.empty(2))


class TestF1:
    """Tests for directed-edge precision, recall and F1."""

    def test_one_reversal(self, chain3):
        """Test one correct edge out of two predicted and two true."""
        pred = Dag.from_edges(3, [(0, 1), (2, 1)])
        assert precision_recall(chain3, pred) == (0.5, 0.5)
        assert f1_score(chain3, pred) == pytest.approx(0.5)

    def test_partial_prediction(self, chain3):
        """Test F1 = 2/3 for one of two edges predicted."""
        assert f1_score(chain3, Dag.from_edges(3, [(0, 1)])) == pytest.approx(2 / 3)

    def test_empty_both(self):
        """Test the 0/0 convention."""
        assert f1_score(Dag.empty(3), Dag.empty(3)) == 0.0


class TestDSeparation:
    """Tests for the d-separation primitive."""

    def test_chain_and_collider(self, chain3, collider3):
        """Test the textbook cases."""
        assert not d_separated(chain3, 0, 2)
        assert d_separated(chain3, 0, 2, {1})
        assert d_separated(collider3, 0, 1)
        assert not d_separated(collider3, 0, 1, {2})

    def test_descendant_of_collider_opens_path(self):
        """Test that conditioning on a collider's child activates the trail."""
        g = Dag.from_edges(4, [(0, 2), (1, 2), (2, 3)])
        assert not d_separated(g, 0, 1, {3})

    def test_agrees_with_networkx(self):
        """Test every pair and conditioning set on random four-node graphs."""
        rng = np.random.default_rng(5)
        for _ in range(30):
            g = sample_random_dag(4, 3, "er", rng)
            graph = g.to_networkx()
            for i, j in itertools.combinations(range(4), 2):
                rest = [k for k in range(4) if k not in (i, j)]
                for r in range(len(rest) + 1):
                    for Z in itertools.combinations(rest, r):
                        expected = is_d_separator(graph, {i}, {j}, set(Z))
                        assert d_separated(g, i, j, Z) == expected

    def test_contracts(self, chain3):
        """Test range, distinctness and conditioning-set checks."""
        with pytest.raises(ContractViolation):
            d_separated(chain3, 0, 0)
        with pytest.raises(ContractViolation):
            d_separated(chain3, 0, 3)
        with pytest.raises(ContractViolation):
            d_separated(chain3, 0, 2, {0})


class TestSid:
    """Tests for the structural intervention distance."""

    def test_identical_graphs(self):
        """Test sid(G, G) = 0 for every three-node DAG."""
        for g in enumerate_dags(3):
            assert sid(g, g) == 0

    def test_chain_against_empty(self, chain3):
        """Test the pairs a chain gets wrong when predicted empty."""
        # effects of 1 on 0 and of 2 on 0, 1 are confounded without adjustment
        assert sid(chain3, Dag.empty(3)) == 3

    def test_reversed_pair(self):
        """Test x -> y predicted as y -> x."""
        assert sid(Dag.from_edges(2, [(0, 1)]), Dag.from_edges(2, [(1, 0)])) == 2

    def test_supergraph_of_truth(self, chain3):
        """Test that an extra edge can still keep every adjustment valid."""
        assert sid(chain3, Dag.from_edges(3, [(0, 1), (1, 2), (0, 2)])) == 0

    def test_regression_oracle_on_three_nodes(self):
        """Test agreement with linear-Gaussian regression adjustment on all 25 x 25 pairs."""
        rng = np.random.default_rng(0)
        dags = enumerate_dags(3)
        for true_g in dags:
            B = _linear_weights(true_g, rng)
            for pred_g in dags:
                assert sid(true_g, pred_g) == _regression_sid(true_g, pred_g, B)

    def test_regression_oracle_on_four_nodes(self):
        """Test agreement on random four-node pairs."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            true_g = sample_random_dag(4, float(rng.integers(0, 7)), "er", rng)
            pred_g = sample_random_dag(4, float(rng.integers(0, 7)), "er", rng)
            B = _linear_weights(true_g, rng)
            assert sid(true_g, pred_g) == _regression_sid(true_g, pred_g, B)

    def test_permutation_equivariance(self):
        """Test that relabelling both graphs leaves shd, sid and f1 unchanged."""
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = sample_random_dag(4, 3, "er", rng)
            b = sample_random_dag(4, 3, "er", rng)
            perm = [int(k) for k in rng.permutation(4)]
            pa, pb = a.relabel(perm), b.relabel(perm)
            assert shd(pa, pb) == shd(a, b)
            assert sid(pa, pb) == sid(a, b)
            assert f1_score(pa, pb) == f1_score(a, b)


class TestMarkovEquivalence:
    """Tests for skeleton and v-structure comparison."""

    def test_chain_and_fork_equivalent(self, chain3, fork3):
        """Test that a chain and a fork on the same skeleton are equivalent."""
        assert markov_equivalent(chain3, fork3)

    def test_collider_differs(self, chain3, collider3):
        """Test that a collider has its own class."""
        assert v_structures(collider3) == {(0, 2, 1)}
        assert not markov_equivalent(Dag.from_edges(3, [(0, 2), (2, 1)]), collider3)


class TestReports:
    """Tests for single and aggregated metric reports."""

    def test_identical_nonempty(self, chain3):
        """Test the perfect-prediction report."""
        report = evaluate_graphs(chain3, chain3)
        assert (report.shd, report.sid, report.f1) == (0, 0, 1.0)
        assert report.exact and report.markov_equivalent
        assert report.to_dict()["true_edge_count"] == 2

    def test_error_rate_counts_failures(self, chain3, fork3):
        """Test that failed trials count against the recovery rates."""
        report = ErrorRateReport()
        report.add(TrialRecord(0, 0, chain3.sorted_edges(), metrics=evaluate_graphs(chain3, chain3)))
        report.add(TrialRecord(0, 1, chain3.sorted_edges(), metrics=evaluate_graphs(chain3, fork3)))
        report.add(TrialRecord(1, 2, fork3.sorted_edges(), error="all restarts failed"))
        assert report.failed == 1
        assert report.recovery_rate == pytest.approx(1 / 3)
        assert report.mec_recovery_rate == pytest.approx(2 / 3)
        assert report.median_shd == pytest.approx(1.0)
        summary = report.to_dict()
        assert summary["trials"] == 3
        assert summary["records"][2]["metrics"] is None

    def test_empty_report(self):
        """Test the aggregate of zero trials."""
        report = ErrorRateReport()
        assert report.recovery_rate == 0.0
        assert report.median_shd is None
