import numpy as np
import pytest

from countdag.data import CountMatrix
from countdag.graphs import Dag, GraphError, Ordering, compare, is_consistent
from countdag.learn import (
    LearnConfig,
    or_lpgm,
    or_lpgm_detailed,
    or_ppgm,
    or_ppgm_detailed,
)

ALPHA01 = LearnConfig(alpha=0.01)


def sample_recursive(edges, weights, p, n, rng, order=None):
    """Reference sampler: Pois(exp(sum theta x)) along a topological order."""
    order = order if order is not None else range(p)
    out = np.zeros((n, p), dtype=np.int64)
    for s in order:
        pa = [t for t, c in edges if c == s]
        if not pa:
            lam = np.ones(n)
        else:
            lam = np.exp(sum(weights[(t, s)] * out[:, t] for t in pa))
        out[:, s] = rng.poisson(lam)
    return CountMatrix(out)


class TestOrPpgm:
    def test_p1_empty(self):
        data = CountMatrix(np.zeros((5, 1), dtype=np.int64))
        assert or_ppgm(data, Ordering((0,)), ALPHA01).edge_count == 0

    def test_size_mismatch(self):
        data = CountMatrix(np.zeros((5, 2), dtype=np.int64))
        with pytest.raises(GraphError):
            or_ppgm(data, Ordering((0, 1, 2)), ALPHA01)

    def test_detects_strong_edge(self):
        # X1 ~ Pois(1), X2 | X1 ~ Pois(exp(0.5 X1)): power at n=1000 is
        # essentially 1, so the edge survives in at least 95% of replicates.
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(1_000 + seed)
            data = sample_recursive([(0, 1)], {(0, 1): 0.5}, 2, 1000, rng)
            dag = or_ppgm(data, Ordering((0, 1)), ALPHA01)
            hits += (0, 1) in dag.edges
        assert hits >= 190

    def test_independent_pair_rare_edge(self):
        # Independent Pois(1) columns: rejection rate is the nominal 1%.
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(2_000 + seed)
            data = CountMatrix(rng.poisson(1.0, size=(1000, 2)))
            dag = or_ppgm(data, Ordering((0, 1)), ALPHA01)
            hits += dag.edge_count
        assert hits <= 6  # 3% of 200

    def test_removes_indirect_edge_via_conditioning(self):
        # Chain 0 -> 1 -> 2: the marginal 0-2 dependence dies given X1.
        recovered = 0
        for seed in range(50):
            rng = np.random.default_rng(3_000 + seed)
            data = sample_recursive(
                [(0, 1), (1, 2)], {(0, 1): 0.5, (1, 2): 0.5}, 3, 2000, rng
            )
            dag = or_ppgm(data, Ordering((0, 1, 2)), ALPHA01)
            recovered += set(dag.edges) == {(0, 1), (1, 2)}
        assert recovered >= 40

    def test_m_zero_stops_at_marginal_tests(self):
        rng = np.random.default_rng(9)
        data = sample_recursive(
            [(0, 1), (1, 2)], {(0, 1): 0.5, (1, 2): 0.5}, 3, 2000, rng
        )
        cfg = LearnConfig(alpha=0.01, m=0)
        dag, report = or_ppgm_detailed(data, Ordering((0, 1, 2)), cfg)
        # Only cardinality-0 conditioning sets were ever used.
        assert all(test.conditioning == () for test in report.edge_tests.values())
        # The marginal 0-2 association cannot be removed at level 0.
        assert (0, 2) in dag.edges

    def test_output_consistent_with_ordering(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            p = int(rng.integers(2, 7))
            perm = tuple(int(v) for v in rng.permutation(p))
            data = CountMatrix(rng.poisson(1.0, size=(200, p)))
            dag = or_ppgm(data, Ordering(perm), LearnConfig(alpha=0.2))
            assert is_consistent(dag, Ordering(perm))

    def test_deterministic_and_thread_invariant(self):
        rng = np.random.default_rng(13)
        data = sample_recursive(
            [(0, 2), (1, 2), (2, 3)],
            {(0, 2): 0.4, (1, 2): -0.4, (2, 3): 0.5},
            4, 800, rng,
        )
        ordering = Ordering((0, 1, 2, 3))
        first = or_ppgm(data, ordering, ALPHA01)
        again = or_ppgm(data, ordering, ALPHA01)
        threaded = or_ppgm(data, ordering, LearnConfig(alpha=0.01, threads=4))
        assert first == again == threaded

    def test_zero_column_deletes_edge_with_warning(self):
        values = np.zeros((100, 2), dtype=np.int64)
        values[:, 1] = np.random.default_rng(5).poisson(1.0, size=100)
        dag, report = or_ppgm_detailed(
            CountMatrix(values), Ordering((0, 1)), ALPHA01
        )
        assert dag.edge_count == 0
        assert any("singular" in w.lower() for w in report.warnings)

    def test_ordering_invariance_of_the_limit(self):
        # Two valid topological orderings of one DAG; identifiability makes
        # the large-sample estimates agree, so mean F1 gaps stay small.
        edges = [(0, 2), (1, 2), (2, 3), (3, 5), (4, 5), (5, 7), (6, 7), (7, 9), (8, 9)]
        weights = {e: 0.4 if i % 2 == 0 else -0.4 for i, e in enumerate(edges)}
        truth = Dag(10, frozenset(edges))
        o1 = Ordering(tuple(range(10)))
        o2 = Ordering((1, 0, 2, 4, 3, 5, 6, 8, 7, 9))
        cfg = LearnConfig(alpha_b=0.15, m=8)
        f1_gap = []
        for seed in range(10):
            rng = np.random.default_rng(40_000 + seed)
            data = sample_recursive(edges, weights, 10, 5000, rng)
            g1 = or_ppgm(data, o1, cfg)
            g2 = or_ppgm(data, o2, cfg)
            f1_gap.append(abs(compare(g1, truth).f1 - compare(g2, truth).f1))
        assert np.mean(f1_gap) < 0.05


class TestOrLpgm:
    def test_p1_empty(self):
        data = CountMatrix(np.zeros((5, 1), dtype=np.int64))
        assert or_lpgm(data, Ordering((0,)), ALPHA01).edge_count == 0

    def test_chain_recovery_without_transitive_edge(self):
        recovered = 0
        for seed in range(200):
            rng = np.random.default_rng(5_000 + seed)
            data = sample_recursive(
                [(0, 1), (1, 2)], {(0, 1): 0.5, (1, 2): 0.5}, 3, 1000, rng
            )
            dag = or_lpgm(data, Ordering((0, 1, 2)), ALPHA01)
            recovered += set(dag.edges) == {(0, 1), (1, 2)}
        assert recovered >= 180

    def test_false_edge_rate_matches_alpha(self):
        # p=5 fully independent: 10 testable ordered pairs, each rejecting
        # with probability 0.01, so 0.1 false edges per replicate on average.
        counts = []
        for seed in range(200):
            rng = np.random.default_rng(6_000 + seed)
            data = CountMatrix(rng.poisson(1.0, size=(1000, 5)))
            counts.append(or_lpgm(data, Ordering(tuple(range(5))), ALPHA01).edge_count)
        mean = np.mean(counts)
        se = np.std(counts, ddof=1) / np.sqrt(len(counts))
        assert abs(mean - 0.1) <= max(3 * se, 0.07)

    def test_first_node_never_has_parents(self):
        rng = np.random.default_rng(21)
        data = CountMatrix(rng.poisson(2.0, size=(400, 4)))
        dag = or_lpgm(data, Ordering((2, 0, 1, 3)), LearnConfig(alpha=0.5))
        assert dag.parents(2) == ()

    def test_alpha_monotone_edge_sets(self):
        rng = np.random.default_rng(23)
        data = sample_recursive(
            [(0, 1), (1, 3), (2, 3)],
            {(0, 1): 0.25, (1, 3): -0.3, (2, 3): 0.15},
            4, 600, rng,
        )
        ordering = Ordering((0, 1, 2, 3))
        previous: set = set()
        for alpha in (0.001, 0.01, 0.05, 0.2, 0.5):
            edges = set(or_lpgm(data, ordering, LearnConfig(alpha=alpha)).edges)
            assert previous <= edges
            previous = edges

    def test_rank_deficient_warns(self):
        rng = np.random.default_rng(27)
        data = CountMatrix(rng.poisson(1.0, size=(4, 6)))
        _, report = or_lpgm_detailed(
            data, Ordering(tuple(range(6))), LearnConfig(alpha=0.05)
        )
        assert any("rank-deficient" in w for w in report.warnings)

    def test_deterministic_and_thread_invariant(self):
        rng = np.random.default_rng(29)
        data = CountMatrix(rng.poisson(1.0, size=(500, 5)))
        ordering = Ordering((4, 2, 0, 3, 1))
        base = or_lpgm(data, ordering, LearnConfig(alpha=0.1))
        threaded = or_lpgm(data, ordering, LearnConfig(alpha=0.1, threads=3))
        assert base == threaded
        assert is_consistent(base, ordering)


class TestLearnConfig:
    def test_requires_exactly_one_alpha(self):
        with pytest.raises(ValueError):
            LearnConfig()
        with pytest.raises(ValueError):
            LearnConfig(alpha=0.05, alpha_b=0.15)

    def test_alpha_resolution_uses_schedule(self):
        from countdag.glm import alpha_schedule

        cfg = LearnConfig(alpha_b=0.15)
        assert cfg.resolve_alpha(1000) == alpha_schedule(1000, 0.15)
        assert LearnConfig(alpha=0.02).resolve_alpha(1000) == 0.02
