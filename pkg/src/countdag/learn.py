"""Ordering-guided DAG structure learners for count data.

Two learners share the same ingredients (Poisson node regressions and Wald
conditional-independence tests on single coefficients):

* ``or_ppgm`` walks conditioning sets of growing cardinality, PC-style,
  deleting an edge t -> s on the first non-rejected test of
  H0: theta_{st|K} = 0 with K = S + {t}, S drawn from the current parents
  of s.
* ``or_lpgm`` fits each node once on all of its precedents and keeps the
  covariates whose coefficient test rejects.

Both are deterministic: edges are visited sorted by (ord(s), ord(t)) and
conditioning subsets are enumerated in lexicographic order over ascending
node indices.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
import numpy as np

from .data import CountMatrix
from .glm import (
    FitOptions,
    GlmFit,
    SingularInformation,
    _fit_core,
    _log_factorial,
    alpha_schedule,
    wald,
)
from .graphs import Dag, GraphError, Ordering

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnConfig:
    """Shared learner configuration.

    Exactly one of ``alpha`` (fixed significance level) or ``alpha_b``
    (exponent for the schedule 2(1 - Phi(n^b))) must be given. ``m`` bounds
    the conditioning-set cardinality for or_ppgm; None means no prior
    knowledge, i.e. the maximum p-2 useful for the data at hand.
    """

    alpha: float | None = None
    alpha_b: float | None = None
    m: int | None = None
    fit_options: FitOptions = field(default_factory=FitOptions)
    threads: int = 1

    def __post_init__(self) -> None:
        if (self.alpha is None) == (self.alpha_b is None):
            raise ValueError("exactly one of alpha / alpha_b must be set")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.m is not None and self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolve_alpha(self, n: int) -> float:
        if self.alpha is not None:
            return self.alpha
        return alpha_schedule(n, self.alpha_b)


@dataclass
class EdgeTest:
    """Outcome of the last Wald test performed on an edge t -> s."""

    edge: tuple[int, int]
    conditioning: tuple[int, ...]
    z: float
    rejected: bool


@dataclass
class LearnReport:
    """Diagnostics collected alongside the estimated graph."""

    alpha: float
    tests_run: int = 0
    fits_run: int = 0
    warnings: list[str] = field(default_factory=list)
    edge_tests: dict[tuple[int, int], EdgeTest] = field(default_factory=dict)

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        logger.warning(message)


def _check_inputs(data: CountMatrix, ordering: Ordering) -> None:
    if data.p != ordering.p:
        raise GraphError(
            f"data has {data.p} columns but ordering has {ordering.p} nodes"
        )


class _FitCache:
    """Per-run cache of node regressions keyed by (node, covariate tuple).

    Columns come from a validated CountMatrix, so the fast pre-validated
    solver entry point applies; per-node log-factorial means are shared
    across all conditioning sets of the node.
    """

    def __init__(self, columns: np.ndarray, opts: FitOptions, report: LearnReport):
        self._columns = columns
        self._opts = opts
        self._report = report
        self._store: dict[tuple[int, tuple[int, ...]], GlmFit] = {}
        self._log_fact: dict[int, float] = {}

    def fit(self, s: int, covariates: tuple[int, ...]) -> GlmFit:
        key = (s, covariates)
        cached = self._store.get(key)
        if cached is not None:
            return cached
        log_fact = self._log_fact.get(s)
        if log_fact is None:
            log_fact = float(np.mean(_log_factorial(self._columns[:, s])))
            self._log_fact[s] = log_fact
        X = (
            self._columns[:, covariates]
            if covariates
            else np.empty((self._columns.shape[0], 0))
        )
        result = _fit_core(self._columns[:, s], X, self._opts, covariates, log_fact)
        self._report.fits_run += 1
        self._store[key] = result
        return result


def or_ppgm(data: CountMatrix, ordering: Ordering, cfg: LearnConfig) -> Dag:
    """PC-style learner over conditioning sets of growing cardinality."""
    dag, _ = or_ppgm_detailed(data, ordering, cfg)
    return dag


def or_ppgm_detailed(
    data: CountMatrix, ordering: Ordering, cfg: LearnConfig
) -> tuple[Dag, LearnReport]:
    _check_inputs(data, ordering)
    p, n = data.p, data.n
    report = LearnReport(alpha=cfg.resolve_alpha(n) if p > 1 else float("nan"))
    if p <= 1:
        return Dag(p, frozenset(), data.labels), report
    if n < 2:
        raise GraphError(f"need at least 2 observations, got {n}")

    alpha = report.alpha
    m = cfg.m if cfg.m is not None else p - 2
    m = min(m, p - 2)
    columns = data.columns_as_float()
    cache = _FitCache(columns, cfg.fit_options, report)

    # Parent sets of the working graph, indexed by child node.
    parents: list[set[int]] = [set() for _ in range(p)]
    for pos, s in enumerate(ordering.perm):
        parents[s].update(ordering.perm[:pos])

    level = 0
    while True:
        # Children in ordering position; each child's edges are independent
        # of every other child's within a level, so this grouping is also the
        # unit of (optional) parallelism. Workers touch only parents[s] of
        # their own child and return local diagnostics, merged in child order.
        children = [s for s in ordering.perm if len(parents[s]) >= 1]

        def run_child(s: int) -> tuple[bool, list[EdgeTest], list[str]]:
            tested_any = False
            tests: list[EdgeTest] = []
            warnings: list[str] = []
            for t in sorted(parents[s], key=ordering.position):
                pool = parents[s] - {t}
                if len(pool) < level:
                    continue
                tested_any = True
                for subset in combinations(sorted(pool), level):
                    key = tuple(sorted(subset + (t,)))
                    try:
                        test = wald(cache.fit(s, key), t, n, alpha)
                        z, rejected = test.z, test.reject
                    except SingularInformation as exc:
                        warnings.append(
                            f"edge {t}->{s} | K={key}: singular information "
                            f"({exc}); treated as non-rejection"
                        )
                        z, rejected = float("nan"), False
                    tests.append(EdgeTest((t, s), subset, z, rejected))
                    if not rejected:
                        parents[s].discard(t)
                        break
            return tested_any, tests, warnings

        if cfg.threads > 1 and len(children) > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool_exec:
                outcomes = list(pool_exec.map(run_child, children))
        else:
            outcomes = [run_child(s) for s in children]

        any_tested = False
        for tested, tests, warnings in outcomes:
            any_tested |= tested
            report.tests_run += len(tests)
            for record in tests:
                report.edge_tests[record.edge] = record
            for message in warnings:
                report.warn(message)

        if level >= m or not any_tested:
            break
        level += 1

    edges = frozenset((t, s) for s in range(p) for t in parents[s])
    return Dag(p, edges, data.labels), report


def or_lpgm(data: CountMatrix, ordering: Ordering, cfg: LearnConfig) -> Dag:
    """Single-pass learner: regress each node on all of its precedents."""
    dag, _ = or_lpgm_detailed(data, ordering, cfg)
    return dag


def or_lpgm_detailed(
    data: CountMatrix, ordering: Ordering, cfg: LearnConfig
) -> tuple[Dag, LearnReport]:
    _check_inputs(data, ordering)
    p, n = data.p, data.n
    report = LearnReport(alpha=cfg.resolve_alpha(n) if p > 1 else float("nan"))
    if p <= 1:
        return Dag(p, frozenset(), data.labels), report
    if n < 2:
        raise GraphError(f"need at least 2 observations, got {n}")

    alpha = report.alpha
    columns = data.columns_as_float()
    cache = _FitCache(columns, cfg.fit_options, report)

    def run_node(s: int) -> tuple[list[tuple[int, int]], list[EdgeTest], list[str]]:
        pre = ordering.precedents(s)
        tests: list[EdgeTest] = []
        warnings: list[str] = []
        if not pre:
            return [], tests, warnings
        if n <= len(pre):
            warnings.append(
                f"node {s}: regression on {len(pre)} precedents with only "
                f"{n} rows is rank-deficient"
            )
        try:
            node_fit = cache.fit(s, pre)
        except SingularInformation as exc:
            warnings.append(f"node {s}: fit failed ({exc}); all tests non-rejecting")
            return [], tests, warnings
        kept = []
        for t in pre:
            try:
                test = wald(node_fit, t, n, alpha)
                z, rejected = test.z, test.reject
            except SingularInformation as exc:
                warnings.append(
                    f"node {s}, covariate {t}: singular information ({exc}); "
                    "treated as non-rejection"
                )
                z, rejected = float("nan"), False
            tests.append(
                EdgeTest((t, s), tuple(u for u in pre if u != t), z, rejected)
            )
            if rejected:
                kept.append((t, s))
        return kept, tests, warnings

    nodes = list(ordering.perm)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool_exec:
            outcomes = list(pool_exec.map(run_node, nodes))
    else:
        outcomes = [run_node(s) for s in nodes]

    edges = set()
    for kept, tests, warnings in outcomes:
        edges.update(kept)
        report.tests_run += len(tests)
        for record in tests:
            report.edge_tests[record.edge] = record
        for message in warnings:
            report.warn(message)
    return Dag(p, frozenset(edges), data.labels), report
