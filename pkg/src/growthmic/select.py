"""BIC model selection over feature subsets and polynomial degrees.

Stage one screens subsets of linear terms; stage two takes the features of
the top linear model and searches their polynomial degrees (0-3, always as
a prefix ``x, x^2, ...``).  Models are scored by ``L - (d/2) log n`` and the
scores of every model visited are normalised into posterior probabilities.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import LabeledWell
from .glm import (
    MAX_DEGREE,
    ConvergenceError,
    LogisticFit,
    PolyBasis,
    build_basis,
    fit_logistic,
    predict_prob,
)

__all__ = [
    "TrainingSet",
    "ModelScore",
    "SearchResult",
    "GrowthModel",
    "bic_score",
    "bic_posterior",
    "search_linear",
    "expand_and_select",
    "train_growth_model",
]

log = logging.getLogger(__name__)

Spec = tuple  # ((feature, degree), ...) with degree >= 1


def bic_score(loglik: float, d: int, n: int) -> float:
    return loglik - 0.5 * d * math.log(n)


def bic_posterior(scores: Sequence[tuple[float, int]], n: int) -> np.ndarray:
    """Posterior model probabilities from ``(loglik, d)`` pairs."""
    if len(scores) == 0:
        raise ValueError("need at least one model")
    if n < 2:
        raise ValueError("n must be at least 2")
    b = np.array([bic_score(L, d, n) for L, d in scores])
    # Shift by the maximum before exponentiating; dividing by the sum (rather
    # than subtracting logsumexp) keeps exact ties exactly equal to 1/m.
    w = np.exp(b - b.max())
    return w / w.sum()


@dataclass(frozen=True)
class TrainingSet:
    """Feature columns and 0/1 growth labels for model fitting."""

    columns: Mapping[str, np.ndarray]
    y: np.ndarray

    @classmethod
    def from_wells(cls, wells: Iterable[LabeledWell]) -> "TrainingSet":
        wells = list(wells)
        if not wells:
            raise ValueError("no training wells")
        names = list(wells[0].features)
        values = np.array([w.features.values for w in wells])
        return cls({k: values[:, i] for i, k in enumerate(names)}, np.array([w.label for w in wells]))

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class ModelScore:
    spec: Spec
    loglik: float
    d: int
    n: int
    posterior: float = float("nan")
    separated: bool = False

    @property
    def bic(self) -> float:
        return bic_score(self.loglik, self.d, self.n)

    @property
    def terms(self) -> tuple[tuple[str, int], ...]:
        return tuple((f, k) for f, deg in self.spec for k in range(1, deg + 1))

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(f for f, _ in self.spec)

    def sort_key(self):
        return (-self.bic, self.d, self.terms)


@dataclass(frozen=True)
class SearchResult:
    ranked: tuple[ModelScore, ...]
    n_models: int
    method: str

    @property
    def best(self) -> ModelScore:
        return self.ranked[0]


@dataclass(frozen=True)
class GrowthModel:
    basis: PolyBasis
    fit: LogisticFit
    score: ModelScore
    stage1: SearchResult | None = field(default=None, compare=False)
    stage2: SearchResult | None = field(default=None, compare=False)

    def predict(self, features) -> float | np.ndarray:
        return predict_prob(self.fit, self.basis, features)


class _Scorer:
    """Fits and caches candidate models on a fixed training set."""

    def __init__(self, data: TrainingSet, basis: PolyBasis, order: Sequence[str]):
        self.n = data.n
        self.y = np.asarray(data.y, dtype=float)
        self.order = {f: i for i, f in enumerate(order)}
        self.blocks = {}
        for fb in basis.features:
            cols = fb.transform(np.asarray(data.columns[fb.feature], dtype=float))
            for k in range(1, fb.degree + 1):
                self.blocks[(fb.feature, k)] = cols[:, k - 1]
        self.cache: dict[Spec, ModelScore | None] = {}

    def canonical(self, spec: Mapping[str, int]) -> Spec:
        return tuple(sorted(((f, d) for f, d in spec.items() if d), key=lambda t: self.order[t[0]]))

    def design(self, spec: Spec) -> np.ndarray:
        cols = [np.ones(self.n)]
        cols += [self.blocks[(f, k)] for f, deg in spec for k in range(1, deg + 1)]
        return np.column_stack(cols)

    def score(self, spec: Spec) -> ModelScore | None:
        if spec not in self.cache:
            try:
                fit = fit_logistic(self.design(spec), self.y)
            except ConvergenceError:
                log.warning("skipping non-convergent model %s", spec)
                self.cache[spec] = None
            else:
                self.cache[spec] = ModelScore(spec, fit.loglik, fit.d, self.n, separated=fit.separated)
        return self.cache[spec]

    def result(self, top_k: int, method: str) -> SearchResult:
        scored = [m for m in self.cache.values() if m is not None]
        post = bic_posterior([(m.loglik, m.d) for m in scored], self.n)
        ranked = sorted(
            (ModelScore(m.spec, m.loglik, m.d, m.n, float(p), m.separated) for m, p in zip(scored, post)),
            key=ModelScore.sort_key,
        )
        return SearchResult(tuple(ranked[:top_k]), len(scored), method)


def _check_labels(y):
    y = np.asarray(y)
    if y.min() == y.max():
        raise ValueError("labels are degenerate (a single class)")


def _usable_degree(x: np.ndarray, max_degree: int = MAX_DEGREE) -> int:
    return min(max_degree, len(np.unique(x)) - 1)


def _stepwise(scorer: _Scorer, start: dict[str, int], moves) -> None:
    current = scorer.score(scorer.canonical(start))
    state = dict(start)
    while True:
        best, best_state = current, None
        for cand in moves(state):
            m = scorer.score(scorer.canonical(cand))
            if m is not None and (best is None or m.sort_key() < best.sort_key()):
                best, best_state = m, cand
        if best_state is None:
            return
        current, state = best, best_state


def search_linear(
    data: TrainingSet,
    candidate_features: Sequence[str],
    *,
    exhaustive_cap: int = 12,
    top_k: int = 10,
    restarts: int = 3,
    seed: int = 0,
) -> SearchResult:
    """Rank linear-term models over subsets of ``candidate_features``.

    All ``2^m`` subsets are fitted when ``m <= exhaustive_cap``; otherwise a
    forward-backward stepwise search on BIC runs from the empty model and
    from ``restarts`` random subsets.
    """
    _check_labels(data.y)
    cands = [f for f in dict.fromkeys(candidate_features) if _usable_degree(data.columns[f]) >= 1]
    if len(cands) < len(set(candidate_features)):
        log.info("dropping constant features %s", sorted(set(candidate_features) - set(cands)))
    basis = build_basis(data.columns, {f: 1 for f in cands})
    scorer = _Scorer(data, basis, cands)

    if len(cands) <= exhaustive_cap:
        for r in range(len(cands) + 1):
            for subset in itertools.combinations(cands, r):
                scorer.score(scorer.canonical({f: 1 for f in subset}))
        return scorer.result(top_k, "exhaustive")

    def moves(state):
        for f in cands:
            nxt = dict(state)
            if f in nxt:
                del nxt[f]
            else:
                nxt[f] = 1
            yield nxt

    rng = np.random.default_rng(seed)
    starts = [{}]
    for _ in range(restarts):
        size = int(rng.integers(1, max(2, len(cands) // 2) + 1))
        starts.append({str(f): 1 for f in rng.choice(cands, size=size, replace=False)})
    for start in starts:
        _stepwise(scorer, start, moves)
    return scorer.result(top_k, "stepwise")


def expand_and_select(
    stage1_features: Sequence[str],
    data: TrainingSet,
    *,
    exhaustive_cap: int = 12,
    top_k: int = 10,
    stage1: SearchResult | None = None,
) -> GrowthModel:
    """Search polynomial degrees for the screened features and fit the winner.

    Every feature keeps a prefix of degrees ``0..3`` (capped by its number of
    distinct values minus one).  The degree grid is enumerated when it has at
    most ``2^exhaustive_cap`` models, else searched stepwise by +/-1 degree
    moves from the all-linear model.
    """
    _check_labels(data.y)
    feats = list(dict.fromkeys(stage1_features))
    max_deg = {f: _usable_degree(data.columns[f]) for f in feats}
    feats = [f for f in feats if max_deg[f] >= 1]
    basis = build_basis(data.columns, {f: max_deg[f] for f in feats})
    scorer = _Scorer(data, basis, feats)

    grid_size = math.prod(max_deg[f] + 1 for f in feats)
    if grid_size <= 2**exhaustive_cap:
        for degrees in itertools.product(*(range(max_deg[f] + 1) for f in feats)):
            scorer.score(scorer.canonical(dict(zip(feats, degrees))))
        method = "exhaustive"
    else:

        def moves(state):
            for f in feats:
                for step in (-1, 1):
                    deg = state.get(f, 0) + step
                    if 0 <= deg <= max_deg[f]:
                        yield {**state, f: deg}

        _stepwise(scorer, {f: 1 for f in feats}, moves)
        method = "stepwise"

    result = scorer.result(top_k, method)
    best = result.best
    final_basis = basis.restrict(dict(best.spec))
    fit = fit_logistic(scorer.design(best.spec), scorer.y, terms=final_basis.terms)
    return GrowthModel(final_basis, fit, best, stage1, result)


def train_growth_model(
    data: TrainingSet,
    candidate_features: Sequence[str],
    *,
    exhaustive_cap: int = 12,
    top_k: int = 10,
    seed: int = 0,
) -> GrowthModel:
    """Two-stage selection: linear screening, then degree expansion."""
    stage1 = search_linear(
        data, candidate_features, exhaustive_cap=exhaustive_cap, top_k=top_k, seed=seed
    )
    return expand_and_select(
        stage1.best.features, data, exhaustive_cap=exhaustive_cap, top_k=top_k, stage1=stage1
    )
