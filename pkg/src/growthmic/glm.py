"""Logistic regression on orthogonal polynomial terms of the features.

Each feature enters as an orthonormal polynomial of degree 1-3, built from
the training column with the three-term (Stieltjes) recurrence.  That is
Gram-Schmidt on ``{1, x, x^2, x^3}`` in numerically stable form; the
recurrence constants are stored so validation data is transformed the same
way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import math

import numpy as np
from scipy.special import expit

__all__ = [
    "Term",
    "FeatureBasis",
    "PolyBasis",
    "LogisticFit",
    "ConvergenceError",
    "build_basis",
    "raw_design",
    "fit_logistic",
    "predict_prob",
    "log_likelihood",
    "PROB_CLIP",
]

Term = tuple  # (feature name, degree)

PROB_CLIP = 1e-9
MAX_DEGREE = 3


class ConvergenceError(RuntimeError):
    """IRLS did not reach the score tolerance within ``max_iter`` steps."""


@dataclass(frozen=True)
class FeatureBasis:
    """Recurrence constants for one feature's orthonormal polynomials.

    ``alpha[k]`` and ``norm2[k]`` are the usual Stieltjes coefficients:
    ``P_{k+1}(x) = (x - alpha[k]) P_k(x) - (norm2[k] / norm2[k-1]) P_{k-1}(x)``
    with ``P_0 = 1``; column ``k`` is ``P_k / sqrt(norm2[k])``.
    """

    feature: str
    degree: int
    alpha: tuple[float, ...]
    norm2: tuple[float, ...]

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p_prev = np.ones_like(x)
        p = x - self.alpha[0]
        cols = [p]
        for k in range(1, self.degree):
            p, p_prev = (x - self.alpha[k]) * p - (self.norm2[k] / self.norm2[k - 1]) * p_prev, p
            cols.append(p)
        return np.column_stack(cols) / np.sqrt(np.asarray(self.norm2[1 : self.degree + 1]))

    def truncate(self, degree: int) -> "FeatureBasis":
        if not 1 <= degree <= self.degree:
            raise ValueError(f"cannot truncate degree {self.degree} basis to {degree}")
        return FeatureBasis(self.feature, degree, self.alpha[:degree], self.norm2[: degree + 1])


def _fit_feature(name: str, x: np.ndarray, degree: int) -> FeatureBasis:
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {degree}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"feature {name!r} has non-finite values")
    n_distinct = len(np.unique(x))
    if n_distinct < degree + 1:
        raise ValueError(
            f"feature {name!r} has {n_distinct} distinct values; degree {degree} needs {degree + 1}"
        )
    alpha, norm2 = [], [float(len(x))]
    p_prev, p = np.zeros_like(x), np.ones_like(x)
    for k in range(degree):
        a = float(np.dot(x * p, p) / norm2[k])
        ratio = norm2[k] / norm2[k - 1] if k > 0 else 0.0
        raw = (x - a) * p
        p, p_prev = raw - ratio * p_prev, p
        alpha.append(a)
        norm2.append(float(np.dot(p, p)))
        # Nearly all energy removed by orthogonalization: numerically dependent column.
        if norm2[-1] <= 1e-20 * float(np.dot(raw, raw)):
            raise ValueError(f"feature {name!r} is degenerate at degree {k + 1}")
    return FeatureBasis(name, degree, tuple(alpha), tuple(norm2))


@dataclass(frozen=True)
class PolyBasis:
    """Orthonormal polynomial transform for a set of features.

    The design matrix has an intercept column of ones followed by, for each
    feature in order, its degree-1..d columns.
    """

    features: tuple[FeatureBasis, ...] = ()

    @property
    def terms(self) -> tuple[Term, ...]:
        return tuple((fb.feature, k) for fb in self.features for k in range(1, fb.degree + 1))

    @property
    def spec(self) -> dict[str, int]:
        return {fb.feature: fb.degree for fb in self.features}

    def design(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        """Design matrix (intercept first) for the given feature columns."""
        n = _column_length(columns, [fb.feature for fb in self.features])
        blocks = [np.ones((n, 1))]
        for fb in self.features:
            if fb.feature not in columns:
                raise KeyError(f"missing feature {fb.feature!r}")
            blocks.append(fb.transform(np.asarray(columns[fb.feature], dtype=float).reshape(n)))
        return np.hstack(blocks)

    def restrict(self, spec: Mapping[str, int]) -> "PolyBasis":
        """Sub-basis with ``spec[feature]`` degrees (0 drops the feature)."""
        by_name = {fb.feature: fb for fb in self.features}
        out = []
        for name, degree in spec.items():
            if degree:
                out.append(by_name[name].truncate(degree))
        return PolyBasis(tuple(out))

    def to_dict(self) -> list[dict]:
        return [
            {"feature": fb.feature, "degree": fb.degree, "alpha": list(fb.alpha), "norm2": list(fb.norm2)}
            for fb in self.features
        ]

    @classmethod
    def from_dict(cls, data: Sequence[Mapping]) -> "PolyBasis":
        return cls(
            tuple(
                FeatureBasis(
                    d["feature"],
                    int(d["degree"]),
                    tuple(float(a) for a in d["alpha"]),
                    tuple(float(v) for v in d["norm2"]),
                )
                for d in data
            )
        )


def _column_length(columns, names) -> int:
    for name in names:
        if name in columns:
            return int(np.size(columns[name]))
    if names:
        raise KeyError(f"missing feature {names[0]!r}")
    for value in columns.values():
        return int(np.size(value))
    return 1


def build_basis(training_columns: Mapping[str, np.ndarray], term_spec: Mapping[str, int]) -> PolyBasis:
    """Fit orthonormal polynomial bases, ``term_spec`` mapping feature -> degree."""
    return PolyBasis(
        tuple(
            _fit_feature(name, np.asarray(training_columns[name], dtype=float), int(degree))
            for name, degree in term_spec.items()
            if degree
        )
    )


def raw_design(columns: Mapping[str, np.ndarray], term_spec: Mapping[str, int]) -> np.ndarray:
    """Intercept plus raw monomials ``x, x^2, ...`` for each feature."""
    names = [k for k, d in term_spec.items() if d]
    n = _column_length(columns, names)
    blocks = [np.ones((n, 1))]
    for name in names:
        x = np.asarray(columns[name], dtype=float).reshape(n)
        blocks.append(np.column_stack([x**k for k in range(1, term_spec[name] + 1)]))
    return np.hstack(blocks)


def log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


@dataclass(frozen=True)
class LogisticFit:
    coef: np.ndarray
    loglik: float
    n: int
    terms: tuple[Term, ...] = ()
    std_errors: np.ndarray = field(default=None, repr=False)
    converged: bool = True
    separated: bool = False
    n_iter: int = 0

    @property
    def d(self) -> int:
        return len(self.coef)

    @property
    def deviance(self) -> float:
        # Saturated log-likelihood of binary data is zero.
        return -2.0 * self.loglik


_CLIP_LOGIT = math.log((1.0 - PROB_CLIP) / PROB_CLIP)


def _newton_step(X, y, beta, loglik):
    """Newton direction with step halving; ``None`` if no halving helps."""
    p = expit(X @ beta)
    hess = X.T @ (X * (p * (1.0 - p))[:, None])
    step = np.linalg.lstsq(hess, X.T @ (y - p), rcond=None)[0]
    t = 1.0
    for _ in range(40):
        trial = beta + t * step
        trial_ll = log_likelihood(X, y, trial)
        if trial_ll >= loglik - 1e-12 * abs(loglik):
            return trial, trial_ll
        t *= 0.5
    return None


def fit_logistic(
    X,
    y,
    tol: float = 1e-8,
    max_iter: int = 50,
    eta_cap: float = 30.0,
    terms: Sequence[Term] = (),
) -> LogisticFit:
    """Maximum-likelihood logistic regression by IRLS with step halving.

    Converged when the score ``X'(y - p)`` has max-norm at most ``tol * n``;
    one further Newton step then polishes the estimate to near machine
    precision.  Completely separated data has no finite MLE: iterations
    continue until every training point's fitted probability reaches the
    clip bounds, and the fit is returned with ``separated=True``.  Fits
    whose linear predictor exceeds ``eta_cap`` in absolute value (quasi-
    separation) are flagged the same way.

    Raises
    ------
    ValueError
        ``n <= d`` or labels outside {0, 1}.
    ConvergenceError
        Score tolerance not met after ``max_iter`` iterations.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) with len(y) == n")
    n, d = X.shape
    if n <= d:
        raise ValueError(f"need n > d, got n={n}, d={d}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")

    beta = np.zeros(d)
    loglik = log_likelihood(X, y, beta)
    converged = separated = False
    sign = np.where(y == 1, 1.0, -1.0)
    for it in range(1, max_iter + 1):
        eta = X @ beta
        margin = sign * eta
        if np.all(margin > 0):
            if margin.min() >= _CLIP_LOGIT:
                converged = separated = True
                break
        elif np.max(np.abs(X.T @ (y - expit(eta)))) <= tol * n:
            converged = True
            polished = _newton_step(X, y, beta, loglik)
            if polished is not None:
                beta, loglik = polished
            break
        nxt = _newton_step(X, y, beta, loglik)
        if nxt is None:
            break
        beta, loglik = nxt
    else:
        it = max_iter
    if not converged:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations")
    separated = separated or bool(np.max(np.abs(X @ beta)) > eta_cap)

    p = expit(X @ beta)
    hess = X.T @ (X * (p * (1.0 - p))[:, None])
    se = np.sqrt(np.abs(np.diag(np.linalg.pinv(hess))))
    beta.flags.writeable = False
    return LogisticFit(
        coef=beta,
        loglik=loglik,
        n=n,
        terms=tuple(terms),
        std_errors=se,
        converged=converged,
        separated=separated,
        n_iter=it,
    )


def predict_prob(fit: LogisticFit, basis: PolyBasis, features) -> float | np.ndarray:
    """Growth probability ``logistic(eta)``, clipped to ``[1e-9, 1 - 1e-9]``.

    ``features`` is a single feature mapping (returns a float) or a mapping
    of feature name to column array (returns an array).
    """
    if tuple(fit.terms) and tuple(fit.terms) != basis.terms:
        raise ValueError("fit and basis have different term lists")
    scalar = all(np.ndim(features[fb.feature]) == 0 for fb in basis.features) if basis.features else True
    X = basis.design(features)
    pi = np.clip(expit(X @ fit.coef), PROB_CLIP, 1.0 - PROB_CLIP)
    if scalar and len(pi) == 1:
        return float(pi[0])
    return pi
