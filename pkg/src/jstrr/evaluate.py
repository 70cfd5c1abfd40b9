"""Held-out perplexity, entropy bound, KL divergence, information gain and
cross-validation of the rating weight."""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K_
from .corpus import Document
from .priors import Hyperparams
from .rng import child_seed, make_rng
from .sampler import ModelParams, train

log = logging.getLogger(__name__)

DEFAULT_PARTICLES = 20
DEFAULT_SIGMA_GRID = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
RATING_BURN = 5


class ZeroLikelihoodError(ArithmeticError):
    """Some held-out word has zero probability under the model.

    ``offenders`` lists (document id, word id) pairs.
    """

    def __init__(self, offenders: list[tuple[str, int]]):
        self.offenders = offenders
        listed = ", ".join(f"{d} (word {w})" for d, w in offenders)
        super().__init__(f"zero likelihood for documents: {listed}")


@dataclass
class PerplexityReport:
    word_perplexity: float
    upper_bound: float
    particles: int
    seed: int
    rating_perplexity: float | None = None

    def to_dict(self) -> dict:
        return {
            "word_perplexity": self.word_perplexity,
            "rating_perplexity": self.rating_perplexity,
            "upper_bound": self.upper_bound,
            "particles": self.particles,
            "seed": self.seed,
        }


@dataclass
class CvReport:
    grid: list[float]
    fold_scores: np.ndarray  # (len(grid), folds)
    selected_sigma: float
    seed: int = 0
    folds: list[list[int]] = field(default_factory=list, repr=False)

    @property
    def mean_scores(self) -> np.ndarray:
        return self.fold_scores.mean(axis=1)

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "fold_scores": self.fold_scores.tolist(),
            "mean_scores": self.mean_scores.tolist(),
            "selected_sigma": self.selected_sigma,
            "seed": self.seed,
        }


def _doc_log_likelihood(doc: Document, params: ModelParams, hyper: Hyperparams, particles: int,
                        seed: int, use_ratings: bool) -> tuple[float, int]:
    if particles < 1:
        raise ValueError("particles must be >= 1")
    words = K_.as_int(doc.word_ids)
    if words.size and words.max() >= params.phi.shape[2]:
        raise ValueError(f"document {doc.id!r} has a word id outside the vocabulary")
    ratings = K_.as_int(doc.ratings if use_ratings else ())
    n_u = K_.left_to_right_draws(words.size, ratings.size, particles, RATING_BURN)
    uniforms = make_rng(seed).random(n_u)
    ll, bad = K_.left_to_right(words, ratings, params.phi, params.mu, hyper.gamma, hyper.alpha,
                               hyper.sigma, particles, RATING_BURN, uniforms)
    return float(ll), (int(words[bad]) if bad >= 0 else -1)


def doc_log_likelihood(doc: Document, params: ModelParams, hyper: Hyperparams,
                       particles: int = DEFAULT_PARTICLES, seed: int = 0, use_ratings: bool = True) -> float:
    """Left-to-right particle estimate of log P(words of ``doc`` | phi).

    When ``use_ratings`` is set and the document has ratings, their sentiment
    labels (scored with ``params.mu``) enter the document-level sentiment
    factor with weight ``hyper.sigma``. Returns ``-inf`` with a warning when
    a word cannot be generated by any reachable label.
    """
    ll, bad = _doc_log_likelihood(doc, params, hyper, particles, seed, use_ratings)
    if bad >= 0:
        warnings.warn(f"document {doc.id!r}: word {bad} has zero predictive probability", RuntimeWarning)
    return ll


def word_perplexity(test_docs: Sequence[Document], params: ModelParams, hyper: Hyperparams,
                    particles: int = DEFAULT_PARTICLES, seed: int = 0, use_ratings: bool = True) -> float:
    """exp(- sum of document log likelihoods / total word count)."""
    if not test_docs:
        raise ValueError("empty test set")
    total_ll = 0.0
    total_n = 0
    offenders = []
    for k, doc in enumerate(test_docs):
        ll, bad = _doc_log_likelihood(doc, params, hyper, particles, child_seed(seed, k), use_ratings)
        if bad >= 0:
            offenders.append((doc.id, bad))
        total_ll += ll
        total_n += doc.n_words
    if offenders:
        raise ZeroLikelihoodError(offenders)
    if total_n == 0:
        raise ValueError("test set has no words")
    return math.exp(-total_ll / total_n)


def perplexity_upper_bound(test_docs: Sequence[Document]) -> float:
    """Perplexity of predicting with the test set's own empirical word frequencies."""
    counts = Counter(w for doc in test_docs for w in doc.word_ids)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("empty test set")
    p = np.array(list(counts.values()), dtype=np.float64) / total
    return float(np.exp(-np.sum(p * np.log(p))))


def rating_perplexity(test_docs: Sequence[Document], params: ModelParams, hyper: Hyperparams) -> float:
    """Perplexity of held-out ratings under the prior sentiment mixture."""
    prior = hyper.gamma / hyper.gamma.sum()
    p_r = prior @ params.mu  # (5,)
    ratings = [r for doc in test_docs for r in doc.ratings]
    if not ratings:
        raise ValueError("test set has no ratings")
    probs = p_r[np.asarray(ratings) - 1]
    if np.any(probs <= 0):
        bad = sorted({r for r, p in zip(ratings, probs) if p <= 0})
        raise ZeroLikelihoodError([("rating", r) for r in bad])
    return float(np.exp(-np.mean(np.log(probs))))


def kl_divergence(p_hat, p) -> float:
    """sum_l p_hat[l] * log(p_hat[l] / p[l]), estimate first."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if p_hat.shape != p.shape:
        raise ValueError("vectors must have equal length")
    support = p_hat > 0
    if np.any(p[support] <= 0):
        raise ValueError("absolute continuity violated")
    return float(np.sum(p_hat[support] * np.log(p_hat[support] / p[support])))


def information_gain(mu, sentiment_prior) -> float:
    """Entropy of the sentiment minus its entropy given a rating, in nats.

    Evaluated as the rating-averaged divergence of P(l | r) from P(l), which
    is the same quantity but hits the extreme cases (identical rows, disjoint
    supports) without round-off.
    """
    mu = np.asarray(mu, dtype=np.float64)
    prior = np.asarray(sentiment_prior, dtype=np.float64)
    joint = prior[:, None] * mu  # P(l, r)
    p_r = joint.sum(axis=0)
    terms = []
    for r in np.flatnonzero(p_r > 0):
        post = joint[:, r] / p_r[r]
        live = post > 0
        terms.extend(p_r[r] * post[live] * np.log(post[live] / prior[live]))
    return max(math.fsum(terms), 0.0)


def fold_partition(n: int, folds: int, seed: int) -> list[list[int]]:
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"cannot make {folds} folds from {n} documents")
    order = make_rng(seed).permutation(n)
    return [sorted(int(k) for k in part) for part in np.array_split(order, folds)]


def cross_validate_sigma(
    train_docs: Sequence[Document],
    hyper_base: Hyperparams,
    sigma_grid: Sequence[float] = DEFAULT_SIGMA_GRID,
    folds: int = 10,
    iterations: int = 1000,
    particles: int = DEFAULT_PARTICLES,
    seed: int = 0,
    *,
    average_last: int = 0,
    thin: int = 1,
) -> CvReport:
    """K-fold search for the rating weight by held-out word perplexity.

    Fold membership, training seeds and scoring seeds depend only on the
    fold index, so every grid point sees the same splits. Ties go to the
    smaller sigma.
    """
    grid = [float(s) for s in sigma_grid]
    if not grid:
        raise ValueError("sigma grid is empty")
    parts = fold_partition(len(train_docs), folds, child_seed(seed, 0))
    scores = np.empty((len(grid), folds))
    for f, held in enumerate(parts):
        held_set = set(held)
        fit = [d for k, d in enumerate(train_docs) if k not in held_set]
        test = [train_docs[k] for k in held]
        for g, sigma in enumerate(grid):
            hyper = hyper_base.with_sigma(sigma)
            result = train(fit, hyper, iterations, child_seed(seed, 1, f), score_every=0,
                           average_last=average_last, thin=thin)
            scores[g, f] = word_perplexity(test, result.params, hyper, particles, child_seed(seed, 2, f))
            log.info("cv sigma=%g fold=%d perplexity=%.4f", sigma, f, scores[g, f])
    selected = select_sigma(grid, scores.mean(axis=1))
    return CvReport(grid=grid, fold_scores=scores, selected_sigma=selected, seed=seed, folds=parts)


def select_sigma(grid: Sequence[float], mean_scores: Sequence[float]) -> float:
    """argmin of the mean scores, ties to the smaller sigma."""
    best = min(range(len(grid)), key=lambda g: (mean_scores[g], grid[g]))
    return float(grid[best])
