"""Collapsed Gibbs inference for the joint sentiment-topic model with ratings.

Each word token carries a sentiment label and a topic label, each rating
token a sentiment label. Ratings enter the document-level sentiment counts
with weight ``sigma``; ``sigma = 0`` gives the text-only JST sampler.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels as K_
from .corpus import RATING_LEVELS, Document, Vocabulary
from .priors import Hyperparams
from .rng import make_rng

log = logging.getLogger(__name__)


class SamplerError(RuntimeError):
    pass


@dataclass
class Assignments:
    """Flat label arrays; ``word_ptr``/``rating_ptr`` delimit documents."""

    word_sentiment: np.ndarray
    word_topic: np.ndarray
    rating_sentiment: np.ndarray
    word_ptr: np.ndarray
    rating_ptr: np.ndarray

    def for_document(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a, b = self.word_ptr[i], self.word_ptr[i + 1]
        c, d = self.rating_ptr[i], self.rating_ptr[i + 1]
        return self.word_sentiment[a:b], self.word_topic[a:b], self.rating_sentiment[c:d]


@dataclass
class CountState:
    """Gibbs chain state: token data, labels, count tables and the generator."""

    word_ids: np.ndarray
    ratings: np.ndarray
    assignments: Assignments
    n_d: np.ndarray     # (D,)
    n_dl: np.ndarray    # (D, S)
    n_dlz: np.ndarray   # (D, S, K)
    n_lz: np.ndarray    # (S, K)
    n_lzw: np.ndarray   # (S, K, V)
    m_d: np.ndarray     # (D,)
    m_dl: np.ndarray    # (D, S)
    m_l: np.ndarray     # (S,)
    m_lr: np.ndarray    # (S, 5)
    rng: np.random.Generator
    sweeps: int = 0

    @property
    def D(self) -> int:
        return self.n_d.shape[0]

    def word_index(self, i: int, j: int) -> int:
        ptr = self.assignments.word_ptr
        if not 0 <= j < ptr[i + 1] - ptr[i]:
            raise IndexError(f"document {i} has no word position {j}")
        return int(ptr[i] + j)

    def rating_index(self, i: int, j: int) -> int:
        ptr = self.assignments.rating_ptr
        if not 0 <= j < ptr[i + 1] - ptr[i]:
            raise IndexError(f"document {i} has no rating position {j}")
        return int(ptr[i] + j)

    def check(self) -> None:
        """Assert that the count tables are exact tallies of the labels."""
        fresh = _tally(self.word_ids, self.ratings, self.assignments, self.n_dl.shape[1],
                       self.n_dlz.shape[2], self.n_lzw.shape[2])
        for name, arr in fresh.items():
            if not np.array_equal(arr, getattr(self, name)):
                raise SamplerError(f"count table {name} out of sync with assignments")


@dataclass(frozen=True)
class ModelParams:
    pi: np.ndarray     # (D, S)
    theta: np.ndarray  # (D, S, K)
    phi: np.ndarray    # (S, K, V)
    mu: np.ndarray     # (S, 5)


@dataclass
class TrainResult:
    params: ModelParams
    log_scores: list[float]
    state: CountState = field(repr=False)
    seed: int = 0
    iterations: int = 0


def _pack(documents: Sequence[Document]):
    word_ptr = np.zeros(len(documents) + 1, dtype=np.int64)
    rating_ptr = np.zeros(len(documents) + 1, dtype=np.int64)
    for i, doc in enumerate(documents):
        word_ptr[i + 1] = word_ptr[i] + doc.n_words
        rating_ptr[i + 1] = rating_ptr[i] + doc.n_ratings
    word_ids = np.fromiter((w for d in documents for w in d.word_ids), dtype=np.int64, count=word_ptr[-1])
    ratings = np.fromiter((r for d in documents for r in d.ratings), dtype=np.int64, count=rating_ptr[-1])
    return word_ids, ratings, word_ptr, rating_ptr


def _tally(word_ids, ratings, a: Assignments, S: int, K: int, V: int) -> dict[str, np.ndarray]:
    D = a.word_ptr.shape[0] - 1
    doc_of_word = np.repeat(np.arange(D), np.diff(a.word_ptr))
    doc_of_rating = np.repeat(np.arange(D), np.diff(a.rating_ptr))
    ls, zs, lr = a.word_sentiment, a.word_topic, a.rating_sentiment
    n_dlz = np.zeros((D, S, K), dtype=np.int64)
    np.add.at(n_dlz, (doc_of_word, ls, zs), 1)
    n_lzw = np.zeros((S, K, V), dtype=np.int64)
    np.add.at(n_lzw, (ls, zs, word_ids), 1)
    m_dl = np.zeros((D, S), dtype=np.int64)
    np.add.at(m_dl, (doc_of_rating, lr), 1)
    m_lr = np.zeros((S, RATING_LEVELS), dtype=np.int64)
    np.add.at(m_lr, (lr, ratings - 1), 1)
    n_dl = n_dlz.sum(axis=2)
    return {
        "n_d": n_dl.sum(axis=1),
        "n_dl": n_dl,
        "n_dlz": n_dlz,
        "n_lz": n_lzw.sum(axis=2),
        "n_lzw": n_lzw,
        "m_d": m_dl.sum(axis=1),
        "m_dl": m_dl,
        "m_l": m_lr.sum(axis=1),
        "m_lr": m_lr,
    }


def _validate(documents: Sequence[Document], hyper: Hyperparams) -> None:
    for doc in documents:
        if doc.word_ids and max(doc.word_ids) >= hyper.V:
            raise SamplerError(f"document {doc.id!r} has a word id >= V={hyper.V}")


def init_assignments(documents: Sequence[Document], hyper: Hyperparams, seed: int) -> CountState:
    """Random initial labels.

    A word gets a (sentiment, topic) pair uniformly among the pairs its prior
    allows; a rating gets a uniform sentiment.
    """
    _validate(documents, hyper)
    S, K, V = hyper.S, hyper.K, hyper.V
    word_ids, ratings, word_ptr, rating_ptr = _pack(documents)
    rng = make_rng(seed)
    allowed = hyper.beta.reshape(S * K, V).T > 0  # (V, S*K)
    n_allowed = allowed.sum(axis=1)
    if word_ids.size and np.any(n_allowed[word_ids] == 0):
        bad = int(word_ids[np.flatnonzero(n_allowed[word_ids] == 0)[0]])
        raise SamplerError(f"word excluded by prior: id {bad}")
    u = rng.random(word_ids.size)
    pick = np.floor(u * n_allowed[word_ids]).astype(np.int64)
    cells = np.empty(word_ids.size, dtype=np.int64)
    # pick-th allowed cell of each word, in sentiment-major order
    cum = np.cumsum(allowed, axis=1)
    for t, (w, k) in enumerate(zip(word_ids, pick)):
        cells[t] = int(np.searchsorted(cum[w], k + 1))
    lr = np.floor(rng.random(ratings.size) * S).astype(np.int64)
    a = Assignments(cells // K, cells % K, lr, word_ptr, rating_ptr)
    counts = _tally(word_ids, ratings, a, S, K, V)
    return CountState(word_ids=word_ids, ratings=ratings, assignments=a, rng=rng, **counts)


def _prior_sums(hyper: Hyperparams):
    return hyper.gamma.sum(), hyper.alpha.sum(axis=1), hyper.beta.sum(axis=2), hyper.delta.sum(axis=1)


class _Excluded:
    """Temporarily remove one token from the count tables."""

    def __init__(self, state: CountState, i: int, t: int, rating: bool):
        self.state, self.i, self.t, self.rating = state, i, t, rating

    def _shift(self, sign: int):
        s, i, t = self.state, self.i, self.t
        a = s.assignments
        if self.rating:
            l, r = a.rating_sentiment[t], s.ratings[t]
            s.m_d[i] += sign
            s.m_dl[i, l] += sign
            s.m_l[l] += sign
            s.m_lr[l, r - 1] += sign
        else:
            l, z, w = a.word_sentiment[t], a.word_topic[t], s.word_ids[t]
            s.n_d[i] += sign
            s.n_dl[i, l] += sign
            s.n_dlz[i, l, z] += sign
            s.n_lz[l, z] += sign
            s.n_lzw[l, z, w] += sign

    def __enter__(self):
        self._shift(-1)
        return self

    def __exit__(self, *exc):
        self._shift(+1)
        return False


def word_conditional(state: CountState, hyper: Hyperparams, i: int, j: int) -> np.ndarray:
    """Full conditional over (sentiment, topic) for word ``j`` of document ``i``.

    The token is taken out of the counts for the computation and put back
    afterwards, so the state is unchanged on return.
    """
    t = state.word_index(i, j)
    gamma_sum, alpha_sum, beta_sum, _ = _prior_sums(hyper)
    out = np.empty((hyper.S, hyper.K))
    with _Excluded(state, i, t, rating=False):
        total = K_.word_weights(
            out, i, int(state.word_ids[t]), hyper.sigma,
            state.n_d, state.n_dl, state.n_dlz, state.n_lz, state.n_lzw, state.m_d, state.m_dl,
            hyper.gamma, gamma_sum, hyper.alpha, alpha_sum, hyper.beta, beta_sum,
        )
    if not total > 0:
        raise SamplerError(f"word {int(state.word_ids[t])} has zero probability under every label")
    return out / total


def rating_conditional(state: CountState, hyper: Hyperparams, i: int, j: int) -> np.ndarray:
    """Full conditional over sentiment for rating ``j`` of document ``i``."""
    t = state.rating_index(i, j)
    gamma_sum, _, _, delta_sum = _prior_sums(hyper)
    out = np.empty(hyper.S)
    with _Excluded(state, i, t, rating=True):
        total = K_.rating_weights(
            out, i, int(state.ratings[t]), hyper.sigma,
            state.n_d, state.n_dl, state.m_d, state.m_dl, state.m_l, state.m_lr,
            hyper.gamma, gamma_sum, hyper.delta, delta_sum,
        )
    return out / total


def gibbs_sweep(state: CountState, hyper: Hyperparams) -> CountState:
    """Resample every word label, then every rating label, document by document."""
    a = state.assignments
    u_words = state.rng.random(state.word_ids.size)
    u_ratings = state.rng.random(state.ratings.size)
    bad = K_.sweep(
        state.word_ids, a.word_ptr, a.word_sentiment, a.word_topic, state.ratings, a.rating_ptr,
        a.rating_sentiment,
        state.n_d, state.n_dl, state.n_dlz, state.n_lz, state.n_lzw,
        state.m_d, state.m_dl, state.m_l, state.m_lr,
        hyper.gamma, hyper.alpha, hyper.beta, hyper.delta, hyper.sigma,
        u_words, u_ratings,
    )
    if bad >= 0:
        raise SamplerError(f"word {int(state.word_ids[bad])} has zero probability under every label")
    state.sweeps += 1
    return state


def estimate_params(state: CountState, hyper: Hyperparams) -> ModelParams:
    """Posterior-mean point estimates from the current labels."""
    sigma = hyper.sigma
    pi = (state.n_dl + sigma * state.m_dl + hyper.gamma) / (
        state.n_d + sigma * state.m_d + hyper.gamma.sum()
    )[:, None]
    theta = (state.n_dlz + hyper.alpha) / (state.n_dl + hyper.alpha.sum(axis=1))[:, :, None]
    phi = (state.n_lzw + hyper.beta) / (state.n_lz + hyper.beta.sum(axis=2))[:, :, None]
    mu = (state.m_lr + hyper.delta) / (state.m_l + hyper.delta.sum(axis=1))[:, None]
    return ModelParams(pi=pi, theta=theta, phi=phi, mu=mu)


def _lbeta_rows(counts: np.ndarray, prior: np.ndarray) -> float:
    """sum over rows of log B(counts + prior) - log B(prior), skipping zero-prior cells."""
    counts = np.asarray(counts, dtype=np.float64)
    prior = np.broadcast_to(prior, counts.shape)
    live = prior > 0
    post = counts + prior
    num = np.where(live, gammaln(np.where(live, post, 1.0)) - gammaln(np.where(live, prior, 1.0)), 0.0)
    return float(
        num.sum()
        + gammaln(prior.sum(axis=-1)).sum()
        - gammaln(post.sum(axis=-1)).sum()
    )


def joint_log_score(state: CountState, hyper: Hyperparams) -> float:
    """Collapsed log joint of all labels and observations.

    The document sentiment factor uses the rating-weighted counts, so for
    ``sigma != 1`` this is the weighted-likelihood objective rather than a
    normalised probability.
    """
    doc = _lbeta_rows(state.n_dl + hyper.sigma * state.m_dl, hyper.gamma)
    topic = _lbeta_rows(state.n_dlz, hyper.alpha)
    word = _lbeta_rows(state.n_lzw, hyper.beta)
    rating = _lbeta_rows(state.m_lr, hyper.delta)
    return doc + topic + word + rating


def train(
    documents: Sequence[Document],
    hyper: Hyperparams,
    iterations: int = 1000,
    seed: int = 0,
    *,
    average_last: int = 0,
    thin: int = 1,
    score_every: int = 1,
) -> TrainResult:
    """Run the chain and estimate parameters.

    By default the estimates come from the final sample only. With
    ``average_last = k > 0`` they are averaged over the last ``k`` samples
    taken every ``thin`` sweeps.
    """
    if iterations < 1:
        raise SamplerError("iterations must be >= 1")
    if average_last < 0 or thin < 1:
        raise SamplerError("average_last must be >= 0 and thin >= 1")
    for doc in documents:
        if doc.n_words == 0:
            raise SamplerError(f"document {doc.id!r} has no words")
    state = init_assignments(documents, hyper, seed)
    scores = []
    collected = []
    keep_from = iterations - (average_last - 1) * thin if average_last else None
    for it in range(1, iterations + 1):
        gibbs_sweep(state, hyper)
        if score_every and (it % score_every == 0 or it == iterations):
            scores.append(joint_log_score(state, hyper))
        if keep_from is not None and it >= keep_from and (iterations - it) % thin == 0:
            collected.append(estimate_params(state, hyper))
        if it % 100 == 0:
            log.debug("sweep %d/%d log score %.3f", it, iterations, scores[-1] if scores else float("nan"))
    if collected:
        params = ModelParams(*(np.mean([getattr(p, f) for p in collected], axis=0)
                               for f in ("pi", "theta", "phi", "mu")))
    else:
        params = estimate_params(state, hyper)
    return TrainResult(params=params, log_scores=scores, state=state, seed=seed, iterations=iterations)


def top_words(params: ModelParams, vocab: Vocabulary, l: int, z: int, n: int) -> list[tuple[str, float]]:
    """The ``n`` most probable terms of one sentiment-topic word distribution.

    Ties go to the lexicographically smaller term.
    """
    row = params.phi[l, z]
    if n > row.shape[0]:
        raise ValueError(f"n={n} exceeds vocabulary size {row.shape[0]}")
    order = sorted(range(row.shape[0]), key=lambda k: (-row[k], vocab.terms[k]))
    return [(vocab.terms[k], float(row[k])) for k in order[:n]]
