"""Synthetic review corpora and the sentiment-recovery experiment."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import RATING_LEVELS, Document
from .evaluate import DEFAULT_PARTICLES, DEFAULT_SIGMA_GRID, cross_validate_sigma, kl_divergence
from .priors import BETA_DEFAULT, Hyperparams, rating_delta
from .rng import child_seed, make_rng
from .sampler import train

log = logging.getLogger(__name__)

MU_KINDS = ("diff", "unif")


@dataclass(frozen=True, eq=False)
class GenerativeSpec:
    gamma: np.ndarray      # (S,)
    alpha: np.ndarray      # (S, K)
    phi_true: np.ndarray   # (S, K, V)
    mu_true: np.ndarray    # (S, 5)
    mu_kind: str = "custom"
    # word ids confined to one sentiment, indexed by sentiment (empty = none)
    lexicon: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        for name in ("gamma", "alpha", "phi_true", "mu_true"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        S = self.gamma.shape[0]
        if self.alpha.shape[0] != S or self.phi_true.shape[:2] != self.alpha.shape:
            raise ValueError("inconsistent dimensions between gamma, alpha and phi_true")
        if self.mu_true.shape != (S, RATING_LEVELS):
            raise ValueError("mu_true must have shape (S, 5)")
        for name, arr in (("phi_true", self.phi_true), ("mu_true", self.mu_true)):
            if np.any(arr < 0) or not np.allclose(arr.sum(axis=-1), 1.0, rtol=0, atol=1e-9):
                raise ValueError(f"{name} rows must be probability vectors")

    @property
    def S(self) -> int:
        return self.gamma.shape[0]

    @property
    def K(self) -> int:
        return self.alpha.shape[1]

    @property
    def V(self) -> int:
        return self.phi_true.shape[2]


@dataclass(frozen=True)
class Truth:
    pi: np.ndarray      # (S,)
    theta: np.ndarray   # (S, K)


@dataclass
class SimResult:
    M: int
    N: int
    D: int
    sigma: float
    mu_kind: str
    seed: int
    mean_kl: float
    std_error: float
    per_doc_kl: list[float] = field(repr=False)

    def row(self, model: str) -> dict:
        return {"M": self.M, "N": self.N, "model": model, "mean_kl": self.mean_kl,
                "std_error": self.std_error}


def canonical_mu(kind: str) -> np.ndarray:
    """Rating distributions for S = 2: ``diff`` has disjoint supports per
    sentiment, ``unif`` is uniform for both."""
    if kind == "unif":
        return np.full((2, RATING_LEVELS), 0.2)
    if kind == "diff":
        return np.array([[0.0, 0.0, 0.0, 0.5, 0.5],
                         [0.5, 0.5, 0.0, 0.0, 0.0]])
    raise ValueError(f"unknown mu kind {kind!r}; expected one of {MU_KINDS}")


def synthetic_phi(S: int, K: int, V: int, concentration: float, seed: int) -> np.ndarray:
    """Word distributions drawn from a symmetric Dirichlet."""
    if concentration <= 0:
        raise ValueError("concentration must be > 0")
    rng = make_rng(seed)
    phi = rng.dirichlet(np.full(V, float(concentration)), size=(S, K))
    bad = ~np.isfinite(phi).all(axis=-1) | (phi.sum(axis=-1) <= 0)
    # very small concentrations can underflow; redraw those rows as point masses
    for l, z in zip(*np.nonzero(bad)):
        phi[l, z] = 0.0
        phi[l, z, rng.integers(V)] = 1.0
    return phi / phi.sum(axis=-1, keepdims=True)


def seed_lexicon(phi: np.ndarray, fraction: float, seed: int) -> tuple[np.ndarray, tuple[tuple[int, ...], ...]]:
    """Reserve a random ``fraction`` of the vocabulary per sentiment as
    polarity words and remove them from every other sentiment's rows.

    Returns the renormalised word distributions and the word ids owned by
    each sentiment. Rows left without mass fall back to uniform over the
    words they may still use.
    """
    S, K, V = phi.shape
    n_each = int(round(fraction * V))
    if n_each * S > V:
        raise ValueError("lexicon fraction too large for the vocabulary")
    order = make_rng(seed).permutation(V)
    owned = tuple(tuple(sorted(int(w) for w in order[l * n_each:(l + 1) * n_each])) for l in range(S))
    phi = phi.copy()
    for l in range(S):
        for other in range(S):
            if other != l and owned[other]:
                phi[l, :, list(owned[other])] = 0.0
    for l, z in zip(*np.nonzero(phi.sum(axis=-1) <= 0)):
        allowed = np.ones(V, dtype=bool)
        for other in range(S):
            if other != l:
                allowed[list(owned[other])] = False
        phi[l, z] = allowed
    return phi / phi.sum(axis=-1, keepdims=True), owned


def default_spec(mu_kind: str = "diff", S: int = 2, K: int = 5, V: int = 500,
                 concentration: float = 0.2, seed: int = 0, lexicon_fraction: float = 0.2) -> GenerativeSpec:
    """Generator with the standard symmetric gamma/alpha, Dirichlet word
    distributions and (unless ``lexicon_fraction`` is 0) polarity words."""
    phi = synthetic_phi(S, K, V, concentration, seed)
    lexicon = ()
    if lexicon_fraction > 0:
        phi, lexicon = seed_lexicon(phi, lexicon_fraction, child_seed(seed, 1))
    return GenerativeSpec(
        gamma=np.full(S, 3.0 / S),
        alpha=np.full((S, K), 3.0 / (S * K)),
        phi_true=phi,
        mu_true=canonical_mu(mu_kind),
        mu_kind=mu_kind,
        lexicon=lexicon,
    )


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One draw per row of ``probs``."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf <= u[:, None]).sum(axis=-1), probs.shape[-1] - 1)


def sample_document(spec: GenerativeSpec, N: int, M: int, seed: int, *, doc_id: str = "0",
                    pi: np.ndarray | None = None) -> tuple[Document, Truth]:
    """Draw one document from the generative process.

    ``pi`` overrides the Dirichlet draw of the sentiment proportions.
    """
    if N < 1 or M < 0:
        raise ValueError("need N >= 1 and M >= 0")
    rng = make_rng(seed)
    S, K = spec.S, spec.K
    pi = rng.dirichlet(spec.gamma) if pi is None else np.asarray(pi, dtype=np.float64)
    theta = np.vstack([rng.dirichlet(spec.alpha[l]) for l in range(S)])
    l_w = _categorical(rng, np.broadcast_to(pi, (N, S)))
    z_w = _categorical(rng, theta[l_w])
    words = _categorical(rng, spec.phi_true[l_w, z_w])
    l_r = _categorical(rng, np.broadcast_to(pi, (M, S)))
    ratings = _categorical(rng, spec.mu_true[l_r]) + 1 if M else np.zeros(0, dtype=np.int64)
    return Document(doc_id, words.tolist(), ratings.tolist()), Truth(pi=pi, theta=theta)


def make_corpus(spec: GenerativeSpec, D: int, N: int, M: int, seed: int) -> tuple[list[Document], list[Truth]]:
    if D < 1:
        raise ValueError("D must be >= 1")
    docs, truths = [], []
    for i in range(D):
        doc, truth = sample_document(spec, N, M, child_seed(seed, i), doc_id=str(i))
        docs.append(doc)
        truths.append(truth)
    return docs, truths


def training_hyperparams(spec: GenerativeSpec, sigma: float) -> Hyperparams:
    """Priors used to fit simulated corpora: the generator's gamma and alpha,
    the polarity-aware rating prior, and beta = 0.01 except that words owned
    by one sentiment get zero prior mass under the others."""
    beta = np.full((spec.S, spec.K, spec.V), BETA_DEFAULT)
    for l, owned in enumerate(spec.lexicon):
        for other in range(spec.S):
            if other != l and owned:
                beta[other, :, list(owned)] = 0.0
    return Hyperparams(gamma=spec.gamma, alpha=spec.alpha, beta=beta, delta=rating_delta(spec.S),
                       sigma=sigma, lexicon_seeded=bool(spec.lexicon))


def _overlap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.minimum(a, b).sum())


def align_sentiments(phi_hat: np.ndarray, phi_true: np.ndarray) -> tuple[int, ...]:
    """Sentiment permutation ``perm`` with fitted label ``perm[l]`` matched to true label ``l``.

    Symmetric word priors leave sentiment labels exchangeable, so fitted
    labels are matched to the generator's by word-distribution overlap: each
    true topic is credited with its best-overlapping fitted topic under the
    candidate sentiment, and the permutation with the largest total wins.
    The true document proportions are not consulted.
    """
    S = phi_true.shape[0]
    best, best_score = tuple(range(S)), -np.inf
    for perm in itertools.permutations(range(S)):
        score = sum(
            max(_overlap(phi_hat[perm[l], zh], phi_true[l, z]) for zh in range(phi_hat.shape[1]))
            for l in range(S) for z in range(phi_true.shape[1])
        )
        if score > best_score + 1e-12:
            best, best_score = perm, score
    return best


def recovery_kl(pi_hat: np.ndarray, truths: Sequence[Truth], perm: Sequence[int]) -> np.ndarray:
    pi_hat = pi_hat[:, list(perm)]
    return np.array([kl_divergence(pi_hat[i], t.pi) for i, t in enumerate(truths)])


def run_recovery_experiment(
    spec: GenerativeSpec,
    D: int,
    M_list: Sequence[int],
    ratio_list: Sequence[int],
    sigma: float | None,
    iterations: int,
    seed: int,
    *,
    sigma_grid: Sequence[float] = DEFAULT_SIGMA_GRID,
    cv_docs: int | None = None,
    cv_folds: int = 10,
    cv_iterations: int | None = None,
    particles: int = DEFAULT_PARTICLES,
    average_last: int = 50,
    thin: int = 2,
) -> list[SimResult]:
    """Fit the model to simulated corpora and score recovery of the document
    sentiment proportions by KL divergence.

    One corpus is drawn per (M, N = ratio * M) cell. With ``sigma=None`` the
    weight is chosen per cell by cross-validated word perplexity on a
    separate simulated validation corpus of ``cv_docs`` documents.
    Estimates are averaged over the last ``average_last`` samples (every
    ``thin`` sweeps), which steadies paired comparisons at small D.
    """
    results = []
    for c, (M, ratio) in enumerate(itertools.product(M_list, ratio_list)):
        N = int(ratio * M)
        cell_seed = child_seed(seed, M, N)
        docs, truths = make_corpus(spec, D, N, M, child_seed(cell_seed, 0))
        chosen = sigma
        if chosen is None:
            val_docs, _ = make_corpus(spec, cv_docs or D, N, M, child_seed(cell_seed, 1))
            report = cross_validate_sigma(val_docs, training_hyperparams(spec, 0.0), sigma_grid,
                                          cv_folds, cv_iterations or iterations, particles,
                                          child_seed(cell_seed, 2), average_last=average_last, thin=thin)
            chosen = report.selected_sigma
        fit = train(docs, training_hyperparams(spec, chosen), iterations, child_seed(cell_seed, 3),
                    score_every=0, average_last=average_last, thin=thin)
        perm = align_sentiments(fit.params.phi, spec.phi_true)
        kl = recovery_kl(fit.params.pi, truths, perm)
        se = float(kl.std(ddof=1) / np.sqrt(D)) if D > 1 else 0.0
        results.append(SimResult(M=M, N=N, D=D, sigma=float(chosen), mu_kind=spec.mu_kind, seed=seed,
                                 mean_kl=float(kl.mean()), std_error=se, per_doc_kl=kl.tolist()))
        log.info("M=%d N=%d sigma=%g mean KL %.4f (%.4f)", M, N, chosen, kl.mean(), se)
    return results
