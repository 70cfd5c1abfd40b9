"""Dirichlet hyperparameters and lexicon seeding of the word prior."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import RATING_LEVELS, Vocabulary, load_word_list, stem_token

POSITIVE = 0
NEGATIVE = 1
SENTIMENT_NAMES = ("positive", "negative")

BETA_DEFAULT = 0.01


class PriorError(ValueError):
    pass


@dataclass(frozen=True)
class SentimentLexicon:
    positive: frozenset[str] = frozenset()
    negative: frozenset[str] = frozenset()

    def __post_init__(self):
        both = set(self.positive) & set(self.negative)
        if both:
            raise PriorError(f"term {sorted(both)[0]!r} is listed as both positive and negative")

    def __len__(self) -> int:
        return len(self.positive) + len(self.negative)


def load_lexicon(positive_path: str | Path, negative_path: str | Path, stemming: bool = True) -> SentimentLexicon:
    """Read polarity word lists, normalising terms the same way as the corpus."""

    def norm(words):
        return frozenset(stem_token(w) if stemming else w for w in words)

    return SentimentLexicon(norm(load_word_list(positive_path)), norm(load_word_list(negative_path)))


@dataclass(frozen=True, eq=False)
class Hyperparams:
    """Prior parameters of the model plus the rating weight ``sigma``.

    Array shapes: gamma (S,), alpha (S, K), beta (S, K, V), delta (S, 5).
    Sentiment index 0 is positive and 1 is negative whenever S == 2.
    """

    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    sigma: float = 1.0
    lexicon_seeded: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta", "delta"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sigma", float(self.sigma))
        S = self.gamma.shape[0]
        if self.gamma.ndim != 1 or S < 1:
            raise PriorError("gamma must be a non-empty vector")
        if self.alpha.ndim != 2 or self.alpha.shape[0] != S:
            raise PriorError("alpha must have shape (S, K)")
        K = self.alpha.shape[1]
        if self.beta.ndim != 3 or self.beta.shape[:2] != (S, K):
            raise PriorError("beta must have shape (S, K, V)")
        if self.delta.shape != (S, RATING_LEVELS):
            raise PriorError(f"delta must have shape (S, {RATING_LEVELS})")
        for name in ("gamma", "alpha", "beta", "delta"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise PriorError(f"{name} entries must be finite and >= 0")
        if not self.sigma >= 0 or not np.isfinite(self.sigma):
            raise PriorError("sigma must be a finite real >= 0")
        if self.gamma.sum() <= 0:
            raise PriorError("gamma must have positive total mass")
        if np.any(self.alpha.sum(axis=1) <= 0):
            raise PriorError("every alpha row needs positive mass")
        if np.any(self.beta.sum(axis=2) <= 0):
            raise PriorError("every beta[l, z] row needs positive mass")
        if np.any(self.delta.sum(axis=1) <= 0):
            raise PriorError("every delta row needs positive mass")

    @property
    def S(self) -> int:
        return self.gamma.shape[0]

    @property
    def K(self) -> int:
        return self.alpha.shape[1]

    @property
    def V(self) -> int:
        return self.beta.shape[2]

    def with_sigma(self, sigma: float) -> "Hyperparams":
        return replace(self, sigma=sigma)

    def beta_spec(self) -> dict:
        """Compact description of beta: a base value and the zeroed cells.

        Only priors of the form "constant except for (sentiment, word) pairs
        set to zero across all topics" are representable; anything else is
        stored densely.
        """
        positive = self.beta[self.beta > 0]
        base = float(positive[0]) if positive.size else 0.0
        zero_lw = np.all(self.beta == 0, axis=1)  # (S, V)
        expected = np.broadcast_to(np.where(zero_lw[:, None, :], 0.0, base), self.beta.shape)
        if np.array_equal(expected, self.beta):
            return {
                "kind": "lexicon",
                "shape": list(self.beta.shape),
                "base": base,
                "zero": {str(l): np.flatnonzero(zero_lw[l]).tolist() for l in range(self.S)},
            }
        return {"kind": "dense", "shape": list(self.beta.shape), "values": self.beta.tolist()}

    @staticmethod
    def beta_from_spec(spec: dict) -> np.ndarray:
        shape = tuple(spec["shape"])
        if spec["kind"] == "dense":
            return np.asarray(spec["values"], dtype=np.float64).reshape(shape)
        beta = np.full(shape, float(spec["base"]))
        for l, ids in spec["zero"].items():
            beta[int(l), :, ids] = 0.0
        return beta

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "K": self.K,
            "V": self.V,
            "gamma": self.gamma.tolist(),
            "alpha": self.alpha.tolist(),
            "beta_spec": self.beta_spec(),
            "delta": self.delta.tolist(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(
            gamma=d["gamma"],
            alpha=d["alpha"],
            beta=cls.beta_from_spec(d["beta_spec"]),
            delta=d["delta"],
            sigma=d["sigma"],
        )


def rating_delta(S: int) -> np.ndarray:
    """Rating prior: increasing in r for positive, decreasing for negative.

    Only binary sentiment has a polarity-aware setting; for any other S
    every entry is 10.
    """
    r = np.arange(1, RATING_LEVELS + 1, dtype=np.float64)
    if S == 2:
        return np.vstack([10.0 * r, 10.0 * (6.0 - r)])
    return np.full((S, RATING_LEVELS), 10.0)


def build_hyperparams(
    S: int,
    K: int,
    vocab: Vocabulary | int,
    lexicon: SentimentLexicon | None = None,
    sigma: float = 1.0,
    beta_value: float = BETA_DEFAULT,
) -> Hyperparams:
    """Standard prior setting: symmetric gamma/alpha, polarity-aware delta,
    and beta zeroed for lexicon words under the opposite sentiment.

    ``vocab`` may be a plain vocabulary size when no lexicon is used.
    """
    if K < 1 or S < 1:
        raise PriorError("S and K must be >= 1")
    lexicon = lexicon or SentimentLexicon()
    if len(lexicon) and S != 2:
        raise PriorError("lexicon seeding requires S == 2 (positive, negative)")
    if len(lexicon) and not isinstance(vocab, Vocabulary):
        raise PriorError("lexicon seeding needs a Vocabulary, not a size")
    V = len(vocab) if isinstance(vocab, Vocabulary) else int(vocab)
    gamma = np.full(S, 3.0 / S)
    alpha = np.full((S, K), 3.0 / (S * K))
    beta = np.full((S, K, V), float(beta_value))
    if len(lexicon):
        for terms, opposite in ((lexicon.positive, NEGATIVE), (lexicon.negative, POSITIVE)):
            ids = [vocab.index[t] for t in terms if t in vocab]
            beta[opposite, :, ids] = 0.0
    return Hyperparams(gamma, alpha, beta, rating_delta(S), sigma, lexicon_seeded=bool(len(lexicon)))
