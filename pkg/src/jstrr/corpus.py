"""Review ingestion and the text preprocessing pipeline.

Raw reviews are JSON Lines records. ``preprocess`` turns them into
``Document`` objects over a lexicographically ordered ``Vocabulary``.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import porter
from .rng import make_rng

NEGATION_PREFIX = "not_"
DEFAULT_NEGATION_TRIGGERS = frozenset({"not", "no", "never", "n't", "cannot"})
RATING_LEVELS = 5

_NON_WORD = re.compile(r"[^0-9a-z_\s]+")


class CorpusError(ValueError):
    """Invalid input data or a corpus that cannot be built."""


@dataclass(frozen=True)
class Review:
    id: str
    text: str
    rating: int

    def __post_init__(self):
        if not 1 <= self.rating <= RATING_LEVELS:
            raise CorpusError(f"rating {self.rating} out of range for review {self.id!r}")


@dataclass(frozen=True)
class Document:
    """Observed word ids plus observed ratings of one review."""

    id: str
    word_ids: tuple[int, ...]
    ratings: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "word_ids", tuple(int(w) for w in self.word_ids))
        object.__setattr__(self, "ratings", tuple(int(r) for r in self.ratings))
        if any(w < 0 for w in self.word_ids):
            raise CorpusError(f"negative word id in document {self.id!r}")
        if any(not 1 <= r <= RATING_LEVELS for r in self.ratings):
            raise CorpusError(f"rating out of range in document {self.id!r}")

    @property
    def n_words(self) -> int:
        return len(self.word_ids)

    @property
    def n_ratings(self) -> int:
        return len(self.ratings)


class Vocabulary:
    """Bijection between terms and integer ids ``0..V-1``."""

    def __init__(self, terms: Iterable[str], document_frequency: Sequence[int] | None = None):
        self.terms: list[str] = list(terms)
        if not self.terms:
            raise CorpusError("vocabulary must contain at least one term")
        self.index: dict[str, int] = {t: k for k, t in enumerate(self.terms)}
        if len(self.index) != len(self.terms):
            raise CorpusError("duplicate terms in vocabulary")
        if document_frequency is None:
            document_frequency = [0] * len(self.terms)
        if len(document_frequency) != len(self.terms):
            raise CorpusError("document_frequency length does not match terms")
        self.document_frequency = [int(x) for x in document_frequency]

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.terms == other.terms

    def __repr__(self) -> str:
        return f"Vocabulary(V={len(self)})"

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index[t] for t in tokens]

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256("\n".join(self.terms).encode("utf-8")).hexdigest()

    def to_tsv(self, path: str | Path) -> None:
        lines = ["id\tterm\tdocument_frequency"]
        lines += [f"{k}\t{t}\t{df}" for k, (t, df) in enumerate(zip(self.terms, self.document_frequency))]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "Vocabulary":
        terms, dfs = [], []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if header != ["id", "term", "document_frequency"]:
                raise CorpusError(f"{path}: unexpected vocabulary header {header}")
            for lineno, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[0]) != len(terms):
                    raise CorpusError(f"{path}: malformed vocabulary row at line {lineno}")
                terms.append(parts[1])
                dfs.append(int(parts[2]))
        return cls(terms, dfs)


@dataclass
class PreprocessOptions:
    stopword_list: set[str] = field(default_factory=set)
    min_doc_frequency: int = 5
    negation_triggers: set[str] = field(default_factory=lambda: set(DEFAULT_NEGATION_TRIGGERS))
    enable_stemming: bool = True
    balance_classes: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.min_doc_frequency < 1:
            raise CorpusError("min_doc_frequency must be >= 1")


def load_reviews(path: str | Path) -> list[Review]:
    """Read reviews from a JSON Lines file.

    Missing ids are replaced by the zero-based record index. Blank lines are
    skipped but still counted for line numbers in error messages.
    """
    reviews = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                text = record["text"]
                rating = record["rating"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"malformed record at line {lineno}: {exc}") from None
            if not isinstance(text, str) or isinstance(rating, bool) or not isinstance(rating, int):
                raise CorpusError(f"malformed record at line {lineno}: bad field types")
            if not 1 <= rating <= RATING_LEVELS:
                raise CorpusError(f"rating out of range at line {lineno}")
            rid = record.get("id")
            reviews.append(Review(str(rid) if rid is not None else str(len(reviews)), text, rating))
    return reviews


def load_word_list(path: str | Path) -> set[str]:
    """One token per line; blank lines and ``#`` comments ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.split("#", 1)[0].strip().lower()
            if token:
                words.add(token)
    return words


def apply_negation(tokens: Sequence[str], triggers: Iterable[str]) -> list[str]:
    """Drop negation triggers and prefix the next non-trigger token with ``not_``."""
    triggers = set(triggers)
    out = []
    negate = False
    for tok in tokens:
        if tok in triggers:
            negate = True
            continue
        if negate and not tok.startswith(NEGATION_PREFIX):
            tok = NEGATION_PREFIX + tok
        out.append(tok)
        negate = False
    return out


def stem_token(token: str) -> str:
    # the negation prefix is kept verbatim, only the word part is stemmed
    if token.startswith(NEGATION_PREFIX) and len(token) > len(NEGATION_PREFIX):
        return NEGATION_PREFIX + porter.stem(token[len(NEGATION_PREFIX):])
    return porter.stem(token)


def tokenize(text: str, opts: PreprocessOptions) -> list[str]:
    """Run the per-review part of the pipeline and return the kept tokens."""
    text = text.lower()
    # keep apostrophes long enough to recognise "n't" as a trigger
    raw = re.sub(r"[^0-9a-z_'\s]+", " ", text).split()
    tokens = []
    for tok in raw:
        if tok.endswith("n't") and "n't" in opts.negation_triggers and len(tok) > 3:
            tokens.extend([tok[:-3], "n't"])
        else:
            tokens.append(tok)
    tokens = [t if t in opts.negation_triggers else _NON_WORD.sub("", t.replace("'", "")) for t in tokens]
    tokens = [t for t in tokens if t]
    tokens = apply_negation(tokens, opts.negation_triggers)
    tokens = [t for t in tokens if t not in opts.stopword_list]
    if opts.enable_stemming:
        tokens = [stem_token(t) for t in tokens]
    return tokens


def preprocess(reviews: Sequence[Review], opts: PreprocessOptions) -> tuple[list[Document], Vocabulary]:
    """Tokenize, filter and index reviews.

    Each surviving review becomes a ``Document`` with a single rating.
    Terms with document frequency below ``opts.min_doc_frequency`` are
    dropped before the vocabulary is built; documents left empty are dropped
    afterwards, and class balancing (if enabled) runs last.
    """
    if not reviews:
        raise CorpusError("no reviews to preprocess")
    tokenized = [tokenize(r.text, opts) for r in reviews]
    df = Counter()
    for toks in tokenized:
        df.update(set(toks))
    kept_terms = sorted(t for t, c in df.items() if c >= opts.min_doc_frequency)
    kept = set(kept_terms)
    survivors = []
    for review, toks in zip(reviews, tokenized):
        toks = [t for t in toks if t in kept]
        if toks:
            survivors.append((review, toks))
    if not survivors:
        raise CorpusError("empty corpus")
    vocab = Vocabulary(kept_terms, [df[t] for t in kept_terms])
    documents = [Document(r.id, vocab.ids(toks), (r.rating,)) for r, toks in survivors]
    if opts.balance_classes:
        documents = balance_classes(documents, opts.seed)
    return documents, vocab


def balance_classes(documents: Sequence[Document], seed: int) -> list[Document]:
    """Down-sample the majority polarity to the size of the minority one.

    Ratings 4-5 count as positive, 1-2 as negative, 3 is discarded. Survivors
    keep their input order.
    """
    positive, negative = [], []
    for k, doc in enumerate(documents):
        if doc.n_ratings != 1:
            raise CorpusError(f"document {doc.id!r} must carry exactly one rating to be balanced")
        r = doc.ratings[0]
        if r >= 4:
            positive.append(k)
        elif r <= 2:
            negative.append(k)
    if not positive or not negative:
        raise CorpusError("cannot balance: one class empty")
    size = min(len(positive), len(negative))
    rng = make_rng(seed)
    keep = set()
    for group in (positive, negative):
        chosen = rng.choice(len(group), size=size, replace=False) if len(group) > size else range(len(group))
        keep.update(group[c] for c in chosen)
    return [documents[k] for k in sorted(keep)]


def split(documents: Sequence, train_fraction: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle then cut at ``floor(train_fraction * D)``."""
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError("train_fraction must lie in (0, 1)")
    n = len(documents)
    if n < 2:
        raise CorpusError("need at least 2 documents to split")
    cut = math.floor(train_fraction * n)
    if cut == 0 or cut == n:
        raise CorpusError(f"train_fraction {train_fraction} leaves an empty partition for {n} documents")
    order = make_rng(seed).permutation(n)
    return [documents[k] for k in order[:cut]], [documents[k] for k in order[cut:]]


def save_documents(documents: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps({"id": doc.id, "word_ids": list(doc.word_ids), "ratings": list(doc.ratings)}))
            fh.write("\n")


def load_documents(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                docs.append(Document(str(rec["id"]), rec["word_ids"], rec.get("ratings", ())))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}: malformed document at line {lineno}: {exc}") from None
    return docs
