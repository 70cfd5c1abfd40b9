"""Joint sentiment-topic model of review words and ratings (JST-RR).

Collapsed Gibbs inference with a rating weight ``sigma``; ``sigma = 0``
reduces to the text-only JST model.
"""

from .corpus import (
    CorpusError,
    Document,
    PreprocessOptions,
    Review,
    Vocabulary,
    apply_negation,
    balance_classes,
    load_documents,
    load_reviews,
    load_word_list,
    preprocess,
    save_documents,
    split,
)
from .evaluate import (
    CvReport,
    PerplexityReport,
    ZeroLikelihoodError,
    cross_validate_sigma,
    doc_log_likelihood,
    information_gain,
    kl_divergence,
    perplexity_upper_bound,
    rating_perplexity,
    word_perplexity,
)
from .priors import Hyperparams, PriorError, SentimentLexicon, build_hyperparams, load_lexicon
from .sampler import (
    CountState,
    ModelParams,
    SamplerError,
    TrainResult,
    estimate_params,
    gibbs_sweep,
    init_assignments,
    joint_log_score,
    rating_conditional,
    top_words,
    train,
    word_conditional,
)
from .simulate import (
    GenerativeSpec,
    SimResult,
    canonical_mu,
    make_corpus,
    run_recovery_experiment,
    sample_document,
    synthetic_phi,
)

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Filesystem path of a bundled fixture file."""
    from importlib import resources

    return str(resources.files(__name__) / "data" / name)
