"""Command-line front end.

Every command reads a flat INI config (one section per command), applies
``--set key=value`` and the common flags on top, and writes its outputs
atomically into ``--out``. Each report carries the resolved config.

Exit codes: 0 success, 2 validation error, 3 numerical/model error.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import csv
import json
import logging
import os
import sys
import tempfile
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import corpus, evaluate, priors, sampler, simulate

log = logging.getLogger("jstrr")

EXIT_OK, EXIT_INVALID, EXIT_MODEL = 0, 2, 3
PACKAGE_PREFIX = "package:"


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------- config

def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _sigmas(text: str) -> list[float | str]:
    out = []
    for x in text.replace(",", " ").split():
        out.append("cv" if x.lower() == "cv" else float(x))
    return out


# key -> (parser, default); a default of ... marks a required key
_LEXICON = {"lexicon_positive": (str, ""), "lexicon_negative": (str, ""), "stemming": (_bool, True)}
_MODEL = {"S": (int, 2), "K": (int, 5), "iterations": (int, 1000), "average_last": (int, 0), "thin": (int, 1)}

SCHEMA: dict[str, dict[str, tuple]] = {
    "preprocess": {
        "input": (str, ...),
        "stopwords": (str, ""),
        "negation_triggers": (str, ""),
        "min_doc_frequency": (int, 5),
        "stemming": (_bool, True),
        "balance_classes": (_bool, False),
        "train_fraction": (float, 0.0),
    },
    "train": {
        "documents": (str, ...),
        "vocab": (str, ...),
        **_LEXICON,
        **_MODEL,
        "sigma": (float, 1.0),
    },
    "evaluate": {
        "model": (str, ...),
        "documents": (str, ...),
        "vocab": (str, ""),
        "particles": (int, evaluate.DEFAULT_PARTICLES),
        "use_ratings": (_bool, True),
    },
    "cv": {
        "documents": (str, ...),
        "vocab": (str, ...),
        **_LEXICON,
        **_MODEL,
        "sigma_grid": (_floats, list(evaluate.DEFAULT_SIGMA_GRID)),
        "folds": (int, 10),
        "particles": (int, evaluate.DEFAULT_PARTICLES),
    },
    "simulate": {
        "S": (int, 2),
        "K": (int, 5),
        "V": (int, 500),
        "D": (int, 1000),
        "M_list": (_ints, [1, 2, 3, 4, 5, 7, 10]),
        "ratio_list": (_ints, [10, 20, 30]),
        "mu_kind": (str, "diff"),
        "sigma": (_sigmas, [0.0, "cv"]),
        "sigma_grid": (_floats, list(evaluate.DEFAULT_SIGMA_GRID)),
        "iterations": (int, 1000),
        "concentration": (float, 0.2),
        "lexicon_fraction": (float, 0.2),
        "cv_docs": (int, 0),
        "cv_folds": (int, 10),
        "cv_iterations": (int, 0),
        "particles": (int, evaluate.DEFAULT_PARTICLES),
        "average_last": (int, 50),
        "thin": (int, 2),
    },
    "topics": {
        "model": (str, ...),
        "vocab": (str, ...),
        "n": (int, 20),
    },
}


def resolve_config(command: str, config_path: str | None, overrides: list[str]) -> dict:
    """Merge defaults, the command's config section and ``key=value`` overrides."""
    schema = {**SCHEMA[command], "seed": (int, 0)}
    raw: dict[str, str] = {}
    if config_path:
        if not Path(config_path).is_file():
            raise ConfigError(f"config file not found: {config_path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(config_path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {config_path}: {exc}") from None
        if parser.has_section(command):
            raw.update(parser.items(command))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        raw[key.strip()] = value.strip()
    resolved = {}
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                resolved[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for config key {key!r}: {exc}") from None
        elif default is ...:
            raise ConfigError(f"missing required config key {key!r} for command {command!r}")
        else:
            resolved[key] = default
    return resolved


def input_path(value: str, key: str) -> Path:
    """Resolve a config path, including ``package:NAME`` for bundled data."""
    if value.startswith(PACKAGE_PREFIX):
        path = Path(str(resources.files("jstrr") / "data" / value[len(PACKAGE_PREFIX):]))
    else:
        path = Path(value)
    if not path.is_file():
        raise ConfigError(f"input file for {key!r} not found: {value}")
    return path


# --------------------------------------------------------------------- output

@contextlib.contextmanager
def atomic_path(target: Path):
    """Yield a temporary sibling path that replaces ``target`` on success."""
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, target)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_text(target: Path, text: str) -> None:
    with atomic_path(target) as tmp:
        tmp.write_text(text, encoding="utf-8")


def write_json(target: Path, obj: dict) -> None:
    write_text(target, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def write_csv(target: Path, header: list[str], rows: list[list], echo: dict) -> None:
    """CSV preceded by ``# key = value`` lines echoing the resolved config."""
    lines = [f"# {k} = {json.dumps(v, sort_keys=True)}" for k, v in sorted(echo.items())]
    lines.append(",".join(header))
    lines.extend(",".join(_cell(c) for c in row) for row in rows)
    write_text(target, "\n".join(lines) + "\n")


def read_csv_rows(path: str | Path) -> list[dict[str, str]]:
    """Parse a CSV written by this module, skipping the echo lines."""
    with open(path, encoding="utf-8") as fh:
        body = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(body))


# --------------------------------------------------------------------- helpers

def _lexicon(cfg: dict) -> priors.SentimentLexicon | None:
    pos, neg = cfg["lexicon_positive"], cfg["lexicon_negative"]
    if not pos and not neg:
        return None
    if not (pos and neg):
        raise ConfigError("lexicon_positive and lexicon_negative must be given together")
    return priors.load_lexicon(input_path(pos, "lexicon_positive"), input_path(neg, "lexicon_negative"),
                               stemming=cfg["stemming"])


def _documents(value: str, key: str) -> list[corpus.Document]:
    docs = corpus.load_documents(input_path(value, key))
    if not docs:
        raise ConfigError(f"no documents in {value}")
    return docs


def _model_inputs(cfg: dict, sigma: float):
    docs = _documents(cfg["documents"], "documents")
    vocab = corpus.Vocabulary.from_tsv(input_path(cfg["vocab"], "vocab"))
    hyper = priors.build_hyperparams(cfg["S"], cfg["K"], vocab, _lexicon(cfg), sigma=sigma)
    return docs, vocab, hyper


def save_checkpoint(path: Path, result: sampler.TrainResult, hyper: priors.Hyperparams,
                    vocab_digest: str, echo: dict) -> None:
    p = result.params
    write_json(path, {
        **{k: v for k, v in hyper.to_dict().items()},
        "lexicon_seeded": hyper.lexicon_seeded,
        "pi": p.pi.tolist(),
        "theta": p.theta.tolist(),
        "phi": p.phi.tolist(),
        "mu": p.mu.tolist(),
        "vocabulary_sha256": vocab_digest,
        "seed": result.seed,
        "iterations": result.iterations,
        "config": echo,
    })


def load_checkpoint(path: Path) -> tuple[priors.Hyperparams, sampler.ModelParams, dict]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        hyper = priors.Hyperparams.from_dict(data)
        params = sampler.ModelParams(*(np.asarray(data[k], dtype=np.float64) for k in ("pi", "theta", "phi", "mu")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"malformed checkpoint {path}: {exc!r}") from None
    if params.phi.shape != hyper.beta.shape or params.mu.shape != hyper.delta.shape:
        raise ConfigError(f"checkpoint {path} has inconsistent shapes")
    return hyper, params, data


# --------------------------------------------------------------------- commands

def cmd_preprocess(cfg: dict, seed: int, out: Path, echo: dict) -> None:
    reviews = corpus.load_reviews(input_path(cfg["input"], "input"))
    opts = corpus.PreprocessOptions(
        stopword_list=corpus.load_word_list(input_path(cfg["stopwords"], "stopwords")) if cfg["stopwords"] else set(),
        min_doc_frequency=cfg["min_doc_frequency"],
        enable_stemming=cfg["stemming"],
        balance_classes=cfg["balance_classes"],
        seed=seed,
    )
    if cfg["negation_triggers"]:
        opts.negation_triggers = corpus.load_word_list(input_path(cfg["negation_triggers"], "negation_triggers"))
    docs, vocab = corpus.preprocess(reviews, opts)
    with atomic_path(out / "documents.jsonl") as tmp:
        corpus.save_documents(docs, tmp)
    with atomic_path(out / "vocab.tsv") as tmp:
        vocab.to_tsv(tmp)
    summary = {
        "reviews_in": len(reviews),
        "D": len(docs),
        "V": len(vocab),
        "mean_words": sum(d.n_words for d in docs) / len(docs),
        "vocabulary_sha256": vocab.digest(),
    }
    if cfg["train_fraction"]:
        train_docs, test_docs = corpus.split(docs, cfg["train_fraction"], seed)
        for name, part in (("train.jsonl", train_docs), ("test.jsonl", test_docs)):
            with atomic_path(out / name) as tmp:
                corpus.save_documents(part, tmp)
        summary.update(D_train=len(train_docs), D_test=len(test_docs))
    write_json(out / "preprocess.json", {**summary, "config": echo})
    print(f"Number of reviews D={summary['D']}  Vocabulary size V={summary['V']}  "
          f"Average number of words {summary['mean_words']:.2f}")


def cmd_train(cfg: dict, seed: int, out: Path, echo: dict) -> None:
    docs, vocab, hyper = _model_inputs(cfg, cfg["sigma"])
    result = sampler.train(docs, hyper, cfg["iterations"], seed,
                           average_last=cfg["average_last"], thin=cfg["thin"])
    save_checkpoint(out / "model.json", result, hyper, vocab.digest(), echo)
    write_csv(out / "diagnostics.csv", ["sweep", "joint_log_score"],
              [[k + 1, s] for k, s in enumerate(result.log_scores)], echo)
    print(f"trained D={len(docs)} V={len(vocab)} S={hyper.S} K={hyper.K} sigma={hyper.sigma:g} "
          f"iterations={cfg['iterations']} final log score {result.log_scores[-1]:.4f}")


def cmd_evaluate(cfg: dict, seed: int, out: Path, echo: dict) -> None:
    hyper, params, data = load_checkpoint(input_path(cfg["model"], "model"))
    if cfg["vocab"]:
        digest = corpus.Vocabulary.from_tsv(input_path(cfg["vocab"], "vocab")).digest()
        if digest != data.get("vocabulary_sha256"):
            raise ConfigError("vocabulary does not match the one the model was trained on")
    docs = _documents(cfg["documents"], "documents")
    wp = evaluate.word_perplexity(docs, params, hyper, cfg["particles"], seed, cfg["use_ratings"])
    rp = None
    if any(d.n_ratings for d in docs):
        rp = evaluate.rating_perplexity(docs, params, hyper)
    report = evaluate.PerplexityReport(word_perplexity=wp, upper_bound=evaluate.perplexity_upper_bound(docs),
                                       particles=cfg["particles"], seed=seed, rating_perplexity=rp)
    write_json(out / "evaluation.json", {**report.to_dict(), "config": echo})
    print(f"word perplexity {wp:.4f} (upper bound {report.upper_bound:.4f})")


def cmd_cv(cfg: dict, seed: int, out: Path, echo: dict) -> None:
    docs, _, hyper = _model_inputs(cfg, 0.0)
    report = evaluate.cross_validate_sigma(docs, hyper, cfg["sigma_grid"], cfg["folds"], cfg["iterations"],
                                           cfg["particles"], seed, average_last=cfg["average_last"],
                                           thin=cfg["thin"])
    write_json(out / "cv.json", {**report.to_dict(), "config": echo})
    header = ["sigma", "mean_perplexity"] + [f"fold_{f + 1}" for f in range(cfg["folds"])]
    rows = [[s, float(m), *map(float, scores)]
            for s, m, scores in zip(report.grid, report.mean_scores, report.fold_scores)]
    write_csv(out / "cv_curve.csv", header, rows, echo)
    print(f"selected sigma {report.selected_sigma:g}")


def _model_label(sigma, mu_kind: str, chosen: float) -> str:
    if sigma == 0.0:
        return "JST"
    tag = f"cv:{chosen:g}" if sigma == "cv" else f"{chosen:g}"
    return f"JST-RR(mu^{mu_kind}) sigma={tag}"


def cmd_simulate(cfg: dict, seed: int, out: Path, echo: dict) -> None:
    if cfg["mu_kind"] not in simulate.MU_KINDS:
        raise ConfigError(f"bad value for config key 'mu_kind': {cfg['mu_kind']!r}")
    spec = simulate.default_spec(cfg["mu_kind"], cfg["S"], cfg["K"], cfg["V"], cfg["concentration"], seed,
                                 cfg["lexicon_fraction"])
    rows, details = [], []
    for sigma in cfg["sigma"]:
        if sigma != "cv" and sigma < 0:
            raise ConfigError("bad value for config key 'sigma': must be >= 0")
        results = simulate.run_recovery_experiment(
            spec, cfg["D"], cfg["M_list"], cfg["ratio_list"], None if sigma == "cv" else sigma,
            cfg["iterations"], seed, sigma_grid=cfg["sigma_grid"], cv_docs=cfg["cv_docs"] or None,
            cv_folds=cfg["cv_folds"], cv_iterations=cfg["cv_iterations"] or None, particles=cfg["particles"],
            average_last=cfg["average_last"], thin=cfg["thin"])
        for r in results:
            rows.append(r.row(_model_label(sigma, cfg["mu_kind"], r.sigma)))
            details.append({**rows[-1], "sigma": r.sigma, "per_doc_kl": r.per_doc_kl})
    rows.sort(key=lambda r: (r["M"], r["N"]))
    write_csv(out / "simulation.csv", ["M", "N", "model", "mean_kl", "std_error"],
              [[r["M"], r["N"], r["model"], r["mean_kl"], r["std_error"]] for r in rows], echo)
    write_json(out / "simulation.json", {"results": details, "config": echo})
    for r in rows:
        print(f"M={r['M']} N={r['N']} {r['model']}: {r['mean_kl']:.4f} ({r['std_error']:.4f})")


def cmd_topics(cfg: dict, seed: int, out: Path, echo: dict) -> None:
    hyper, params, data = load_checkpoint(input_path(cfg["model"], "model"))
    vocab = corpus.Vocabulary.from_tsv(input_path(cfg["vocab"], "vocab"))
    if vocab.digest() != data.get("vocabulary_sha256") or len(vocab) != hyper.V:
        raise ConfigError("vocabulary does not match the one the model was trained on")
    n = cfg["n"]
    if n < 1:
        raise ConfigError("bad value for config key 'n': must be >= 1")
    if n > hyper.V:
        warnings.warn(f"n={n} exceeds vocabulary size {hyper.V}; clamped", UserWarning)
        n = hyper.V
    names = priors.SENTIMENT_NAMES if hyper.S == 2 else tuple(str(l) for l in range(hyper.S))
    rows = []
    for l in range(hyper.S):
        for z in range(hyper.K):
            for rank, (term, prob) in enumerate(sampler.top_words(params, vocab, l, z, n), start=1):
                rows.append([names[l], z, rank, term, prob])
    write_csv(out / "topics.csv", ["sentiment", "topic", "rank", "term", "prob"], rows, echo)
    write_csv(out / "ratings.csv", ["sentiment"] + [f"r{r}" for r in range(1, corpus.RATING_LEVELS + 1)],
              [[names[l], *map(float, params.mu[l])] for l in range(hyper.S)], echo)
    print(f"wrote top {n} words for {hyper.S * hyper.K} sentiment-topic pairs")


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "simulate": cmd_simulate,
    "topics": cmd_topics,
}


# --------------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jstrr", description="Joint sentiment-topic model with ratings.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file; the [%s] section is used" % name)
        p.add_argument("--seed", type=int, help="master seed (default: config value or 0)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for compiled kernels")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _set_threads(n: int) -> None:
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    import numba

    with warnings.catch_warnings():
        # numba reports unusable optional threading layers when first queried
        warnings.simplefilter("ignore")
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = resolve_config(args.command, args.config, overrides)
        seed = cfg.pop("seed")
        if seed < 0:
            raise ConfigError("seed must be >= 0")
        _set_threads(args.threads)
        echo = {"command": args.command, "seed": seed, **cfg}
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _warn_to_stderr
            COMMANDS[args.command](cfg, seed, Path(args.out), echo)
    except evaluate.ZeroLikelihoodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ConfigError, corpus.CorpusError, priors.PriorError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (sampler.SamplerError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except Exception as exc:  # anything else is reported as a model failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def _warn_to_stderr(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
