"""Batch command line: train, parse, sample, analyze, extract, eval.

Every stage reads and writes plain text (CoNLL-U and TSV), so the whole
pipeline is inspectable and diffable.  Exit codes: 0 success, 1 usage
error, 2 data error.  All commands are deterministic given their flags;
``--workers`` only parallelizes across sentences and never changes the
output.
"""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import click

from .analysis import (
    calibration_pairs,
    calibration_table,
    corpus_las,
    entropy_report,
    greedy_path_pr,
    path_pr_curve,
)
from .conllu import (
    ConlluError,
    Sentence,
    TreeValidationError,
    read_conllu,
    write_conllu,
)
from .inference import (
    draw_parses,
    draw_samples,
    greedy_parse,
    load_sample_sets,
    mbr_parse,
    mc_map,
    write_sample_file,
)
from .marginals import (
    QueryParseError,
    load_keywords,
    marginal_report_rows,
    parse_query_file,
    path_marginals,
    sample_summary,
)
from .model import ModelFormatError, TrainConfig, load_model, save_model, train
from .applications import rank_entities, read_mentions_tsv

# Usage problems exit 1, bad data exits 2.
click.UsageError.exit_code = 1


class DataError(click.ClickException):
    exit_code = 2


_DATA_ERRORS = (
    ConlluError,
    TreeValidationError,
    ModelFormatError,
    QueryParseError,
    ValueError,
    OSError,
)


@contextmanager
def _data_errors():
    try:
        yield
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from exc


@contextmanager
def _out_stream(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fobj:
            yield fobj


def _read_treebank(path, require_trees: bool):
    pairs = list(read_conllu(path))
    if require_trees:
        annotated = [(s, t) for s, t in pairs if t is not None]
        if not annotated:
            raise DataError(f"{path}: no fully annotated sentences")
        return annotated
    return pairs


# Per-worker state for process pools; set once per worker via the
# initializer so the model is not re-pickled for every sentence.
_WORKER_MODEL = None


def _init_worker(model):
    global _WORKER_MODEL
    _WORKER_MODEL = model


def _job_greedy(sentence):
    return greedy_parse(_WORKER_MODEL, sentence)


def _job_mcmap(args):
    sentence, n_samples, seed = args
    return mc_map(draw_samples(_WORKER_MODEL, sentence, n_samples, seed))


def _job_mbr(args):
    sentence, n_samples, seed = args
    return mbr_parse(draw_samples(_WORKER_MODEL, sentence, n_samples, seed))


def _job_draw(args):
    sentence, n_samples, seed = args
    return draw_parses(_WORKER_MODEL, sentence, n_samples, seed)


def _map_sentences(fn, items, workers: int, model):
    if workers <= 1:
        _init_worker(model)
        return [fn(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(model,)
    ) as pool:
        return list(pool.map(fn, items, chunksize=16))


@click.group()
def main():
    """Probabilistic dependency parsing and Monte Carlo inference."""


@main.command("train")
@click.argument("treebank", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--epochs", default=10, show_default=True)
@click.option("--l2", default=1e-6, show_default=True)
@click.option("--learning-rate", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--holdout", default=0.1, show_default=True)
def cmd_train(treebank, model_path, epochs, l2, learning_rate, seed, holdout):
    """Fit the action model on a gold CoNLL-U treebank."""
    with _data_errors():
        pairs = _read_treebank(treebank, require_trees=True)
        config = TrainConfig(
            epochs=epochs,
            l2=l2,
            learning_rate=learning_rate,
            seed=seed,
            holdout_fraction=holdout,
        )
        result = train(pairs, config)
        save_model(result.model, model_path)
    for i, acc in enumerate(result.epoch_accuracy, start=1):
        click.echo(f"epoch {i}\theldout-accuracy {acc:.4f}")
    click.echo(
        f"trained on {result.n_trained} sentences, "
        f"skipped {result.n_skipped} non-projective",
        err=True,
    )


@main.command("parse")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--mode",
    type=click.Choice(["greedy", "mcmap", "mbr"]),
    default="greedy",
    show_default=True,
)
@click.option("--samples", "-S", "n_samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", default=1, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
def cmd_parse(model_path, input_path, mode, n_samples, seed, workers, output):
    """Parse sentences: greedy, sample-mode (mcmap), or minimum-risk.

    mcmap and mbr need --samples and --seed.  Minimum-risk output that
    does not form a tree is flagged with ``# is_tree = false``.
    """
    if mode in ("mcmap", "mbr") and (n_samples is None or seed is None):
        raise click.UsageError(f"--mode {mode} requires --samples and --seed")
    if n_samples is not None and n_samples < 1:
        raise click.UsageError("--samples must be >= 1")
    with _data_errors():
        model = load_model(model_path)
        sentences = [s for s, _ in read_conllu(input_path)]
        if mode == "greedy":
            results = _map_sentences(_job_greedy, sentences, workers, model)
            items = list(zip(sentences, results))
        elif mode == "mcmap":
            jobs = [(s, n_samples, seed) for s in sentences]
            results = _map_sentences(_job_mcmap, jobs, workers, model)
            items = list(zip(sentences, results))
        else:
            jobs = [(s, n_samples, seed) for s in sentences]
            results = _map_sentences(_job_mbr, jobs, workers, model)
            items = []
            for sentence, (assignment, is_tree) in zip(sentences, results):
                if not is_tree:
                    sentence = Sentence(
                        sentence.sent_id,
                        sentence.tokens,
                        sentence.metadata + (("is_tree", "false"),),
                    )
                items.append((sentence, assignment))
        with _out_stream(output) as out:
            write_conllu(items, out)


@main.command("sample")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--samples", "-S", "n_samples", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--workers", default=1, show_default=True)
@click.option("-o", "--output", default="-", show_default=True)
def cmd_sample(model_path, input_path, n_samples, seed, workers, output):
    """Write S posterior samples per sentence as multi-sample CoNLL-U."""
    if n_samples < 1:
        raise click.UsageError("--samples must be >= 1")
    with _data_errors():
        model = load_model(model_path)
        sentences = [s for s, _ in read_conllu(input_path)]
        jobs = [(s, n_samples, seed) for s in sentences]
        results = _map_sentences(_job_draw, jobs, workers, model)
        with _out_stream(output) as out:
            write_sample_file(zip(sentences, results), out)


def _parse_thresholds(text):
    if not text:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"bad threshold list {text!r}") from None


@main.command("analyze")
@click.argument("samples_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("gold", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=".")
@click.option("--d-min", default=1, show_default=True)
@click.option("--d-max", default=3, show_default=True)
@click.option("--thresholds", default="", help="Comma-separated grid; default: all observed probabilities.")
@click.option("--bin-size", "-B", default=5000, show_default=True)
def cmd_analyze(samples_file, gold, out_dir, d_min, d_max, thresholds, bin_size):
    """Entropy, path precision/recall, and calibration reports.

    Writes entropy.tsv, summary.tsv, paths_pr.tsv and calibration.tsv
    into --out-dir; headline numbers go to stdout.
    """
    if d_min < 1 or d_max < d_min:
        raise click.UsageError("need 1 <= d-min <= d-max")
    grid = _parse_thresholds(thresholds)
    with _data_errors():
        sample_sets = load_sample_sets(samples_file)
        gold_by_id = {}
        for sentence, tree in read_conllu(gold):
            if tree is None:
                raise DataError(f"gold sentence {sentence.sent_id!r} has no tree")
            gold_by_id[sentence.sent_id] = tree
        missing = [
            s.sentence.sent_id
            for s in sample_sets
            if s.sentence.sent_id not in gold_by_id
        ]
        if missing:
            raise DataError(f"no gold tree for sampled sentences: {missing[:5]}")
        gold_trees = [gold_by_id[s.sentence.sent_id] for s in sample_sets]

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        report = entropy_report(sample_sets)
        with open(out / "entropy.tsv", "w", encoding="utf-8") as fobj:
            fobj.write("sent_id\tn_tokens\tdomain_size\tentropy\n")
            for row in report.rows:
                fobj.write(
                    f"{row.sent_id}\t{row.n_tokens}\t{row.domain_size}"
                    f"\t{row.entropy:.6f}\n"
                )
        with open(out / "summary.tsv", "w", encoding="utf-8") as fobj:
            fobj.write(
                "sent_id\tn_tokens\tdomain_size\ttop_counts\ttop_prob\tentropy\n"
            )
            for sset in sample_sets:
                summ = sample_summary(sset)
                top = ",".join(str(c) for c in summ.top_counts)
                fobj.write(
                    f"{sset.sentence.sent_id}\t{len(sset.sentence)}"
                    f"\t{summ.domain_size}\t{top}\t{summ.top_prob:.6f}"
                    f"\t{summ.entropy:.6f}\n"
                )
        click.echo(
            "entropy-length correlation: "
            f"pearson={_fmt(report.pearson)} spearman={_fmt(report.spearman)}"
        )

        with open(out / "paths_pr.tsv", "w", encoding="utf-8") as pr_file, open(
            out / "calibration.tsv", "w", encoding="utf-8"
        ) as cal_file, open(
            out / "marginals.tsv", "w", encoding="utf-8"
        ) as marg_file:
            pr_file.write("path_length\tthreshold\tmetric\tvalue\n")
            cal_file.write(
                "path_length\tbin\tcount\tmean_predicted"
                "\tempirical_precision\tprob_min\tprob_max\n"
            )
            marg_file.write("sent_id\tobject_type\tobject_key\tprobability\n")
            for d in range(d_min, d_max + 1):
                for sid, otype, key, prob in marginal_report_rows(
                    sample_sets, d
                ):
                    marg_file.write(f"{sid}\t{otype}\t{key}\t{prob:.6f}\n")
                marginals = [path_marginals(s, d) for s in sample_sets]
                curve = path_pr_curve(marginals, gold_trees, d, grid)
                for point in curve.points:
                    for metric, value in (
                        ("precision", point.precision),
                        ("recall", point.recall),
                        ("f1", point.f1),
                    ):
                        pr_file.write(
                            f"{d}\t{point.threshold:.6f}\t{metric}\t{value:.6f}\n"
                        )
                greedy_point = greedy_path_pr(
                    [mc_map(s) for s in sample_sets], gold_trees, d
                )
                pr_file.write(
                    f"{d}\tmcmap\tf1\t{greedy_point.f1:.6f}\n"
                )
                click.echo(
                    f"d={d}: max-F1 {curve.best.f1:.4f} at t={curve.best.threshold:.2f}"
                    f" (mcmap single-tree F1 {greedy_point.f1:.4f})"
                )
                pairs = calibration_pairs(marginals, gold_trees, d)
                cal = calibration_table(pairs, bin_size)
                for i, cbin in enumerate(cal.bins):
                    cal_file.write(
                        f"{d}\t{i}\t{cbin.count}\t{cbin.mean_predicted:.6f}"
                        f"\t{cbin.empirical_precision:.6f}"
                        f"\t{cbin.prob_min:.6f}\t{cbin.prob_max:.6f}\n"
                    )
                click.echo(
                    f"d={d}: calibration bins={len(cal.bins)} "
                    f"mean-abs-gap={cal.mean_abs_gap:.4f}"
                )


def _fmt(value):
    return "n/a" if value is None else f"{value:.4f}"


@main.command("extract")
@click.argument("samples_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("rule_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("mentions_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--keywords",
    "-k",
    multiple=True,
    help="Named keyword set as name=path, one word per line in the file.",
)
@click.option("-o", "--output", default="-", show_default=True)
def cmd_extract(samples_file, rule_file, mentions_file, keywords, output):
    """Rank entities by noisy-or rule match probability."""
    with _data_errors():
        keyword_sets = {}
        for spec in keywords:
            name, _, path = spec.partition("=")
            if not name or not path:
                raise click.UsageError(f"bad --keywords value {spec!r}")
            keyword_sets[name] = load_keywords(path)
        rule = parse_query_file(rule_file, keyword_sets)
        sample_sets = {
            s.sentence.sent_id: s for s in load_sample_sets(samples_file)
        }
        mentions = read_mentions_tsv(mentions_file)
        ranked = rank_entities(mentions, rule, sample_sets)
        with _out_stream(output) as out:
            for entity, prob in ranked:
                out.write(f"{entity}\t{prob:.6f}\n")


@main.command("eval")
@click.argument("predicted", type=click.Path(exists=True, dir_okay=False))
@click.argument("gold", type=click.Path(exists=True, dir_okay=False))
def cmd_eval(predicted, gold):
    """Corpus labeled attachment score of predicted against gold."""
    with _data_errors():
        pred_pairs = _read_treebank(predicted, require_trees=True)
        gold_pairs = _read_treebank(gold, require_trees=True)
        if len(pred_pairs) != len(gold_pairs):
            raise DataError(
                f"{len(pred_pairs)} predicted vs {len(gold_pairs)} gold sentences"
            )
        for (ps, _), (gs, _) in zip(pred_pairs, gold_pairs):
            if ps.sent_id != gs.sent_id:
                raise DataError(
                    f"sentence id mismatch: {ps.sent_id!r} vs {gs.sent_id!r}"
                )
        score = corpus_las(
            [t for _, t in pred_pairs], [t for _, t in gold_pairs]
        )
    click.echo(f"LAS\t{score:.4f}")


if __name__ == "__main__":
    main()
