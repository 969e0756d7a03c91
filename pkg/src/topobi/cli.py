"""Command-line front end: ingest, augment, train, generate, to-spice, score, vocab."""

from __future__ import annotations

import argparse
import functools
import hashlib
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import vocab as V
from .augment import expand_corpus, table6_rows
from .errors import ConfigurationError, TopoBiError
from .ingest import Corpus, load_corpus
from .lm import (ExternalModelSession, NGramModel, Outcome, equal_shares, generate,
                 train_ngram)
from .metrics import Sample, build_report, read_labels
from .sequence import MAX_LENGTH, read_sequences, serialize_closed_walk, write_sequences
from .spice import SizingRules, translate_to_spice

log = logging.getLogger("topobi")

CONFIG_ENV = "TOPOBI_CONFIG"

# options that name files or only affect execution; they are left out of the
# config hash so that the same run elsewhere, or on more workers, carries the
# same provenance
UNHASHED_OPTIONS = frozenset({"manifest", "out", "corpus", "data", "model", "exec", "input", "rules",
                              "generated", "train", "train_data", "labels", "report", "dump", "config",
                              "jobs", "verbose", "func"})


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def config_hash(options: dict) -> str:
    items = sorted((k, str(v)) for k, v in options.items() if k not in UNHASHED_OPTIONS)
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]


def provenance(args: argparse.Namespace) -> list[str]:
    opts = vars(args)
    return [
        f"topobi {__version__} numpy {np.__version__}",
        f"command {args.command}; seed {args.seed}; config {config_hash(opts)}",
    ]


# subcommands ---------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.manifest, args.split, args.seed, jobs=args.jobs)
    corpus.save(args.out, " | ".join(provenance(args)))
    n_train = len(corpus.train)
    print(f"ingested {len(corpus.entries)} circuits ({n_train} train, {len(corpus.entries) - n_train} validation)"
          f" -> {args.out}")
    return 0


def _multipliers(args: argparse.Namespace) -> dict[str, tuple[int, int]]:
    out = {}
    for key, value in args.extra_config.items():
        if not key.startswith("multiplier."):
            continue
        label = key.split(".", 1)[1]
        if label not in V.CIRCUIT_TYPES:
            raise ConfigurationError(f"unknown circuit type in {key}")
        try:
            k, r = (int(x) for x in value.split(","))
        except ValueError:
            raise ConfigurationError(f"{key} must be 'traversals,renames'") from None
        out[label] = (k, r)
    return out


def cmd_augment(args: argparse.Namespace) -> int:
    corpus = Corpus.load(args.corpus)
    split = None if args.split == "all" else args.split
    dataset = expand_corpus(corpus, args.traversals, args.renames, args.seed, split, _multipliers(args))
    header = provenance(args)
    dataset.write(args.out, header)
    Path(str(args.out) + ".counts.tsv").write_text(
        "".join(f"# {h}\n" for h in header) + table6_rows(corpus, dataset, split))
    print(f"wrote {len(dataset.records)} sequences -> {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    seqs = read_sequences(args.data)
    model = train_ngram(seqs, args.order, args.k)
    Path(args.out).write_text(model.to_json(" | ".join(provenance(args))))
    print(f"trained order-{args.order} model on {len(seqs)} sequences -> {args.out}")
    return 0


def _plan(args: argparse.Namespace) -> list[tuple[str, int]]:
    if args.count_total is not None:
        types = [args.type] if args.type else list(V.CIRCUIT_TYPES)
        return equal_shares(args.count_total, types)
    types = [args.type] if args.type else list(V.CIRCUIT_TYPES)
    for t in types:
        if t not in V.CIRCUIT_TYPES:
            raise ConfigurationError(f"unknown circuit type {t!r}")
    return [(t, args.count) for t in types]


def cmd_generate(args: argparse.Namespace) -> int:
    if bool(args.model) == bool(args.exec):
        raise ConfigurationError("give exactly one of --model or --exec")
    if args.type and args.type not in V.CIRCUIT_TYPES:
        raise ConfigurationError(f"unknown circuit type {args.type!r}")
    if args.model:
        if not Path(args.model).exists():
            raise ConfigurationError(f"model file {args.model} not found")
        factory = functools.partial(NGramModel.load, args.model)
    else:
        factory = functools.partial(ExternalModelSession, args.exec)
    results = generate(factory, _plan(args), args.seed, args.temperature, args.max_length, args.jobs)
    header = provenance(args)
    write_sequences(args.out, [r.sequence for r in results], header)
    rows = [f"# {h}" for h in header] + ["sample_id\ttype\toutcome\tseed"]
    rows += [f"{i:06d}\t{r.circuit_type}\t{r.outcome.value}\t{r.seed}" for i, r in enumerate(results, start=1)]
    Path(str(args.out) + ".tsv").write_text("\n".join(rows) + "\n")
    counts = {o: sum(r.outcome is o for r in results) for o in Outcome}
    print(f"generated {len(results)} samples -> {args.out} ("
          + ", ".join(f"{o.value} {n}" for o, n in counts.items()) + ")")
    return 0


def load_samples(path: str | Path) -> list[Sample]:
    """Generated sequences plus their sidecar; without a sidecar every line counts as Terminated."""
    seqs = read_sequences(path, MAX_LENGTH)
    side = Path(str(path) + ".tsv")
    rows = [l for l in side.read_text().splitlines() if l.strip() and not l.startswith("#")] if side.exists() else []
    meta: list[tuple[str, str, Outcome, int]] = []
    if rows and rows[0].startswith("sample_id"):
        for line in rows[1:]:
            sid, ctype, outcome, seed = line.split("\t")
            meta.append((sid, ctype, Outcome(outcome), int(seed)))
        if len(meta) != len(seqs):
            raise ConfigurationError(f"{side} lists {len(meta)} samples but {path} holds {len(seqs)}")
    else:  # plain or augmented sequence file
        meta = [(f"{i:06d}", s.circuit_type or "General", Outcome.TERMINATED, 0)
                for i, s in enumerate(seqs, start=1)]
    return [Sample(sid, ctype, outcome, seq, seed) for (sid, ctype, outcome, seed), seq in zip(meta, seqs)]


def cmd_to_spice(args: argparse.Namespace) -> int:
    rules = SizingRules.from_mapping(read_config(args.rules)) if args.rules else SizingRules()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = provenance(args)
    rows = [f"# {h}" for h in header] + ["sample_id\tstatus\tfile\tdetail"]
    failed = 0
    for s in load_samples(args.input):
        if s.outcome is not Outcome.TERMINATED:
            rows.append(f"{s.sample_id}\tskipped\t-\t{s.outcome.value}")
            continue
        try:
            deck = translate_to_spice(s.sequence, rules, header=header + [f"sample {s.sample_id}"])
        except TopoBiError as exc:
            failed += 1
            rows.append(f"{s.sample_id}\tfailed\t-\t{exc}")
            continue
        name = f"sample_{s.sample_id}.sp"
        (out / name).write_text(deck.render())
        rows.append(f"{s.sample_id}\tok\t{name}\t" + "; ".join(deck.warnings))
    (out / "index.tsv").write_text("\n".join(rows) + "\n")
    print(f"wrote decks -> {out} ({failed} failed)")
    if failed:
        print(f"error: {failed} terminated samples failed translation; see {out / 'index.tsv'}", file=sys.stderr)
        return 1
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    from .report import plot_report

    samples = load_samples(args.generated)
    corpus = Corpus.load(args.train)
    if args.train_data:
        train_seqs = read_sequences(args.train_data)
    else:
        train_seqs = [serialize_closed_walk(e.graph, 0, e.circuit_type) for e in corpus.train]
    labels = read_labels(args.labels) if args.labels else None
    report = build_report(samples, corpus.key_index, train_seqs, labels, args.ngram, args.anywhere, args.jobs)
    header = provenance(args)
    Path(args.report).write_text(report.tsv(header))
    Path(str(args.report) + ".summary").write_text(report.summary(header))
    plot_report(report, str(args.report) + ".png")
    agg = report.columns["Avg."]
    print(f"validity {agg['validity']:.4f} novelty {agg['novelty']:.4f} "
          f"valid&novel {agg['valid_and_novel']:.4f} -> {args.report}")
    return 0


def cmd_vocab(args: argparse.Namespace) -> int:
    vocab = V.default_vocabulary()
    Path(args.dump).write_text("".join(f"# {h}\n" for h in provenance(args)) + vocab.dump())
    print(f"{len(vocab)} tokens -> {args.dump}")
    return 0


# parser ----------------------------------------------------------------------

def _global_flags(default) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help=f"flat key=value file (default: ${CONFIG_ENV})")
    common.add_argument("--jobs", type=int, default=default, help="worker processes (default 1)")
    common.add_argument("--seed", type=int, default=default, help="base seed (default 0)")
    common.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return common


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the copy on
    # each subparser must not reset values given before it
    common = _global_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="topobi", parents=[_global_flags(None)], description=__doc__)
    p.add_argument("--version", action="version", version=f"topobi {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="parse a manifest of netlists into a corpus")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--split", type=float)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("augment", parents=[common], help="traversal + renaming augmentation")
    s.add_argument("--corpus", required=True)
    s.add_argument("--traversals", type=int)
    s.add_argument("--renames", type=int)
    s.add_argument("--split", choices=["train", "validation", "all"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("train", parents=[common], help="fit the n-gram baseline")
    s.add_argument("--data", required=True)
    s.add_argument("--order", type=int)
    s.add_argument("--k", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", parents=[common], help="grammar-constrained sampling")
    s.add_argument("--model")
    s.add_argument("--exec", help="external model command speaking the line protocol")
    s.add_argument("--type", help="circuit type (default: every type)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--count", type=int, help="samples per type")
    g.add_argument("--count-total", type=int, help="total samples split evenly over types")
    s.add_argument("--temperature", type=float)
    s.add_argument("--max-length", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("to-spice", parents=[common], help="translate generated sequences to SPICE decks")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--rules", help="sizing rules as key=value")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_to_spice)

    s = sub.add_parser("score", parents=[common], help="validity/novelty/memorisation report")
    s.add_argument("--generated", required=True)
    s.add_argument("--train", required=True, help="corpus directory")
    s.add_argument("--train-data", help="training sequence file for n-gram windows")
    s.add_argument("--labels")
    s.add_argument("--ngram", type=int)
    s.add_argument("--anywhere", action="store_true", default=None,
                   help="match against every training window, not only boundary windows")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("vocab", parents=[common], help="dump the vocabulary")
    s.add_argument("--dump", required=True)
    s.set_defaults(func=cmd_vocab)
    return p


DEFAULTS = {
    "jobs": 1, "seed": 0, "split": None, "traversals": 8, "renames": 0, "order": 4, "k": 0.1,
    "count": None, "count_total": None, "temperature": 0.7, "max_length": MAX_LENGTH,
    "ngram": 10, "anywhere": False,
}
COMMAND_DEFAULTS = {"ingest": {"split": 0.9}, "augment": {"split": "train"}}
# options whose default is None but whose config value still needs a type
CONFIG_TYPES = {"count": int, "count_total": int}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from built-in defaults."""
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = read_config(path) if path else {}
    opts = vars(args)
    defaults = dict(DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {}))
    for key in list(opts):
        if opts[key] is not None or key in ("func", "command", "config", "verbose"):
            continue
        if key in cfg:
            default = defaults.get(key)
            raw = cfg[key]
            if key in CONFIG_TYPES:
                opts[key] = CONFIG_TYPES[key](raw)
            elif isinstance(default, bool):
                opts[key] = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                opts[key] = int(raw)
            elif isinstance(default, float):
                opts[key] = float(raw)
            elif key == "split" and args.command == "ingest":
                opts[key] = float(raw)
            else:
                opts[key] = raw
        elif key in defaults:
            opts[key] = defaults[key]
    if args.command == "generate" and opts.get("count") is None and opts.get("count_total") is None:
        opts["count"] = 1
    args.extra_config = dict(sorted((k, v) for k, v in cfg.items() if "." in k))
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be >= 1")
    return args


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = resolve(args)
        return args.func(args)
    except (TopoBiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
