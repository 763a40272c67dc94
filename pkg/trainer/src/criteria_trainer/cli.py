"""Trainer command line: synthesize, train-tagger, predict, train-embeddings."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import TrainerConfig, Word2VecConfig
from .data import load_training_file
from .synthesize import synthesize, write_dataset
from .tagger import load_artifact, predict_tags, save_artifact, train_tagger
from .word2vec import train_embeddings

logger = logging.getLogger(__name__)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="criteria-trainer",
        description="Toy-scale tagger and embedding training for the "
        "trialfacts pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synthesize", help="generate the toy dataset")
    synth.add_argument("--concepts", required=True)
    synth.add_argument("--attributes", required=True)
    synth.add_argument("--out-train", required=True)
    synth.add_argument("--out-corpus", required=True)
    synth.add_argument("--sentences", type=int, default=500)
    synth.add_argument("--seed", type=int, default=11)

    train = sub.add_parser("train-tagger", help="train the sequence tagger")
    train.add_argument("--train", required=True, help="training JSONL")
    train.add_argument("--out", required=True, help="model artifact path")
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int)

    predict = sub.add_parser("predict", help="tag a token-line JSONL file")
    predict.add_argument("--model", required=True)
    predict.add_argument("--corpus", required=True,
                         help="token lines from `trialfacts extract --dump-tokens`")
    predict.add_argument("--out", required=True, help="tag interchange JSONL")

    embed = sub.add_parser("train-embeddings", help="train word vectors")
    embed.add_argument("--corpus", required=True, help="plain text, one line per row")
    embed.add_argument("--out", required=True, help="embedding text file")
    embed.add_argument("--epochs", type=int)
    embed.add_argument("--seed", type=int)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "synthesize":
        examples, corpus_lines = synthesize(
            args.concepts, args.attributes, args.sentences, args.seed
        )
        write_dataset(examples, corpus_lines, args.out_train, args.out_corpus)
        print(f"wrote {len(examples)} examples and {len(corpus_lines)} corpus lines")
        return 0
    if args.command == "train-tagger":
        config = TrainerConfig()
        if args.epochs:
            config.max_epochs = args.epochs
        if args.seed is not None:
            config.seed = args.seed
        examples = load_training_file(args.train)
        artifact = train_tagger(examples, config)
        save_artifact(artifact, args.out)
        last = artifact.history[-1]
        print(
            f"trained {len(examples)} examples, {len(artifact.history)} epochs, "
            f"final loss {last['loss']:.4f}, train F1 {last['f1']:.3f}"
        )
        return 0
    if args.command == "predict":
        artifact = load_artifact(args.model)
        count = predict_tags(artifact, args.corpus, args.out)
        print(f"tagged {count} lines")
        return 0
    if args.command == "train-embeddings":
        config = Word2VecConfig()
        if args.epochs:
            config.max_epochs = args.epochs
        if args.seed is not None:
            config.seed = args.seed
        model = train_embeddings(args.corpus, args.out, config)
        print(f"trained {len(model.vocab)} vectors of dim {config.dim}")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
