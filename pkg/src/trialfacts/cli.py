"""Command-line interface: extract, eval, evaluate-patient.

Exit codes: 0 success, 1 fatal config/resource error, 2 eval mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import aggregation as agg
from .config import load_config
from .errors import EvalMismatchError, TrialFactsError
from .kb import load_knowledge_base
from .metrics import run_eval
from .pipeline import (
    corpus_line_map,
    dump_token_lines,
    fact_from_json,
    ingest,
    load_resources,
    read_facts,
    run_extract,
    write_facts,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_EVAL_MISMATCH = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialfacts",
        description="Extract structured eligibility facts from clinical-trial "
        "criteria text.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    extract = sub.add_parser("extract", help="run the extraction pipeline")
    extract.add_argument("--corpus", required=True, help="pipe-separated trial file")
    extract.add_argument("--out", required=True, help="output facts JSONL")
    extract.add_argument("--config", help="key=value config file")
    extract.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    extract.add_argument(
        "--dump-tokens",
        help="also write preprocessed token lines (tag interchange schema "
        "minus tags) to this path",
    )

    evaluate = sub.add_parser("eval", help="score predictions against gold")
    evaluate.add_argument("--pred", required=True, help="facts JSONL from extract")
    evaluate.add_argument("--gold", required=True, help="gold annotation JSONL")
    evaluate.add_argument("--report", help="write the report here too")

    patient = sub.add_parser(
        "evaluate-patient", help="check a patient record against a trial profile"
    )
    patient.add_argument("--facts", required=True, help="facts JSONL from extract")
    patient.add_argument("--trial", required=True, help="NCT id to evaluate")
    patient.add_argument("--patient", required=True, help="patient JSON file")
    patient.add_argument("--config", help="key=value config file")
    patient.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE"
    )
    return parser


def _cmd_extract(args) -> int:
    config = load_config(args.config, args.overrides)
    records = ingest(args.corpus)
    corpus_lines = corpus_line_map(records) if config.tags else None
    resources = load_resources(config, corpus_lines)
    count = write_facts(run_extract(records, resources), resources.kb, config, args.out)
    if args.dump_tokens:
        dump_token_lines(records, args.dump_tokens)
    logger.info("wrote %d facts for %d trials to %s", count, len(records), args.out)
    return EXIT_OK


def _cmd_eval(args) -> int:
    predictions = read_facts(args.pred)
    report = run_eval(predictions, args.gold)
    text = report.as_text()
    print(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    return EXIT_OK


def _cmd_evaluate_patient(args) -> int:
    config = load_config(args.config, args.overrides)
    kb = load_knowledge_base(config.kb_concepts, config.kb_attributes)
    facts = [
        fact_from_json(record)
        for record in read_facts(args.facts)
        if record["trial_id"] == args.trial
    ]
    if not facts:
        print(f"no facts for trial {args.trial}")
        return EXIT_FATAL
    profile = agg.EligibilityProfile(trial_id=args.trial, facts=tuple(facts))
    with open(args.patient, encoding="utf-8") as handle:
        patient = json.load(handle)
    decision = agg.evaluate_patient(profile, patient, kb)
    print(f"{args.trial}: {decision.eligible}")
    for verdict in decision.verdicts:
        fact = verdict.fact
        print(f"  [{verdict.status}] {fact.kind} {fact.concept_ref}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "extract":
            return _cmd_extract(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "evaluate-patient":
            return _cmd_evaluate_patient(args)
        raise TrialFactsError(f"unknown command {args.command!r}")
    except EvalMismatchError as exc:
        logger.error("%s", exc)
        return EXIT_EVAL_MISMATCH
    except (TrialFactsError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
