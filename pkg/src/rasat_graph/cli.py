"""Batch command-line surface.

    rasat-graph serialize  --schemas tables.json --data dev.json --out DIR
    rasat-graph link       ... as above, plus --content
    rasat-graph graph      ... writes graph JSON + RASM matrices
    rasat-graph stats      ... aggregated relation histogram
    rasat-graph attn-check --seed 0

Examples are processed one at a time; per-example failures are reported on
stderr with their index and the batch keeps going.  Exit code is 0 only
when every example succeeded and every check passed.
"""

import argparse
import json
import sys
from pathlib import Path

from .annotate import chains_to_links, edges_from_sentences, load_coreference_annotations, load_dependency_annotations
from .attention import verification_report
from .corpus import parse_example
from .errors import PipelineError
from .graph import graph_to_json_dict, relation_histogram
from .linking import link_report
from .pipeline import ContentProvider, compile_interaction, load_schema_map
from .rasm import write_rasm
from .relations import RELATION_LABELS
from .serialize import DEFAULT_TOKEN_BUDGET
from .subtokens import VocabTokenizer


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _add_data_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--schemas", required=True, help="Spider-format tables.json")
    sub.add_argument("--data", required=True, help="question/interaction file")
    sub.add_argument("--mode", choices=("single", "multi"), default="single")
    sub.add_argument("--content", help="value dump JSON, SQLite file, or directory")
    sub.add_argument("--deps", help="CoNLL-U dependency annotations")
    sub.add_argument("--coref", help="coreference chains JSON")
    sub.add_argument("--vocab", help="subword vocabulary, one piece per line")
    sub.add_argument("--budget", type=int, default=DEFAULT_TOKEN_BUDGET, help="token budget for multi-turn history")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rasat-graph", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("serialize", "link", "graph", "stats"):
        sub = subs.add_parser(name)
        _add_data_options(sub)
    check = subs.add_parser("attn-check")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--instances", type=int, default=50, help="gradient-check instances")
    return parser


class _Runner:
    """Shared iteration over dataset entries for the data commands."""

    def __init__(self, args):
        self.args = args
        self.schema_map = load_schema_map(args.schemas)
        self.content = ContentProvider(args.content)
        self.deps = load_dependency_annotations(args.deps) if args.deps else None
        self.corefs = load_coreference_annotations(args.coref) if args.coref else None
        self.tokenizer = VocabTokenizer.from_file(args.vocab) if args.vocab else None
        self.mode = args.mode
        self.out = Path(args.out) if args.out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)
        with open(args.data, encoding="utf-8") as f:
            self.entries = json.load(f)
        self.errors = 0

    def compiled_examples(self):
        """Yield (name, db_id, CompiledTurn) per turn; report failures."""
        parse_mode = "single_turn" if self.mode == "single" else "multi_turn"
        for i, entry in enumerate(self.entries):
            try:
                interaction = parse_example(entry, i, parse_mode)
                schema = self.schema_map.get(interaction.db_id)
                if schema is None:
                    raise PipelineError(f"unknown db_id {interaction.db_id!r}")
                deps = corefs = None
                if self.deps is not None:
                    sentences = self.deps.get(str(i))
                    deps = edges_from_sentences(sentences, list(interaction.turns)) if sentences else []
                if self.corefs is not None:
                    corefs = chains_to_links(self.corefs.get(str(i), []), list(interaction.turns))
                compiled = compile_interaction(
                    schema,
                    interaction,
                    content=self.content.get(schema),
                    deps=deps,
                    corefs=corefs,
                    multi_turn=self.mode == "multi",
                    token_budget=self.args.budget,
                    tokenizer=self.tokenizer,
                )
            except (PipelineError, KeyError, ValueError) as exc:
                print(f"example {i}: {exc}", file=sys.stderr)
                self.errors += 1
                continue
            for turn in compiled:
                name = f"example_{i:05d}" if self.mode == "single" else f"example_{i:05d}_turn_{turn.turn:02d}"
                yield name, interaction.db_id, turn

    @property
    def exit_code(self) -> int:
        return 1 if self.errors else 0


def cmd_serialize(args) -> int:
    runner = _Runner(args)
    for name, _db, turn in runner.compiled_examples():
        if runner.out:
            _write_json(runner.out / f"{name}.serialized.json", turn.serialized.to_json_dict())
    return runner.exit_code


def cmd_link(args) -> int:
    runner = _Runner(args)
    for name, _db, turn in runner.compiled_examples():
        if runner.out:
            report = link_report(turn.links, turn.value_matches, turn.turn)
            _write_json(runner.out / f"{name}.links.json", report)
    return runner.exit_code


def cmd_graph(args) -> int:
    runner = _Runner(args)
    for name, _db, turn in runner.compiled_examples():
        if runner.out:
            _write_json(runner.out / f"{name}.graph.json", graph_to_json_dict(turn.graph))
            write_rasm(runner.out / f"{name}.items.rasm", turn.graph.matrix)
            if turn.subtoken_matrix is not None:
                write_rasm(runner.out / f"{name}.subtokens.rasm", turn.subtoken_matrix)
                _write_json(runner.out / f"{name}.alignment.json", turn.submap.to_json_dict())
    return runner.exit_code


def cmd_stats(args) -> int:
    runner = _Runner(args)
    totals = [0] * len(RELATION_LABELS)
    for _name, _db, turn in runner.compiled_examples():
        for rel, count in relation_histogram(turn.graph).items():
            totals[int(rel)] += count
    stats = {RELATION_LABELS[i]: c for i, c in enumerate(totals) if c}
    if runner.out:
        _write_json(runner.out / "stats.json", stats)
    else:
        print(json.dumps(stats, indent=2, ensure_ascii=False))
    return runner.exit_code


def cmd_attn_check(args) -> int:
    report = verification_report(seed=args.seed, grad_instances=args.instances)
    labels = {
        "softmax_row_deviation": "softmax-row-deviation",
        "zero_embedding_error": "zero-embedding-error",
        "gradient_check_rel_error": "gradient-check-rel-error",
        "permutation_equivariance": "permutation-equivariance",
    }
    ok = True
    for key, shown in labels.items():
        entry = report[key]
        status = "PASS" if entry["ok"] else "FAIL"
        print(f"{shown:<26} max={entry['max']:.3e}  tolerance={entry['tolerance']:.0e}  {status}")
        ok = ok and entry["ok"]
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "serialize": cmd_serialize,
        "link": cmd_link,
        "graph": cmd_graph,
        "stats": cmd_stats,
        "attn-check": cmd_attn_check,
    }
    try:
        return handlers[args.command](args)
    except (OSError, json.JSONDecodeError, PipelineError) as exc:
        print(f"rasat-graph {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
