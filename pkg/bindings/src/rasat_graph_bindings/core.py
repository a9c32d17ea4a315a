"""Array-level access to compiled relation matrices.

The heavy lifting stays in the `rasat-graph` command line tool; this package
drives it as a subprocess and parses its documented output files (RASM
binary matrices, graph JSON, alignment JSON) into plain numpy arrays.  That
keeps one source of truth for the relation semantics.
"""

import json
import struct
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RASM_MAGIC = b"RASM"
RASM_VERSION = 1
RELATION_COUNT = 51

_HEADER = struct.Struct("<4sBIH")


@dataclass
class BoundExample:
    tokens: list[str]  # subtokens with a vocabulary, item texts without
    matrix: np.ndarray  # (len(tokens), len(tokens)) relation ids
    item_map: list[int]  # token index -> item index

    def __post_init__(self):
        n = len(self.tokens)
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix {self.matrix.shape} does not match {n} tokens")
        if len(self.item_map) != n:
            raise ValueError("item_map length does not match tokens")
        if self.matrix.size and int(self.matrix.max()) >= RELATION_COUNT:
            raise ValueError(f"relation id {int(self.matrix.max())} out of range")


def load_rasm(path) -> np.ndarray:
    """Parse a RASM file: magic, version, u32 n, u16 vocab size, n*n u16 ids."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, mu = _HEADER.unpack_from(raw)
    if magic != RASM_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != RASM_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if len(raw) != _HEADER.size + 2 * n * n:
        raise ValueError(f"{path}: payload size mismatch")
    matrix = np.frombuffer(raw, dtype="<u2", offset=_HEADER.size).reshape(n, n).copy()
    if matrix.size and int(matrix.max()) >= mu:
        raise ValueError(f"{path}: relation id outside vocabulary of {mu}")
    return matrix


def _run_cli(args: list[str]) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "rasat_graph", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        detail = proc.stderr.strip() or proc.stdout.strip() or f"exit code {proc.returncode}"
        raise RuntimeError(detail)


def build_example(schema_file, example, options: dict | None = None) -> BoundExample:
    """Compile one example through the CLI and return its arrays.

    `example` is a path to a one-example JSON file, or the example object
    itself.  Options: mode ("single"/"multi"), content, deps, coref, vocab,
    budget, turn (multi mode: which turn to return, default the last).
    """
    options = dict(options or {})
    mode = options.pop("mode", "single")
    turn = options.pop("turn", None)
    with tempfile.TemporaryDirectory(prefix="rasat-bindings-") as tmp:
        tmp = Path(tmp)
        if isinstance(example, (str, Path)):
            data_path = Path(example)
        else:
            data_path = tmp / "data.json"
            data_path.write_text(json.dumps([example]), encoding="utf-8")
        out = tmp / "out"
        args = ["graph", "--schemas", str(schema_file), "--data", str(data_path), "--mode", mode, "--out", str(out)]
        for flag in ("content", "deps", "coref", "vocab", "budget"):
            value = options.pop(flag, None)
            if value is not None:
                args += [f"--{flag}", str(value)]
        if options:
            raise ValueError(f"unknown options: {sorted(options)}")
        _run_cli(args)

        if mode == "single":
            stem = "example_00000"
        else:
            turns = sorted(int(p.stem.split("_turn_")[1].split(".")[0]) for p in out.glob("example_00000_turn_*.graph.json"))
            if not turns:
                raise RuntimeError("CLI produced no graph output")
            chosen = turn if turn is not None else turns[-1]
            if chosen not in turns:
                raise ValueError(f"turn {chosen} not in {turns}")
            stem = f"example_00000_turn_{chosen:02d}"

        graph = json.loads((out / f"{stem}.graph.json").read_text(encoding="utf-8"))
        alignment_path = out / f"{stem}.alignment.json"
        if alignment_path.exists():
            pieces = json.loads(alignment_path.read_text(encoding="utf-8"))["items"]
            tokens = [p for item in pieces for p in item]
            item_map = [i for i, item in enumerate(pieces) for _ in item]
            matrix = load_rasm(out / f"{stem}.subtokens.rasm")
        else:
            seq = graph["tokens"]
            tokens = [" ".join(seq[it["span"][0] : it["span"][1]]) for it in graph["items"]]
            item_map = list(range(len(tokens)))
            matrix = load_rasm(out / f"{stem}.items.rasm")
    return BoundExample(tokens, matrix, item_map)
