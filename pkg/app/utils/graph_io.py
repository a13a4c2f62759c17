"""
Graph text format.

First line ``p=<int>``, then one edge per line: ``i -> j`` for directed and
``i -- j`` for undirected edges. Blank lines are ignored; ASCII only.
"""

import re
from pathlib import Path
from typing import Union

from models.graphs import Dag, Pdag
from utils.error_handler import DataFormatError, InvalidInputError

PathLike = Union[str, Path]

_HEADER = re.compile(r"^p\s*=\s*(\d+)$")
_EDGE = re.compile(r"^(\d+)\s*(->|--)\s*(\d+)$")


def format_graph(graph: Union[Dag, Pdag]) -> str:
    lines = [f"p={graph.p}"]
    if isinstance(graph, Dag):
        lines += [f"{i} -> {j}" for i, j in graph.sorted_edges()]
    else:
        lines += [f"{i} -> {j}" for i, j in sorted(graph.directed)]
        lines += [f"{i} -- {j}" for i, j in graph.sorted_undirected()]
    return "\n".join(lines) + "\n"


def parse_graph(text: str, source: str = "<string>") -> Union[Dag, Pdag]:
    """Parse the text format; a graph without undirected edges comes back as a Dag"""
    lines = [(n, line.strip()) for n, line in enumerate(text.splitlines(), start=1) if line.strip()]
    if not lines:
        raise DataFormatError(f"{source}: empty graph file")
    lineno, header = lines[0]
    match = _HEADER.match(header)
    if not match:
        raise DataFormatError(f"{source} line {lineno}: expected 'p=<int>', got {header!r}")
    p = int(match.group(1))
    directed, undirected = set(), set()
    for lineno, line in lines[1:]:
        match = _EDGE.match(line)
        if not match:
            raise DataFormatError(f"{source} line {lineno}: cannot parse edge {line!r}")
        i, kind, j = int(match.group(1)), match.group(2), int(match.group(3))
        if kind == "->":
            directed.add((i, j))
        else:
            undirected.add(frozenset((i, j)))
    try:
        if not undirected:
            return Dag(p, frozenset(directed))
        return Pdag(p, frozenset(directed), frozenset(undirected))
    except InvalidInputError as exc:
        raise DataFormatError(f"{source}: {exc}") from exc


def read_graph(path: PathLike) -> Union[Dag, Pdag]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Graph file not found: {path}")
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: graph files must be ASCII") from exc
    return parse_graph(text, source=str(path))


def write_graph(path: PathLike, graph: Union[Dag, Pdag]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_graph(graph), encoding="ascii")
    return path
