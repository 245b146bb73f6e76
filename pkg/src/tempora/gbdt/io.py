"""Versioned text serialization of boosters.

Header ``tempora-booster v1 mode=<m> f0=<v> lr=<v>``, then one line per tree:
``weight=<w>`` followed by the tree's nodes in pre-order, each either
``node(<feature>,<threshold>)`` or ``leaf(<value>)``.  Reals carry 17
significant digits so a round trip is bit-exact.
"""

from __future__ import annotations

import re
from pathlib import Path

from tempora.errors import ParseError
from tempora.gbdt.boosting import Booster
from tempora.gbdt.tree import Tree

MAGIC = "tempora-booster"
VERSION = "v1"

_HEADER = re.compile(rf"^{MAGIC} (\S+) mode=(\w+) f0=(\S+) lr=(\S+)$")
_TOKEN = re.compile(r"node\((-?\d+),([^)]+)\)|leaf\(([^)]+)\)")


def _num(v: float) -> str:
    return format(float(v), ".17g")


def dumps(booster: Booster) -> str:
    lines = [f"{MAGIC} {VERSION} mode={booster.mode} f0={_num(booster.f0)} lr={_num(booster.learning_rate)}"]
    for tree, w in zip(booster.trees, booster.tree_weights):
        parts = [f"weight={_num(w)}"]
        for item in tree.preorder():
            if item[0] == "node":
                parts.append(f"node({item[1]},{_num(item[2])})")
            else:
                parts.append(f"leaf({_num(item[1])})")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Booster:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty booster file", line=1)
    m = _HEADER.match(lines[0])
    if not m:
        raise ParseError("bad booster header", line=1)
    if m.group(1) != VERSION:
        raise ParseError(f"unsupported booster version {m.group(1)!r}", line=1)
    mode, f0, lr = m.group(2), float(m.group(3)), float(m.group(4))
    trees, weights = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        head, _, body = line.partition(" ")
        if not head.startswith("weight="):
            raise ParseError("tree line must start with weight=", line=lineno)
        items = []
        for tok in body.split(" "):
            t = _TOKEN.fullmatch(tok)
            if not t:
                raise ParseError(f"bad node token {tok!r}", line=lineno)
            if t.group(3) is not None:
                items.append(("leaf", float(t.group(3))))
            else:
                items.append(("node", int(t.group(1)), float(t.group(2))))
        try:
            trees.append(Tree.from_preorder(items))
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed tree: {exc}", line=lineno) from None
        weights.append(float(head[len("weight="):]))
    return Booster(f0, tuple(trees), tuple(weights), mode, lr)


def save(booster: Booster, path) -> None:
    Path(path).write_text(dumps(booster), encoding="utf-8", newline="\n")


def load(path) -> Booster:
    return loads(Path(path).read_text(encoding="utf-8"))
