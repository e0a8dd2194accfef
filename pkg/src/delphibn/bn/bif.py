"""Structure-only reader and writer for the BIF subset used by bnlearn.

Only ``network``, ``variable`` and ``probability`` blocks are understood.
Probability tables are tokenized and thrown away; the parent lists become the
edge set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import prod

from .graph import (
    BayesianNetworkStructure,
    StructureError,
    normalize_name,
    require_acyclic,
)

_TOKEN = re.compile(
    r"""
    (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<punct>[{}()\[\];,|])
  | (?P<word>[^\s{}()\[\];,|"]+)
  | (?P<space>\s+)
    """,
    re.VERBOSE | re.DOTALL,
)


class BIFSyntaxError(StructureError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class BIFReferenceError(StructureError):
    pass


class BIFDuplicateError(StructureError):
    pass


@dataclass
class _Tok:
    kind: str
    value: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line = 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise BIFSyntaxError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        value = m.group()
        if kind in ("string", "punct", "word"):
            if kind == "string":
                value = value[1:-1]
            toks.append(_Tok(kind, value, line))
        line += m.group().count("\n")
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def line(self) -> int:
        tok = self.peek()
        if tok is not None:
            return tok.line
        return self.toks[-1].line if self.toks else 1

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise BIFSyntaxError("unexpected end of input", self.line())
        self.i += 1
        return tok

    def expect(self, value: str) -> _Tok:
        tok = self.next()
        if tok.value != value or tok.kind == "string":
            raise BIFSyntaxError(f"expected {value!r}, found {tok.value!r}", tok.line)
        return tok

    def name(self) -> _Tok:
        tok = self.next()
        if tok.kind == "punct":
            raise BIFSyntaxError(f"expected a name, found {tok.value!r}", tok.line)
        return tok

    def skip_statement(self):
        """Skip tokens up to and including the next ';'."""
        while self.next().value != ";":
            pass

    def skip_block(self):
        """Skip a balanced ``{ ... }`` block; the opening brace is next."""
        self.expect("{")
        depth = 1
        while depth:
            tok = self.next()
            if tok.kind == "punct":
                depth += {"{": 1, "}": -1}.get(tok.value, 0)


def parse_bif(text: str) -> BayesianNetworkStructure:
    """Parse a BIF document into its DAG.

    Raises:
        BIFSyntaxError: malformed block syntax (carries ``line``).
        BIFReferenceError: a probability block names an undeclared variable.
        BIFDuplicateError: a variable (or its probability block) is repeated.
        CycleError: the parent relation is cyclic.
    """
    p = _Parser(text)
    net_name = "unknown"
    variables: dict[str, tuple[str, tuple[str, ...], dict[str, str]]] = {}
    order: list[str] = []
    parents: dict[str, list[str]] = {}
    prob_lines: dict[str, int] = {}

    while p.peek() is not None:
        tok = p.next()
        if tok.value == "network":
            words = []
            while p.peek() is not None and p.peek().value != "{":
                words.append(p.next().value)
            net_name = " ".join(words) or net_name
            p.skip_block()
        elif tok.value == "variable":
            name_tok = p.name()
            key = normalize_name(name_tok.value).key
            if key in variables:
                raise BIFDuplicateError(f"line {name_tok.line}: duplicate variable {name_tok.value!r}")
            states, props = _variable_body(p)
            variables[key] = (name_tok.value, states, props)
            order.append(key)
        elif tok.value == "probability":
            p.expect("(")
            child = p.name()
            plist = []
            nxt = p.next()
            if nxt.value == "|":
                while True:
                    plist.append(p.name())
                    sep = p.next()
                    if sep.value == ")":
                        break
                    if sep.value != ",":
                        raise BIFSyntaxError(f"expected ',' or ')', found {sep.value!r}", sep.line)
            elif nxt.value != ")":
                raise BIFSyntaxError(f"expected '|' or ')', found {nxt.value!r}", nxt.line)
            p.skip_block()
            for ref in (child, *plist):
                if normalize_name(ref.value).key not in variables:
                    raise BIFReferenceError(
                        f"line {ref.line}: probability block references undeclared variable {ref.value!r}"
                    )
            ckey = normalize_name(child.value).key
            if ckey in prob_lines:
                raise BIFDuplicateError(
                    f"line {child.line}: second probability block for {child.value!r} "
                    f"(first at line {prob_lines[ckey]})"
                )
            prob_lines[ckey] = child.line
            parents[ckey] = [normalize_name(t.value).key for t in plist]
        else:
            raise BIFSyntaxError(f"unexpected token {tok.value!r}", tok.line)

    names = [variables[k][0] for k in order]
    edges = [(variables[pk][0], variables[ck][0]) for ck in order for pk in parents.get(ck, [])]
    descriptions = {}
    for k in order:
        props = variables[k][2]
        if "description" in props:
            descriptions[variables[k][0]] = props["description"]
    structure = BayesianNetworkStructure.build(
        net_name,
        names,
        edges,
        descriptions=descriptions,
        states={variables[k][0]: variables[k][1] for k in order if variables[k][1]},
    )
    return require_acyclic(structure)


def _variable_body(p: _Parser) -> tuple[tuple[str, ...], dict[str, str]]:
    p.expect("{")
    states: tuple[str, ...] = ()
    props: dict[str, str] = {}
    while True:
        tok = p.next()
        if tok.value == "}":
            return states, props
        if tok.value == "type":
            kind = p.name()
            if kind.value != "discrete":
                p.i -= 1
                p.skip_statement()
                continue
            p.expect("[")
            p.name()
            p.expect("]")
            p.expect("{")
            vals = []
            while True:
                v = p.next()
                if v.value == "}":
                    break
                if v.value == ",":
                    continue
                if v.kind == "punct":
                    raise BIFSyntaxError(f"bad state list token {v.value!r}", v.line)
                vals.append(v.value)
            p.expect(";")
            states = tuple(vals)
        elif tok.value == "property":
            words = []
            while (w := p.next()).value != ";":
                words.append(w.value)
            if words:
                props[words[0]] = " ".join(words[1:]).strip().strip("=").strip()
        else:
            raise BIFSyntaxError(f"unexpected token {tok.value!r} in variable block", tok.line)


def _bif_word(text: str) -> str:
    return text if re.fullmatch(r"[^\s{}()\[\];,|\"]+", text) else '"' + text.replace('"', '\\"') + '"'


def to_bif(structure: BayesianNetworkStructure) -> str:
    """Serialize to BIF with uniform placeholder tables.

    Variables without known states are written as ``yes``/``no``.
    """
    out = [f"network {_bif_word(structure.name)} {{", "}"]
    for node in structure.nodes:
        states = structure.states.get(node) or ("yes", "no")
        out.append(f"variable {_bif_word(node.text)} {{")
        out.append(f"  type discrete [ {len(states)} ] {{ {', '.join(_bif_word(s) for s in states)} }};")
        if node in structure.descriptions:
            out.append(f"  property description = {_bif_word(structure.descriptions[node])};")
        out.append("}")
    for node in structure.nodes:
        pars = structure.parents(node)
        n_states = len(structure.states.get(node) or ("yes", "no"))
        prob = ", ".join([f"{1 / n_states:.6g}"] * n_states)
        head = _bif_word(node.text)
        if pars:
            head += " | " + ", ".join(_bif_word(x.text) for x in pars)
        n_rows = prod(len(structure.states.get(x) or ("yes", "no")) for x in pars)
        rows = ", ".join([prob] * n_rows)
        out.append(f"probability ( {head} ) {{")
        out.append(f"  table {rows};")
        out.append("}")
    return "\n".join(out) + "\n"
