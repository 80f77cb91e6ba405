"""Reading and writing trees in the common text format.

Grammar::

    tree  ::= 'rec' LABEL ['{' statement '}'] '.' tree
            | '*'                          -- truncation axiom, unit statement
            | '#' '{' statement '}'        -- truncation axiom
            | NAME ['[' params ']'] ['(' tree (',' tree)* ')']

A bare ``NAME`` bound by an enclosing ``rec`` is a back edge.  Parameters
and statements are kept as raw (bracket balanced) text and handed to the
instance language.  ``--`` starts a comment.
"""

from __future__ import annotations

import re

from .core import UNIT, BackEdge, Node, RecBind, Sym, format_tree, trunc_axiom
from .errors import InfrewError, TreeSyntaxError

_IDENT = re.compile(r"[^\W\d][\w']*")
_SPACE = re.compile(r"(?:\s+|--[^\n]*)+")


class Language:
    """How an instance names its rules and writes its statements."""

    default_statement = UNIT
    # reject unguarded rec cycles while parsing
    check_guards = True

    def make_rule(self, name, params, nargs):
        raise NotImplementedError

    def parse_statement(self, text):
        text = text.strip()
        if text in ("", "•"):
            return UNIT
        raise ValueError(f"unknown statement {text!r}")

    def format_statement(self, s):
        return "•" if s is UNIT else str(s)


class GenericLanguage(Language):
    """Every name is a constructor over the unit statement.

    Premisses are coinductive unless ``inductive`` lists ``(name, index)``.
    """

    def __init__(self, inductive=()):
        self.inductive = set(inductive)

    def make_rule(self, name, params, nargs):
        coind = tuple(0 if (name, i + 1) in self.inductive else 1 for i in range(nargs))
        return Sym(name, coind, params)


class Scanner:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def where(self, pos=None):
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, msg, pos=None):
        return TreeSyntaxError(msg, *self.where(pos))

    def skip(self):
        m = _SPACE.match(self.text, self.pos)
        if m:
            self.pos = m.end()

    def peek(self):
        self.skip()
        return self.text[self.pos : self.pos + 1]

    def at_end(self):
        return self.peek() == ""

    def expect(self, ch):
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise self.error(f"expected '{ch}', found '{got}'")
        self.pos += 1

    def ident(self):
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            got = self.peek() or "end of input"
            raise self.error(f"expected a name, found '{got}'")
        self.pos = m.end()
        return m.group()

    def balanced(self, open_, close):
        """Raw text between matching brackets; the cursor is on ``open_``."""
        self.expect(open_)
        start = self.pos
        pairs = {"[": "]", "{": "}", "(": ")"}
        stack = [close]
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in pairs:
                stack.append(pairs[ch])
            elif ch == stack[-1]:
                stack.pop()
                if not stack:
                    out = self.text[start : self.pos]
                    self.pos += 1
                    return out
            elif ch in ")]}":
                raise self.error(f"unbalanced '{ch}'")
            self.pos += 1
        raise self.error(f"unclosed '{open_}'", start - 1)


def parse_tree(text, lang=None, scanner=None):
    """Parse one tree; the whole input must be consumed unless a scanner
    is passed in."""
    lang = lang or GenericLanguage()
    sc = scanner or Scanner(text)
    t = _parse(sc, lang, {})
    if scanner is None and not sc.at_end():
        raise sc.error(f"unexpected '{sc.peek()}' after tree")
    return t


def _parse(sc, lang, scope):
    ch = sc.peek()
    start = sc.pos
    if ch == "":
        raise sc.error("unexpected end of input")
    if ch == "*":
        sc.pos += 1
        return trunc_axiom(UNIT)
    if ch == "#":
        sc.pos += 1
        if sc.peek() != "{":
            raise sc.error("expected '{' after '#'")
        raw = sc.balanced("{", "}")
        return trunc_axiom(_statement(sc, lang, raw, start))
    name = sc.ident()
    if name == "rec":
        label = sc.ident()
        statement = lang.default_statement
        if sc.peek() == "{":
            raw = sc.balanced("{", "}")
            statement = _statement(sc, lang, raw, start)
        if statement is None:
            raise sc.error(f"binder '{label}' needs a statement annotation", start)
        sc.expect(".")
        inner = dict(scope)
        inner[label] = statement
        body = _parse(sc, lang, inner)
        if body.conclusion != statement:
            raise sc.error(f"binder '{label}' annotated {statement!r} but body concludes {body.conclusion!r}", start)
        try:
            return RecBind(label, body, check=lang.check_guards)
        except InfrewError as e:
            raise sc.error(str(e), start) from None
    params = None
    if sc.peek() == "[":
        params = sc.balanced("[", "]")
    kids = []
    explicit = False
    if sc.peek() == "(":
        explicit = True
        sc.pos += 1
        if sc.peek() != ")":
            kids.append(_parse(sc, lang, scope))
            while sc.peek() == ",":
                sc.pos += 1
                kids.append(_parse(sc, lang, scope))
        sc.expect(")")
    if params is None and not explicit and name in scope:
        return BackEdge(name, scope[name])
    try:
        rule = lang.make_rule(name, params, len(kids))
        return Node(rule, kids)
    except (InfrewError, ValueError) as e:
        if isinstance(e, TreeSyntaxError):
            raise
        raise sc.error(str(e), start) from None


def _statement(sc, lang, raw, pos):
    try:
        return lang.parse_statement(raw)
    except (InfrewError, ValueError) as e:
        raise sc.error(f"bad statement: {e}", pos) from None


def print_tree(t, lang=None):
    lang = lang or GenericLanguage()
    return format_tree(t, lang.format_statement)

