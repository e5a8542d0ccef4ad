"""Parser and pretty-printer for ``.amdl`` abstract model sources.

Grammar::

    model     := table*
    table     := "entity" IDENT "{" member* "}"
    member    := ["key"] IDENT ":" IDENT                 plain attribute
               | ["key"] IDENT "->" IDENT [colnames]     entity reference
               | IDENT ":" "multi" IDENT "{" member* "}" multivalued child
    colnames  := "as" "(" IDENT ("," IDENT)* ")"

``#`` starts a comment running to the end of the line. The words
``entity``, ``key``, ``multi`` and ``as`` are only keywords where the
grammar expects them, so they remain usable as names.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from amdl.model import (
    IDENTIFIER_RE,
    AbstractModel,
    AbstractTable,
    EntityReference,
    Member,
    MultivaluedChild,
    PlainAttribute,
    validate_model,
)

MAX_NESTING = 64


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"span positions are 1-based: {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    span: SourceSpan
    severity: Literal["error", "warning"]
    message: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must not be empty")

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class _Token:
    kind: str  # "word", "eof", or the punctuation itself
    text: str
    line: int
    column: int


_PUNCT = {":", "{", "}", "(", ")", ","}


def _decode(source: str | bytes, filename: str) -> str:
    if isinstance(source, str):
        return source
    try:
        return source.decode("utf-8")
    except UnicodeDecodeError as exc:
        before = source[: exc.start]
        line = before.count(b"\n") + 1
        last = before.rfind(b"\n")
        column = len(before[last + 1 :].decode("utf-8", "replace")) + 1
        raise ParseError(
            [
                ParseDiagnostic(
                    SourceSpan(filename, line, column), "error", "invalid UTF-8 byte sequence"
                )
            ]
        ) from None


def _tokenize(text: str, filename: str) -> tuple[list[_Token], list[ParseDiagnostic]]:
    tokens: list[_Token] = []
    diags: list[ParseDiagnostic] = []
    i, line, col = 0, 1, 1
    if text.startswith("\ufeff"):
        i = 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
        elif ch in " \t\r\f":
            i, col = i + 1, col + 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "-" and text.startswith("->", i):
            tokens.append(_Token("->", "->", line, col))
            i, col = i + 2, col + 2
        elif ch in _PUNCT:
            tokens.append(_Token(ch, ch, line, col))
            i, col = i + 1, col + 1
        elif ch.isalnum() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if IDENTIFIER_RE.fullmatch(word):
                tokens.append(_Token("word", word, line, col))
            else:
                diags.append(
                    ParseDiagnostic(
                        SourceSpan(filename, line, col), "error", f"invalid identifier {word!r}"
                    )
                )
            col += j - i
            i = j
        else:
            diags.append(
                ParseDiagnostic(
                    SourceSpan(filename, line, col), "error", f"unexpected character {ch!r}"
                )
            )
            i, col = i + 1, col + 1
    tokens.append(_Token("eof", "", line, col))
    return tokens, diags


class _SyntaxError(Exception):
    def __init__(self, token: _Token, message: str):
        super().__init__(message)
        self.token = token


class _Parser:
    def __init__(self, tokens: list[_Token], filename: str):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename
        self.diags: list[ParseDiagnostic] = []
        self.spans: dict[tuple[int, ...], SourceSpan] = {}

    def span(self, token: _Token) -> SourceSpan:
        return SourceSpan(self.filename, token.line, token.column)

    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def is_word(self, offset: int = 0, text: str | None = None) -> bool:
        tok = self.peek(offset)
        return tok.kind == "word" and (text is None or tok.text == text)

    def advance(self) -> _Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise _SyntaxError(tok, f"expected {what}, found {found}")
        return self.advance()

    def parse_model(self) -> AbstractModel:
        tables = []
        while self.peek().kind != "eof":
            if not self.at_table_start():
                tok = self.peek()
                self.diags.append(
                    ParseDiagnostic(self.span(tok), "error", "expected 'entity' declaration")
                )
                self.recover()
                continue
            try:
                tables.append(self.parse_table((len(tables),)))
            except _SyntaxError as exc:
                self.diags.append(ParseDiagnostic(self.span(exc.token), "error", str(exc)))
                self.recover()
        return AbstractModel(tables)

    def at_table_start(self) -> bool:
        return self.is_word(0, "entity") and self.is_word(1) and self.peek(2).kind == "{"

    def recover(self) -> None:
        self.advance()
        while self.peek().kind != "eof" and not self.at_table_start():
            self.advance()

    def parse_table(self, path: tuple[int, ...]) -> AbstractTable:
        self.advance()  # "entity"
        name = self.advance()
        self.spans[path] = self.span(name)
        self.expect("{", "'{'")
        members = self.parse_members(path, depth=0)
        return AbstractTable(name.text, "entity", members)

    def parse_members(self, path: tuple[int, ...], depth: int) -> list[Member]:
        members: list[Member] = []
        while self.peek().kind != "}":
            if self.peek().kind == "eof":
                raise _SyntaxError(self.peek(), "expected '}', found end of input")
            members.append(self.parse_member(path + (len(members),), depth))
        self.advance()
        return members

    def parse_member(self, path: tuple[int, ...], depth: int) -> Member:
        start = self.peek()
        in_key = False
        if (
            self.is_word(0, "key")
            and self.is_word(1)
            and self.peek(2).kind in (":", "->")
        ):
            in_key = True
            self.advance()
        name = self.expect("word", "a member name")
        self.spans[path] = self.span(start)

        if self.peek().kind == ":":
            self.advance()
            if self.is_word(0, "multi") and self.is_word(1) and self.peek(2).kind == "{":
                if in_key:
                    raise _SyntaxError(start, "a multivalued child cannot be marked 'key'")
                if depth + 1 > MAX_NESTING:
                    raise _SyntaxError(self.peek(), "multivalued children nested too deeply")
                self.advance()
                child = self.advance()
                self.advance()  # "{"
                members = self.parse_members(path, depth + 1)
                return MultivaluedChild(
                    name.text, AbstractTable(child.text, "multivalued", members)
                )
            domain = self.expect("word", "a domain name")
            return PlainAttribute(name.text, domain.text, in_key)

        if self.peek().kind == "->":
            self.advance()
            target = self.expect("word", "a target table name")
            columns = None
            if self.is_word(0, "as") and self.peek(1).kind == "(":
                self.advance()
                self.advance()
                columns = [self.expect("word", "a column name").text]
                while self.peek().kind == ",":
                    self.advance()
                    columns.append(self.expect("word", "a column name").text)
                self.expect(")", "')'")
            return EntityReference(name.text, target.text, in_key, columns)

        if name.text == "key" and self.is_word(0):
            # "key NAME <junk>": the key flag was meant, report after NAME
            name = self.advance()
        raise _SyntaxError(self.peek(), f"expected ':' or '->' after {name.text!r}")


def parse_model(source: str | bytes, filename: str = "<input>") -> AbstractModel:
    """Parse and validate ``source``; raise ``ParseError`` with diagnostics."""
    text = _decode(source, filename)
    tokens, lex_diags = _tokenize(text, filename)
    parser = _Parser(tokens, filename)
    model = parser.parse_model()
    diags = lex_diags + parser.diags
    if diags:
        diags.sort(key=lambda d: (d.span.line, d.span.column))
        raise ParseError(diags)
    semantic = validate_model(model)
    if semantic:
        raise ParseError(
            [
                ParseDiagnostic(
                    _span_for(parser.spans, d.path, filename), "error", d.message
                )
                for d in semantic
            ]
        )
    return model


def _span_for(spans, path, filename) -> SourceSpan:
    while path and path not in spans:
        path = path[:-1]
    return spans.get(path, SourceSpan(filename, 1, 1))


def _format_members(members, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    for m in members:
        key = "key " if m.in_key else ""
        if isinstance(m, PlainAttribute):
            out.append(f"{pad}{key}{m.name}: {m.domain}")
        elif isinstance(m, EntityReference):
            cols = f" as ({', '.join(m.column_names)})" if m.column_names else ""
            out.append(f"{pad}{key}{m.ref_name} -> {m.target}{cols}")
        else:
            out.append(f"{pad}{m.ref_name}: multi {m.child.name} {{")
            _format_members(m.child.members, depth + 1, out)
            out.append(f"{pad}}}")


def format_model(model: AbstractModel) -> str:
    lines: list[str] = []
    for table in model.tables:
        lines.append(f"entity {table.name} {{")
        _format_members(table.members, 1, lines)
        lines.append("}")
    return "".join(line + "\n" for line in lines)
