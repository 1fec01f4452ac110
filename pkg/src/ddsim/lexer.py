"""Tokenizer for the scenario language."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ScenarioParseError

# multi-char symbols must come first
_SYMBOLS = [
    "::", "{", "}", "(", ")", "[", "]", ":", ";", ",", ".", "@",
    "*", "+", "-", "/", "=",
]

ID = "ID"
INT = "INT"
REAL = "REAL"
EOF = "EOF"


@dataclass
class Token:
    type: str  # ID, INT, REAL, EOF, or the symbol itself
    value: str
    line: int
    column: int

    @property
    def length(self) -> int:
        return max(len(self.value), 1)


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokenize(text: str) -> list[Token]:
    """Split scenario source into tokens; ``#`` starts a to-end-of-line comment."""
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start = i
            startcol = col
            is_real = False
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == "." and i + 1 < n and text[i + 1].isdigit():
                is_real = True
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    is_real = True
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            # a trailing identifier character means a malformed number like 12x
            if i < n and _is_ident_start(text[i]):
                raise ScenarioParseError(
                    f"malformed number literal near '{text[start:i + 1]}'",
                    line, startcol, expected="number", found=text[start:i + 1])
            lexeme = text[start:i]
            tokens.append(Token(REAL if is_real else INT, lexeme, line, startcol))
            col += i - start
            continue
        if _is_ident_start(ch):
            start = i
            startcol = col
            while i < n and _is_ident(text[i]):
                i += 1
            tokens.append(Token(ID, text[start:i], line, startcol))
            col += i - start
            continue
        matched = None
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                matched = sym
                break
        if matched is None:
            raise ScenarioParseError(
                f"unexpected character {ch!r}", line, col,
                expected="token", found=ch)
        tokens.append(Token(matched, matched, line, col))
        i += len(matched)
        col += len(matched)
    tokens.append(Token(EOF, "", line, col))
    return tokens
