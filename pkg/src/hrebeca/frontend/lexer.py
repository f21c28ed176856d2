"""Tokenizer for the Hybrid Rebeca surface syntax."""
from __future__ import annotations

import re
from dataclasses import dataclass


class HRebecaSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


KEYWORDS = {
    "reactiveclass", "physicalclass", "knownrebecs", "statevars", "msgsrv",
    "mode", "inv", "guard", "main", "if", "else", "delay", "after", "setmode",
    "self", "int", "float", "real", "true", "false",
}

@dataclass(frozen=True)
class Token:
    kind: str  # ID, KW, INT, FLOAT, OP, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<float>\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>&&|\|\||<=|>=|==|!=|[{}();,.:=+\-*<>!'])
""", re.VERBOSE | re.DOTALL)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if text.startswith("/*", pos):
                raise HRebecaSyntaxError("unterminated comment", line, col)
            if ch == "/":
                raise HRebecaSyntaxError("division is not part of the expression language", line, col)
            raise HRebecaSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bcomment":
            nls = s.count("\n")
            if nls:
                line += nls
                line_start = pos + s.rfind("\n") + 1
        elif kind in ("ws", "lcomment"):
            pass
        elif kind == "id":
            tokens.append(Token("KW" if s in KEYWORDS else "ID", s, line, col))
        elif kind == "float":
            tokens.append(Token("FLOAT", s, line, col))
        elif kind == "int":
            tokens.append(Token("INT", s, line, col))
        else:
            tokens.append(Token("OP", s, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens
