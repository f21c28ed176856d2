"""Recursive-descent parser producing :mod:`hrebeca.frontend.ast` trees."""
from __future__ import annotations

from .ast import (
    Assign, BinOp, ClassDecl, Const, Delay, If, Instance, KnownRebec, Mode,
    Model, MsgSrv, Send, SendSetMode, SetMode, UnaryOp, Var, VarDecl,
)
from .lexer import HRebecaSyntaxError, Token, tokenize

VAR_TYPES = ("int", "float", "real")

# binary precedence levels, loosest first
_LEVELS = (("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*",))


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        raise HRebecaSyntaxError(f"{msg} (found {found!r})", tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("OP", "KW") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "ID":
            self.error("expected identifier")
        t = self.tok
        self.i += 1
        return t

    def number(self) -> float:
        neg = self.accept("-")
        if self.tok.kind not in ("INT", "FLOAT"):
            self.error("expected number")
        v = float(self.tok.text)
        self.i += 1
        return -v if neg else v

    # -- model --
    def model(self) -> Model:
        classes = []
        while self.at("reactiveclass") or self.at("physicalclass"):
            classes.append(self.class_decl())
        if not self.at("main"):
            self.error("expected 'reactiveclass', 'physicalclass' or 'main'")
        instances = self.main()
        if self.tok.kind != "EOF":
            self.error("unexpected text after main block")
        return Model(tuple(classes), tuple(instances))

    def class_decl(self) -> ClassDecl:
        start = self.tok
        kind = "physical" if self.tok.text == "physicalclass" else "reactive"
        self.i += 1
        name = self.ident().text
        capacity = 10
        if self.accept("("):
            if self.tok.kind != "INT":
                self.error("expected mailbox capacity")
            capacity = int(self.tok.text)
            self.i += 1
            self.expect(")")
        self.expect("{")
        known, svars, srvs, modes = [], [], [], []
        if self.accept("knownrebecs"):
            self.expect("{")
            while not self.at("}"):
                t = self.ident()
                n = self.ident()
                known.append(KnownRebec(t.text, n.text, t.line, t.col))
                while self.accept(","):
                    n = self.ident()
                    known.append(KnownRebec(t.text, n.text, n.line, n.col))
                self.expect(";")
            self.expect("}")
        if self.accept("statevars"):
            self.expect("{")
            while not self.at("}"):
                svars.extend(self.var_decls())
            self.expect("}")
        while self.at("msgsrv"):
            srvs.append(self.msgsrv())
        while self.at("mode"):
            if kind != "physical":
                self.error("modes are only allowed in physical classes")
            modes.append(self.mode())
        self.expect("}")
        return ClassDecl(name, kind, capacity, tuple(known), tuple(svars), tuple(srvs),
                         tuple(modes), start.line, start.col)

    def var_type(self) -> str:
        if not (self.tok.kind == "KW" and self.tok.text in VAR_TYPES):
            self.error("expected type 'int', 'float' or 'real'")
        t = self.tok.text
        self.i += 1
        return t

    def var_decls(self) -> list:
        ty = self.var_type()
        out = []
        while True:
            n = self.ident()
            out.append(VarDecl(ty, n.text, n.line, n.col))
            if not self.accept(","):
                break
        self.expect(";")
        return out

    def msgsrv(self) -> MsgSrv:
        start = self.expect("msgsrv")
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                ty = self.var_type()
                n = self.ident()
                params.append(VarDecl(ty, n.text, n.line, n.col))
                if not self.accept(","):
                    break
        self.expect(")")
        body = self.block()
        return MsgSrv(name, tuple(params), body, start.line, start.col)

    def mode(self) -> Mode:
        start = self.expect("mode")
        name = self.ident().text
        self.expect("{")
        self.expect("inv")
        self.expect("(")
        inv = self.expr()
        self.expect(")")
        self.expect("{")
        flows = []
        while not self.at("}"):
            v = self.ident().text
            self.expect("'")
            self.expect("=")
            flows.append((v, self.expr()))
            self.expect(";")
        self.expect("}")
        self.expect("guard")
        self.expect("(")
        guard = self.expr()
        self.expect(")")
        trigger = self.block()
        self.expect("}")
        return Mode(name, inv, tuple(flows), guard, trigger, start.line, start.col)

    def main(self) -> list:
        self.expect("main")
        self.expect("{")
        out = []
        while not self.at("}"):
            cls = self.ident()
            name = self.ident().text
            self.expect("(")
            known = []
            if not self.at(")"):
                while True:
                    known.append(self.ident().text)
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect(":")
            self.expect("(")
            args = []
            if not self.at(")"):
                while True:
                    args.append(self.expr())
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect(";")
            out.append(Instance(cls.text, name, tuple(known), tuple(args), cls.line, cls.col))
        self.expect("}")
        return out

    # -- statements --
    def block(self) -> tuple:
        self.expect("{")
        out = []
        while not self.at("}"):
            out.append(self.stmt())
        self.expect("}")
        return tuple(out)

    def body(self) -> tuple:
        return self.block() if self.at("{") else (self.stmt(),)

    def after(self):
        if not self.accept("after"):
            return None
        self.expect("(")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect(")")
        return (lo, hi)

    def stmt(self):
        t = self.tok
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.body()
            orelse = self.body() if self.accept("else") else ()
            return If(cond, then, orelse, t.line, t.col)
        if self.accept("delay"):
            self.expect("(")
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect(")")
            self.expect(";")
            return Delay(lo, hi, t.line, t.col)
        if self.accept("setmode"):
            self.expect("(")
            m = self.ident().text
            self.expect(")")
            self.expect(";")
            return SetMode(m, t.line, t.col)
        if t.kind == "ID" or self.at("self"):
            self.i += 1
            if t.kind == "ID" and self.accept("="):
                e = self.expr()
                self.expect(";")
                return Assign(t.text, e, t.line, t.col)
            self.expect(".")
            msg = self.ident().text
            self.expect("(")
            args = []
            if not self.at(")"):
                while True:
                    args.append(self.expr())
                    if not self.accept(","):
                        break
            self.expect(")")
            after = self.after()
            self.expect(";")
            if msg == "SetMode":
                if len(args) != 1 or not isinstance(args[0], Var):
                    self.error("SetMode takes a single mode name", t)
                return SendSetMode(t.text, args[0].name, after, t.line, t.col)
            return Send(t.text, msg, tuple(args), after, t.line, t.col)
        self.error("expected statement")

    # -- expressions --
    def expr(self, level: int = 0):
        if level == len(_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "OP" and self.tok.text in _LEVELS[level]:
            op = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = BinOp(op.text, left, right, op.line, op.col)
        return left

    def unary(self):
        t = self.tok
        if self.accept("!"):
            return UnaryOp("!", self.unary(), t.line, t.col)
        if self.accept("-"):
            if self.tok.kind in ("INT", "FLOAT"):
                c = self.primary()
                return Const(-c.value, t.line, t.col)
            return UnaryOp("-", self.unary(), t.line, t.col)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "INT":
            self.i += 1
            return Const(int(t.text), t.line, t.col)
        if t.kind == "FLOAT":
            self.i += 1
            return Const(float(t.text), t.line, t.col)
        if self.accept("true"):
            return Const(True, t.line, t.col)
        if self.accept("false"):
            return Const(False, t.line, t.col)
        if t.kind == "ID":
            self.i += 1
            name = t.text
            while self.at(".") and self.peek().kind == "ID":
                self.i += 1
                name += "." + self.ident().text
            return Var(name, t.line, t.col)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("expected expression")


def parse_model(text: str) -> Model:
    return Parser(text).model()


def parse_expression(text: str):
    """Parse a standalone expression; dotted names like ``hws.temp`` are allowed."""
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "EOF":
        p.error("unexpected text after expression")
    return e
