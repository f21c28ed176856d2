"""Static well-formedness checks.

Every problem is reported as a :class:`Diagnostic` carrying a kind, a message
and the source position of the offending construct.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    ARITH_OPS, Assign, ClassDecl, Const, Delay, If, Model, Send,
    SendSetMode, SetMode, UnaryOp, Var,
)
from .parser import parse_model

KINDS = (
    "UnknownClass", "DuplicateClass", "DuplicateDeclaration", "ArityMismatch",
    "TypeViolation", "MissingConstructor", "UnknownMode", "NegativeDelay",
    "UnknownRebec", "UnknownMessage", "UnknownVariable", "NoInstances",
)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}: {self.kind}: {self.message}"


class ModelError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class _Checker:
    def __init__(self, model: Model):
        self.model = model
        self.diags: list[Diagnostic] = []
        self.classes = {c.name: c for c in model.classes}

    def report(self, kind, msg, node=None):
        self.diags.append(Diagnostic(kind, msg, getattr(node, "line", 0), getattr(node, "col", 0)))

    # -- expressions --
    def expr_type(self, e, scope: dict):
        if isinstance(e, Const):
            if isinstance(e.value, bool):
                return "bool"
            return "int" if isinstance(e.value, int) else "float"
        if isinstance(e, Var):
            if e.name not in scope:
                self.report("UnknownVariable", f"undeclared variable '{e.name}'", e)
                return "float"
            return "int" if scope[e.name] == "int" else "float"
        if isinstance(e, UnaryOp):
            t = self.expr_type(e.operand, scope)
            if e.op == "!":
                if t != "bool":
                    self.report("TypeViolation", "'!' applied to a non-boolean expression", e)
                return "bool"
            if t == "bool":
                self.report("TypeViolation", "arithmetic on a boolean expression", e)
            return t
        lt = self.expr_type(e.left, scope)
        rt = self.expr_type(e.right, scope)
        if e.op in ("&&", "||"):
            if lt != "bool" or rt != "bool":
                self.report("TypeViolation", f"'{e.op}' needs boolean operands", e)
            return "bool"
        if "bool" in (lt, rt):
            self.report("TypeViolation", f"'{e.op}' applied to a boolean operand", e)
        if e.op in ARITH_OPS:
            return "int" if lt == rt == "int" else "float"
        return "bool"

    def want_bool(self, e, scope, what):
        if self.expr_type(e, scope) != "bool":
            self.report("TypeViolation", f"{what} must be a boolean expression", e)

    def want_arith(self, e, scope, what) -> str:
        t = self.expr_type(e, scope)
        if t == "bool":
            self.report("TypeViolation", f"{what} must be an arithmetic expression", e)
        return t

    # -- statements --
    def delay_bounds(self, lo, hi, node, what):
        if lo < 0 or hi < lo:
            self.report("NegativeDelay", f"{what} bounds ({lo}, {hi}) must satisfy 0 <= low <= high", node)

    def stmts(self, body, cls: ClassDecl, scope: dict):
        for s in body:
            self.stmt(s, cls, scope)

    def stmt(self, s, cls: ClassDecl, scope: dict):
        if isinstance(s, Assign):
            if s.target not in scope:
                self.report("UnknownVariable", f"assignment to undeclared variable '{s.target}'", s)
                self.expr_type(s.expr, scope)
                return
            t = self.want_arith(s.expr, scope, "assigned value")
            if scope[s.target] == "int" and t == "float":
                self.report("TypeViolation", f"float value assigned to int variable '{s.target}'", s)
        elif isinstance(s, If):
            self.want_bool(s.cond, scope, "condition")
            self.stmts(s.then, cls, scope)
            self.stmts(s.orelse, cls, scope)
        elif isinstance(s, Delay):
            if cls.physical:
                self.report("TypeViolation", "delay is not allowed in physical classes", s)
            self.delay_bounds(s.low, s.high, s, "delay")
        elif isinstance(s, SetMode):
            if not cls.physical:
                self.report("TypeViolation", "setmode is only allowed in physical classes", s)
            elif cls.mode(s.mode) is None and s.mode != "none":
                self.report("UnknownMode", f"class {cls.name} has no mode '{s.mode}'", s)
        elif isinstance(s, (Send, SendSetMode)):
            if s.after is not None:
                self.delay_bounds(s.after[0], s.after[1], s, "after")
            target = self.target_class(s, cls)
            if target is None:
                return
            if isinstance(s, SendSetMode):
                if not target.physical:
                    self.report("TypeViolation", f"SetMode sent to reactive class {target.name}", s)
                elif target.mode(s.mode) is None and s.mode != "none":
                    self.report("UnknownMode", f"class {target.name} has no mode '{s.mode}'", s)
                return
            srv = target.msgsrv(s.msg)
            if srv is None or srv.name == target.name:
                self.report("UnknownMessage", f"class {target.name} has no message server '{s.msg}'", s)
                for a in s.args:
                    self.expr_type(a, scope)
                return
            if len(srv.params) != len(s.args):
                self.report("ArityMismatch",
                            f"{s.msg} expects {len(srv.params)} argument(s), got {len(s.args)}", s)
            for p, a in zip(srv.params, s.args):
                t = self.want_arith(a, scope, "argument")
                if p.type == "int" and t == "float":
                    self.report("TypeViolation", f"float argument for int parameter '{p.name}'", a)

    def target_class(self, s, cls: ClassDecl):
        if s.target == "self":
            return cls
        for k in cls.known:
            if k.name == s.target:
                return self.classes.get(k.type)
        self.report("UnknownRebec", f"'{s.target}' is not a known rebec of {cls.name}", s)
        return None

    # -- declarations --
    def check_class(self, c: ClassDecl):
        if c.capacity < 1:
            self.report("TypeViolation", f"mailbox capacity of {c.name} must be positive", c)
        if c.constructor is None:
            self.report("MissingConstructor", f"class {c.name} has no constructor", c)
        seen = set()
        for k in c.known:
            if k.type not in self.classes:
                self.report("UnknownClass", f"unknown class '{k.type}'", k)
            if k.name in seen:
                self.report("DuplicateDeclaration", f"'{k.name}' declared twice", k)
            seen.add(k.name)
        for v in c.statevars:
            if v.name in seen:
                self.report("DuplicateDeclaration", f"'{v.name}' declared twice", v)
            seen.add(v.name)
            if v.type == "real" and not c.physical:
                self.report("TypeViolation", f"real variable '{v.name}' in reactive class {c.name}", v)
            if v.type == "int" and c.physical:
                self.report("TypeViolation", f"int variable '{v.name}' in physical class {c.name}", v)
        scope = {v.name: v.type for v in c.statevars}
        names = set()
        for m in c.msgsrvs:
            if m.name in names:
                self.report("DuplicateDeclaration", f"message server '{m.name}' declared twice", m)
            names.add(m.name)
            local = dict(scope)
            for p in m.params:
                if p.type == "real":
                    self.report("TypeViolation", f"parameter '{p.name}' cannot be real", p)
                if p.name in local:
                    self.report("DuplicateDeclaration", f"parameter '{p.name}' shadows a variable", p)
                local[p.name] = p.type
            self.stmts(m.body, c, local)
        reals = [v.name for v in c.statevars if v.type == "real"]
        modes = set()
        for md in c.modes:
            if md.name in modes or md.name == "none":
                self.report("DuplicateDeclaration", f"mode '{md.name}' declared twice or reserved", md)
            modes.add(md.name)
            self.want_bool(md.invariant, scope, "invariant")
            self.want_bool(md.guard, scope, "guard")
            flowed = [v for v, _ in md.flows]
            for v, e in md.flows:
                if scope.get(v) != "real":
                    self.report("TypeViolation", f"flow for non-real variable '{v}' in mode {md.name}", md)
                self.want_arith(e, scope, "flow right-hand side")
            for v in reals:
                if flowed.count(v) != 1:
                    self.report("TypeViolation",
                                f"mode {md.name} needs exactly one flow for '{v}'", md)
            self.stmts(md.trigger, c, scope)

    def check_main(self):
        insts = self.model.instances
        if not insts:
            self.report("NoInstances", "main block declares no rebecs")
            return
        by_name = {}
        for i in insts:
            if i.name in by_name:
                self.report("DuplicateDeclaration", f"rebec '{i.name}' declared twice", i)
            by_name[i.name] = i
        for i in insts:
            c = self.classes.get(i.cls)
            if c is None:
                self.report("UnknownClass", f"unknown class '{i.cls}'", i)
                continue
            if len(i.known) != len(c.known):
                self.report("ArityMismatch",
                            f"{i.name} binds {len(i.known)} known rebec(s), {c.name} declares {len(c.known)}", i)
            for k, bound in zip(c.known, i.known):
                other = by_name.get(bound)
                if other is None:
                    self.report("UnknownRebec", f"'{bound}' is not a declared rebec", i)
                elif other.cls != k.type:
                    self.report("TypeViolation",
                                f"'{bound}' is a {other.cls}, {c.name}.{k.name} expects {k.type}", i)
            ctor = c.constructor
            if ctor is None:
                continue
            if len(i.args) != len(ctor.params):
                self.report("ArityMismatch",
                            f"constructor of {c.name} expects {len(ctor.params)} argument(s), got {len(i.args)}", i)
            for p, a in zip(ctor.params, i.args):
                t = self.want_arith(a, {}, "constructor argument")
                if p.type == "int" and t == "float":
                    self.report("TypeViolation", f"float argument for int parameter '{p.name}'", a)

    def run(self) -> list[Diagnostic]:
        seen = set()
        for c in self.model.classes:
            if c.name in seen:
                self.report("DuplicateClass", f"class '{c.name}' declared twice", c)
            seen.add(c.name)
        for c in self.model.classes:
            self.check_class(c)
        self.check_main()
        return self.diags


def check_model(model: Model) -> list[Diagnostic]:
    return _Checker(model).run()


def load_model(text: str) -> Model:
    """Parse and check; raises HRebecaSyntaxError or ModelError."""
    model = parse_model(text)
    diags = check_model(model)
    if diags:
        raise ModelError(diags)
    return model
