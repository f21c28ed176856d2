"""Syntax tree for Hybrid Rebeca models.

Nodes are frozen dataclasses so they can live inside hashed analysis states.
Source positions are carried for diagnostics but excluded from equality.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


# -- expressions --------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Union[int, float, bool]
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class UnaryOp:
    op: str  # '!' or '-'
    operand: "Expr"
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


Expr = Union[Const, Var, BinOp, UnaryOp]

ARITH_OPS = ("+", "-", "*")
COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("&&", "||")


def is_boolean(e: Expr) -> bool:
    if isinstance(e, Const):
        return isinstance(e.value, bool)
    if isinstance(e, BinOp):
        return e.op in COMPARE_OPS or e.op in LOGIC_OPS
    if isinstance(e, UnaryOp):
        return e.op == "!"
    return False


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, UnaryOp):
        return free_vars(e.operand)
    return set()


def rename(e: Expr, mapping) -> Expr:
    """Replace variables by the expression ``mapping(name)`` returns (or keep them on None)."""
    if isinstance(e, Var):
        sub = mapping(e.name)
        return e if sub is None else sub
    if isinstance(e, BinOp):
        return BinOp(e.op, rename(e.left, mapping), rename(e.right, mapping), e.line, e.col)
    if isinstance(e, UnaryOp):
        return UnaryOp(e.op, rename(e.operand, mapping), e.line, e.col)
    return e


# -- statements ---------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Delay:
    low: float
    high: float
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Send:
    target: str  # known-rebec name or 'self'
    msg: str
    args: tuple = ()
    after: Optional[tuple] = None  # (low, high) or None
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class SetMode:
    mode: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class SendSetMode:
    target: str
    mode: str
    after: Optional[tuple] = None
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


Stmt = Union[Assign, If, Delay, Send, SetMode, SendSetMode]


# -- declarations -------------------------------------------------------------

@dataclass(frozen=True)
class VarDecl:
    type: str  # int | float | real
    name: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class KnownRebec:
    type: str
    name: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class MsgSrv:
    name: str
    params: tuple  # of VarDecl
    body: tuple
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Mode:
    name: str
    invariant: Expr
    flows: tuple  # of (var, Expr)
    guard: Expr
    trigger: tuple
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)

    def flow_map(self) -> dict:
        return dict(self.flows)


@dataclass(frozen=True)
class ClassDecl:
    name: str
    kind: str  # 'reactive' | 'physical'
    capacity: int
    known: tuple  # of KnownRebec
    statevars: tuple  # of VarDecl
    msgsrvs: tuple  # of MsgSrv
    modes: tuple = ()  # of Mode
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)

    @property
    def physical(self) -> bool:
        return self.kind == "physical"

    def msgsrv(self, name: str) -> Optional[MsgSrv]:
        for m in self.msgsrvs:
            if m.name == name:
                return m
        return None

    def mode(self, name: str) -> Optional[Mode]:
        for m in self.modes:
            if m.name == name:
                return m
        return None

    def var_type(self, name: str) -> Optional[str]:
        for v in self.statevars:
            if v.name == name:
                return v.type
        return None

    @property
    def constructor(self) -> Optional[MsgSrv]:
        return self.msgsrv(self.name)


@dataclass(frozen=True)
class Instance:
    cls: str
    name: str
    known: tuple  # of instance names
    args: tuple  # of Expr
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Model:
    classes: tuple
    instances: tuple

    def cls(self, name: str) -> Optional[ClassDecl]:
        for c in self.classes:
            if c.name == name:
                return c
        return None
