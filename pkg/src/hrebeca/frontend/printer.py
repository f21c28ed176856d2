"""Canonical pretty-printer; ``parse_model(print_model(m)) == m``."""
from __future__ import annotations

from .ast import (
    Assign, BinOp, ClassDecl, Const, Delay, If, Model, Send, SendSetMode,
    SetMode, UnaryOp, Var,
)


def print_expr(e) -> str:
    if isinstance(e, Const):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BinOp):
        return f"({print_expr(e.left)} {e.op} {print_expr(e.right)})"
    if isinstance(e, UnaryOp):
        return f"{e.op}({print_expr(e.operand)})"
    raise TypeError(f"not an expression: {e!r}")


def print_cond(e) -> str:
    """Expression without the outermost parentheses."""
    s = print_expr(e)
    return s[1:-1] if isinstance(e, BinOp) else s


def _after(a) -> str:
    return "" if a is None else f" after({a[0]!r}, {a[1]!r})"


def print_stmt(s, indent: int = 0) -> list[str]:
    pad = "    " * indent
    if isinstance(s, Assign):
        return [f"{pad}{s.target} = {print_cond(s.expr)};"]
    if isinstance(s, Delay):
        return [f"{pad}delay({s.low!r}, {s.high!r});"]
    if isinstance(s, SetMode):
        return [f"{pad}setmode({s.mode});"]
    if isinstance(s, SendSetMode):
        return [f"{pad}{s.target}.SetMode({s.mode}){_after(s.after)};"]
    if isinstance(s, Send):
        args = ", ".join(print_expr(a) for a in s.args)
        return [f"{pad}{s.target}.{s.msg}({args}){_after(s.after)};"]
    if isinstance(s, If):
        out = [f"{pad}if ({print_cond(s.cond)}) {{"]
        for t in s.then:
            out += print_stmt(t, indent + 1)
        if s.orelse:
            out.append(f"{pad}}} else {{")
            for t in s.orelse:
                out += print_stmt(t, indent + 1)
        out.append(f"{pad}}}")
        return out
    raise TypeError(f"not a statement: {s!r}")


def print_stmts(stmts) -> str:
    """One-line rendering used in exports and state labels."""
    return " ".join(" ".join(x.strip() for x in print_stmt(s)) for s in stmts)


def _block(stmts, indent: int) -> list[str]:
    out = []
    for s in stmts:
        out += print_stmt(s, indent)
    return out


def print_class(c: ClassDecl) -> list[str]:
    kw = "physicalclass" if c.physical else "reactiveclass"
    out = [f"{kw} {c.name}({c.capacity}) {{", "    knownrebecs {"]
    out += [f"        {k.type} {k.name};" for k in c.known]
    out += ["    }", "    statevars {"]
    out += [f"        {v.type} {v.name};" for v in c.statevars]
    out.append("    }")
    for m in c.msgsrvs:
        params = ", ".join(f"{p.type} {p.name}" for p in m.params)
        out.append(f"    msgsrv {m.name}({params}) {{")
        out += _block(m.body, 2)
        out.append("    }")
    for md in c.modes:
        out.append(f"    mode {md.name} {{")
        out.append(f"        inv ({print_cond(md.invariant)}) {{")
        out += [f"            {v}' = {print_cond(e)};" for v, e in md.flows]
        out.append("        }")
        out.append(f"        guard ({print_cond(md.guard)}) {{")
        out += _block(md.trigger, 3)
        out.append("        }")
        out.append("    }")
    out.append("}")
    return out


def print_model(m: Model) -> str:
    out = []
    for c in m.classes:
        out += print_class(c)
        out.append("")
    out.append("main {")
    for i in m.instances:
        known = ", ".join(i.known)
        args = ", ".join(print_expr(a) for a in i.args)
        out.append(f"    {i.cls} {i.name}({known}):({args});")
    out.append("}")
    return "\n".join(out) + "\n"
