"""Parsing, checking and printing of Hybrid Rebeca models."""
from .ast import Model
from .checks import Diagnostic, ModelError, check_model, load_model
from .lexer import HRebecaSyntaxError
from .parser import parse_expression, parse_model
from .printer import print_expr, print_model, print_stmts

__all__ = [
    "Model", "Diagnostic", "ModelError", "check_model", "load_model",
    "HRebecaSyntaxError", "parse_expression", "parse_model", "print_expr",
    "print_model", "print_stmts",
]
