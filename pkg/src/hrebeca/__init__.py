"""Reachability analysis for Hybrid Rebeca models.

Typical use::

    from hrebeca import Program, AnalysisConfig, analyze, bundled_model
    prog = Program.from_text(bundled_model("heater"))
    result = analyze(prog, AnalysisConfig(horizon=3.0))
"""
from importlib.resources import files

from .interval import Interval, TriBool, compare, eval_expr
from .reach import AnalysisConfig, ReachResult, analyze, check_unsafe
from .semantics import GlobalState, Program

__all__ = [
    "Interval", "TriBool", "compare", "eval_expr", "AnalysisConfig", "ReachResult",
    "analyze", "check_unsafe", "GlobalState", "Program", "bundled_model",
]


def bundled_model(name: str) -> str:
    """Source text of a model shipped with the package ('heater', 'heater_two_sensors')."""
    return (files(__name__) / "models" / f"{name}.hrebeca").read_text()
