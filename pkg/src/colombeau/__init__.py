"""Numerical association checks for mollifier-regularised distributions."""

from .association import (CASES, AssociationReport, SweepPlan, evaluate_expression,
                          fit_and_judge, verify_case)
from .expr import compile, compile_reference, format_expr, parse
from .mollifier import default_model_mollifier, make_moment_mollifier
from .quadrature import integrate, pair
from .reference import eval_reference, reference
from .testfn import PSI_A, PSI_B, PSI_C, TestFunction

__all__ = [
    "CASES",
    "PSI_A",
    "PSI_B",
    "PSI_C",
    "AssociationReport",
    "SweepPlan",
    "TestFunction",
    "compile",
    "compile_reference",
    "default_model_mollifier",
    "eval_reference",
    "evaluate_expression",
    "fit_and_judge",
    "format_expr",
    "integrate",
    "make_moment_mollifier",
    "pair",
    "parse",
    "reference",
    "verify_case",
]
