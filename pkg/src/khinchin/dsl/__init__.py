"""A small language for generating functions: parse, differentiate, compile."""

from .ast import pretty
from .compile import CompileConfig, CompileError, CompileReport, compile_ast, compile_source
from .diff import differentiate
from .evaluate import Evaluator
from .parser import DslError, parse

__all__ = [
    "CompileConfig",
    "CompileError",
    "CompileReport",
    "DslError",
    "Evaluator",
    "compile_ast",
    "compile_source",
    "differentiate",
    "parse",
    "pretty",
]
