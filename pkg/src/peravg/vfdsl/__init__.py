"""Expression language and configuration files for perturbed systems."""
from .config import SystemConfig, eps_range, load_config, parse_config, validate_config
from .parser import (
    CONSTANTS,
    FUNCTIONS,
    BinOp,
    Call,
    DSLSyntaxError,
    NonFiniteWarning,
    Num,
    Neg,
    UnboundVariable,
    UnknownIdentifier,
    Var,
    compile_columns,
    eval_expr,
    free_variables,
    parse_expr,
    to_source,
    tokenize,
)

__all__ = [
    "BinOp", "CONSTANTS", "Call", "DSLSyntaxError", "FUNCTIONS", "NonFiniteWarning", "Neg",
    "Num", "SystemConfig", "UnboundVariable", "UnknownIdentifier", "Var", "compile_columns",
    "eps_range", "eval_expr", "free_variables", "load_config", "parse_config", "parse_expr",
    "to_source", "tokenize", "validate_config",
]
