"""Algebras, tuple codes, terms and the closure engines."""

from .algebra import (
    FiniteAlgebra,
    Operation,
    algebra_from_dict,
    algebra_to_dict,
    dump_algebra,
    idempotent_basic_reduct,
    is_idempotent_operation,
    make_operation,
    parse_algebra,
)
from .closure import (
    Budget,
    Closure,
    enumerate_idempotent_subuniverses,
    idempotent_closure_of,
    idempotent_image_closure,
    is_idempotent_subuniverse,
    sg_power,
    stop_at,
)
from .errors import AlgebraFormatError, CubewrightError, InconsistencyError, ResourceLimitError
from .terms import Apply, Var, evaluate, evaluate_at, expand, parse_term, render, substitute
from .tuples import TupleSet, decode, encode, subset_code, subset_key


def term_for(closure, target):
    """Term over ``closure``'s generators evaluating to ``target``."""
    return closure.term_for(target)
