"""Linear/mixed-integer modelling and solvers."""
from .backends import (
    BackendError,
    ContractViolation,
    ValidatedBackend,
    available_backends,
    backend_register,
    backend_unregister,
    get_backend,
)
from .embedded import SolverOptions
from .model import EQ, GE, INF, LE, LinearModel, ModelError, SolveOutcome, Status


def solve_lp(model, options=None, backend=None) -> SolveOutcome:
    return get_backend(backend).solve_lp(model, options)


def solve_milp(model, options=None, backend=None) -> SolveOutcome:
    return get_backend(backend).solve_milp(model, options)


__all__ = [
    "BackendError", "ContractViolation", "ValidatedBackend", "available_backends",
    "backend_register", "backend_unregister", "get_backend", "SolverOptions",
    "EQ", "GE", "INF", "LE", "LinearModel", "ModelError", "SolveOutcome", "Status",
    "solve_lp", "solve_milp",
]
