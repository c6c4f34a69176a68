"""In-memory LP/MILP container and solve results."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

INF = math.inf

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = (LE, EQ, GE)


class ModelError(ValueError):
    """Raised for structurally invalid models (bad indices, bounds, rhs)."""


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class SolveOutcome:
    """Result of an LP or MILP solve.

    ``duals`` follows one convention regardless of objective sense: every row
    is read in ``<=`` form (``>=`` rows negated) and ``duals[i]`` is the
    multiplier of that form, nonnegative on inequality rows at an optimum.
    Equality rows are read as ``a.x <= b`` so their sign is free.
    """

    status: Status
    objective_value: float = math.nan
    primal: np.ndarray | None = None
    duals: np.ndarray | None = None
    gap: float | None = None
    bound: float | None = None
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


class LinearModel:
    """Sparse linear model: objective, variable bounds, rows and binaries."""

    def __init__(self, sense: str = "min", name: str = ""):
        if sense not in ("min", "max"):
            raise ModelError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.name = name
        self.obj: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.var_names: list[str | None] = []
        self.binary: set[int] = set()
        self.row_idx: list[np.ndarray] = []
        self.row_val: list[np.ndarray] = []
        self.relation: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str | None] = []
        self._csr = None

    # -- construction -----------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.obj)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def add_var(self, lb=0.0, ub=INF, obj=0.0, binary=False, name=None) -> int:
        j = len(self.obj)
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
            self.binary.add(j)
        if lb > ub:
            raise ModelError(f"variable {name or j}: lb {lb} > ub {ub}")
        self.obj.append(float(obj))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.var_names.append(name)
        return j

    def add_vars(self, n: int, lb=0.0, ub=INF, obj=0.0, binary=False,
                 names: Sequence[str] | None = None) -> np.ndarray:
        lbs = np.broadcast_to(np.asarray(lb, float), (n,))
        ubs = np.broadcast_to(np.asarray(ub, float), (n,))
        objs = np.broadcast_to(np.asarray(obj, float), (n,))
        return np.array([
            self.add_var(lbs[k], ubs[k], objs[k], binary,
                         None if names is None else names[k])
            for k in range(n)
        ], dtype=int)

    def add_row(self, idx: Iterable[int], val: Iterable[float], relation: str,
                rhs: float, name: str | None = None) -> int:
        if relation not in _RELATIONS:
            raise ModelError(f"unknown relation {relation!r}")
        idx = np.asarray(list(idx) if not isinstance(idx, np.ndarray) else idx, dtype=int)
        val = np.asarray(list(val) if not isinstance(val, np.ndarray) else val, dtype=float)
        if idx.shape != val.shape:
            raise ModelError("row index/value length mismatch")
        if not math.isfinite(rhs):
            raise ModelError(f"row {name or self.num_rows}: rhs must be finite")
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise ModelError(f"row {name or self.num_rows}: variable index out of range")
        # merge duplicate indices
        if idx.size != np.unique(idx).size:
            u, inv = np.unique(idx, return_inverse=True)
            v = np.zeros(u.size)
            np.add.at(v, inv, val)
            idx, val = u, v
        keep = val != 0.0
        self.row_idx.append(idx[keep])
        self.row_val.append(val[keep])
        self.relation.append(relation)
        self.rhs.append(float(rhs))
        self.row_names.append(name)
        self._csr = None
        return self.num_rows - 1

    @classmethod
    def from_matrix(cls, sense: str, A, relation, rhs, obj, lb, ub, name: str = "") -> "LinearModel":
        """Bulk construction from a sparse matrix; no duplicate merging is needed for CSR input."""
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        n_rows, n_vars = A.shape
        mdl = cls(sense, name)
        mdl.obj = [float(v) for v in np.broadcast_to(np.asarray(obj, float), (n_vars,))]
        mdl.lb = [float(v) for v in np.broadcast_to(np.asarray(lb, float), (n_vars,))]
        mdl.ub = [float(v) for v in np.broadcast_to(np.asarray(ub, float), (n_vars,))]
        mdl.var_names = [None] * n_vars
        rel = list(np.broadcast_to(np.asarray(relation, dtype=object), (n_rows,)))
        if any(r not in _RELATIONS for r in rel):
            raise ModelError("unknown relation in bulk rows")
        rhs = np.asarray(rhs, float)
        if rhs.shape != (n_rows,) or not np.all(np.isfinite(rhs)):
            raise ModelError("rhs must be a finite vector with one entry per row")
        for r in range(n_rows):
            s, e = A.indptr[r], A.indptr[r + 1]
            keep = A.data[s:e] != 0.0
            mdl.row_idx.append(A.indices[s:e][keep].astype(int))
            mdl.row_val.append(A.data[s:e][keep].astype(float))
        mdl.relation = rel
        mdl.rhs = rhs.tolist()
        mdl.row_names = [None] * n_rows
        return mdl

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        self.lb[j], self.ub[j] = float(lb), float(ub)

    # -- views ------------------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        if self._csr is None:
            lens = [len(i) for i in self.row_idx]
            indptr = np.concatenate([[0], np.cumsum(lens)]).astype(int)
            indices = np.concatenate(self.row_idx) if self.row_idx else np.zeros(0, int)
            data = np.concatenate(self.row_val) if self.row_val else np.zeros(0)
            self._csr = sp.csr_matrix((data, indices, indptr),
                                      shape=(self.num_rows, self.num_vars))
        return self._csr

    def objective_vector(self) -> np.ndarray:
        return np.asarray(self.obj, float)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lb, float), np.asarray(self.ub, float)

    def integer_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vars, bool)
        if self.binary:
            mask[list(self.binary)] = True
        return mask

    def validate(self) -> None:
        lb, ub = self.bounds()
        if np.any(lb > ub):
            bad = int(np.argmax(lb > ub))
            raise ModelError(f"variable {self.var_label(bad)}: lb > ub")
        for j in self.binary:
            if lb[j] < 0 or ub[j] > 1:
                raise ModelError(f"binary variable {self.var_label(j)} has bounds outside [0, 1]")
        if not np.all(np.isfinite(self.rhs)):
            raise ModelError("non-finite rhs")

    def var_label(self, j: int) -> str:
        return self.var_names[j] or f"x{j}"

    def row_label(self, i: int) -> str:
        return self.row_names[i] or f"r{i}"

    # -- checks -----------------------------------------------------------
    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.matrix() @ np.asarray(x, float)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest absolute violation of rows and bounds at ``x``."""
        x = np.asarray(x, float)
        act = self.row_activity(x)
        rhs = np.asarray(self.rhs, float)
        rel = np.asarray(self.relation)
        viol = np.zeros_like(rhs)
        viol = np.where(rel == LE, np.maximum(act - rhs, 0.0), viol)
        viol = np.where(rel == GE, np.maximum(rhs - act, 0.0), viol)
        viol = np.where(rel == EQ, np.abs(act - rhs), viol)
        lb, ub = self.bounds()
        bviol = np.maximum(np.maximum(lb - x, x - ub), 0.0)
        return float(max(viol.max(initial=0.0), bviol.max(initial=0.0)))

    def objective_at(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ np.asarray(x, float))

    def copy(self) -> "LinearModel":
        other = LinearModel(self.sense, self.name)
        other.obj = list(self.obj)
        other.lb = list(self.lb)
        other.ub = list(self.ub)
        other.var_names = list(self.var_names)
        other.binary = set(self.binary)
        other.row_idx = list(self.row_idx)
        other.row_val = list(self.row_val)
        other.relation = list(self.relation)
        other.rhs = list(self.rhs)
        other.row_names = list(self.row_names)
        return other

    # -- debugging dump ---------------------------------------------------
    def to_lp_text(self) -> str:
        def term(v, j, first):
            sign = "-" if v < 0 else ("" if first else "+")
            return f"{sign} {abs(v):.12g} {self.var_label(j)}".strip()

        def expr(idx, val):
            parts = [term(v, j, k == 0) for k, (j, v) in enumerate(zip(idx, val))]
            return " ".join(parts) if parts else "0"

        out = [f"\\ {self.name}" if self.name else "\\ model",
               "Maximize" if self.sense == "max" else "Minimize"]
        nz = [(j, v) for j, v in enumerate(self.obj) if v != 0.0]
        out.append(" obj: " + expr([j for j, _ in nz], [v for _, v in nz]))
        out.append("Subject To")
        for i in range(self.num_rows):
            out.append(f" {self.row_label(i)}: {expr(self.row_idx[i], self.row_val[i])} "
                       f"{self.relation[i]} {self.rhs[i]:.12g}")
        out.append("Bounds")
        for j in range(self.num_vars):
            lo, hi = self.lb[j], self.ub[j]
            name = self.var_label(j)
            if lo == -INF and hi == INF:
                out.append(f" {name} free")
            else:
                lo_s = "-inf" if lo == -INF else f"{lo:.12g}"
                hi_s = "+inf" if hi == INF else f"{hi:.12g}"
                out.append(f" {lo_s} <= {name} <= {hi_s}")
        if self.binary:
            out.append("Binary")
            out.append(" " + " ".join(self.var_label(j) for j in sorted(self.binary)))
        out.append("End")
        return "\n".join(out) + "\n"
