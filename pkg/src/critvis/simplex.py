"""Revised simplex method for equality-constrained LPs with bounded variables.

Specialized to the shape of the local-model feasibility program: all
variables have lower bound 0 and a finite upper bound, the right-hand side
is nonnegative, and the constraint matrix splits into a large static sparse
block (identical for every solve on a scenario) plus a small dense block of
per-solve columns.  Bounds are handled directly, not as extra rows; the
basis inverse is kept dense and updated in product form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

AT_LOWER, AT_UPPER, BASIC = 0, 1, 2


@dataclass(frozen=True)
class SimplexOptions:
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    pivot_tol: float = 1e-10
    refactor_every: int = 100
    max_iterations: int | None = None
    stall_factor: int = 5  # switch to Bland's rule after stall_factor * rows stalled steps


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "iteration_limit" | "numerical"
    x: np.ndarray
    objective: float
    iterations: int
    pivots: int
    basis: tuple[np.ndarray, np.ndarray] | None
    message: str = ""


class _NumericalTrouble(Exception):
    pass


class RevisedSimplex:
    """Minimize cost.x subject to [static | dense] x_struct = rhs, 0 <= x <= upper."""

    def __init__(self, static_columns: sp.spmatrix, rhs: np.ndarray, options: SimplexOptions | None = None):
        self.options = options or SimplexOptions()
        self.static = sp.csc_matrix(static_columns)
        self.static_t = sp.csr_matrix(self.static.T)
        self.rhs = np.asarray(rhs, dtype=float)
        if self.rhs.ndim != 1 or self.rhs.size != self.static.shape[0]:
            raise ValueError("rhs length must match the constraint row count")
        if self.rhs.min() < 0.0:
            raise ValueError("this solver expects a nonnegative right-hand side")
        self.m = self.static.shape[0]
        self.n_static = self.static.shape[1]

    # -- per-solve state ------------------------------------------------

    def solve(
        self,
        dense_columns: np.ndarray,
        cost: np.ndarray,
        upper: np.ndarray,
        warm: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> SimplexResult:
        """Two-phase primal simplex; `warm` is a (basis, vstat) pair from a prior solve."""
        m = self.m
        self.dense = np.asarray(dense_columns, dtype=float).reshape(m, -1)
        self.ns = self.n_static + self.dense.shape[1]
        self.cost_struct = np.asarray(cost, dtype=float)
        self.upper_struct = np.asarray(upper, dtype=float)
        if self.cost_struct.size != self.ns or self.upper_struct.size != self.ns:
            raise ValueError("cost/upper length must cover static plus dense columns")

        if warm is not None:
            try:
                result = self._try_warm(warm)
            except _NumericalTrouble:
                result = None
            if result is not None:
                return result
        try:
            return self._solve_cold(bland_from_start=False)
        except _NumericalTrouble:
            pass
        try:
            return self._solve_cold(bland_from_start=True)
        except _NumericalTrouble as exc:
            return SimplexResult(
                status="numerical",
                x=np.zeros(self.ns),
                objective=np.nan,
                iterations=self.iterations,
                pivots=self.pivots,
                basis=None,
                message=f"numerical breakdown persisted under Bland's rule: {exc}",
            )

    def _try_warm(self, warm: tuple[np.ndarray, np.ndarray]) -> SimplexResult | None:
        basis, vstat = warm
        nt = self.ns + self.m
        if basis.shape != (self.m,) or vstat.shape != (nt,):
            return None
        self.basis = basis.copy()
        self.vstat = vstat.copy()
        self.artificial_upper = 0.0
        self.iterations = 0
        self.pivots = 0
        self.bland = False
        self.stalled = 0
        try:
            self._refactor()
        except _NumericalTrouble:
            return None
        if self._bound_violation() > self.options.feasibility_tol:
            return None
        try:
            status = self._iterate(phase=2)
        except _NumericalTrouble:
            return None
        if status != "optimal":
            return None
        return self._finish(status)

    def _solve_cold(self, bland_from_start: bool) -> SimplexResult:
        m, ns = self.m, self.ns
        self.basis = np.arange(ns, ns + m)
        self.vstat = np.concatenate([np.full(ns, AT_LOWER, dtype=np.int8), np.full(m, BASIC, dtype=np.int8)])
        self.artificial_upper = np.inf
        self.binv = np.eye(m)
        self.xb = self.rhs.copy()
        self.iterations = 0
        self.pivots = 0
        self.bland = bland_from_start
        self.stalled = 0

        status = self._iterate(phase=1)
        if status != "optimal":
            return self._finish(status)
        infeasibility = self._artificial_load()
        if infeasibility > max(1e-7, self.options.feasibility_tol * self.m):
            return self._finish("infeasible", message=f"phase 1 ended with residual {infeasibility:.3e}")
        self.artificial_upper = 0.0
        status = self._iterate(phase=2)
        return self._finish(status)

    # -- pieces ----------------------------------------------------------

    def _phase1_cost(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.ns), np.ones(self.m)])

    def _phase2_cost(self) -> np.ndarray:
        return np.concatenate([self.cost_struct, np.zeros(self.m)])

    def _artificial_load(self) -> float:
        mask = self.basis >= self.ns
        return float(np.abs(self.xb[mask]).sum()) if mask.any() else 0.0

    def _upper_full(self) -> np.ndarray:
        return np.concatenate([self.upper_struct, np.full(self.m, self.artificial_upper)])

    def _column(self, j: int) -> np.ndarray:
        if j < self.n_static:
            col = np.zeros(self.m)
            start, stop = self.static.indptr[j], self.static.indptr[j + 1]
            col[self.static.indices[start:stop]] = self.static.data[start:stop]
            return col
        if j < self.ns:
            return self.dense[:, j - self.n_static].copy()
        col = np.zeros(self.m)
        col[j - self.ns] = 1.0
        return col

    def _ftran(self, j: int) -> np.ndarray:
        if j < self.n_static:
            start, stop = self.static.indptr[j], self.static.indptr[j + 1]
            return self.binv[:, self.static.indices[start:stop]] @ self.static.data[start:stop]
        if j < self.ns:
            return self.binv @ self.dense[:, j - self.n_static]
        return self.binv[:, j - self.ns].copy()

    def _effective_rhs(self) -> np.ndarray:
        b = self.rhs.copy()
        at_upper = np.flatnonzero(self.vstat[: self.ns] == AT_UPPER)
        for j in at_upper:
            b -= self.upper_struct[j] * self._column(j)
        return b

    def _refactor(self):
        mat = np.empty((self.m, self.m))
        for pos, j in enumerate(self.basis):
            mat[:, pos] = self._column(int(j))
        try:
            self.binv = scipy.linalg.inv(mat, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise _NumericalTrouble(f"singular basis at refactorization: {exc}")
        if not np.isfinite(self.binv).all():
            raise _NumericalTrouble("non-finite basis inverse")
        self.xb = self.binv @ self._effective_rhs()

    def _bound_violation(self) -> float:
        ub = self._upper_full()[self.basis]
        over = np.maximum(self.xb - ub, 0.0, where=np.isfinite(ub), out=np.zeros(self.m))
        under = np.maximum(-self.xb, 0.0)
        return float(max(over.max(initial=0.0), under.max(initial=0.0)))

    def _iterate(self, phase: int) -> str:
        opts = self.options
        cost_full = self._phase1_cost() if phase == 1 else self._phase2_cost()
        maxiter = opts.max_iterations or (30 * self.m + 10000)
        stall_threshold = opts.stall_factor * self.m
        since_refactor = 0
        prev_objective = np.inf

        while True:
            if self.iterations >= maxiter:
                return "iteration_limit"
            self.iterations += 1

            cb = cost_full[self.basis]
            if np.count_nonzero(cb) == 0:
                y = np.zeros(self.m)
            else:
                y = cb @ self.binv
            reduced = np.empty(self.ns)
            reduced[: self.n_static] = -(self.static_t @ y)
            reduced[self.n_static :] = -(self.dense.T @ y)
            reduced += cost_full[: self.ns]

            stat = self.vstat[: self.ns]
            favourable = np.where(
                stat == AT_LOWER, -reduced, np.where(stat == AT_UPPER, reduced, 0.0)
            )
            candidates = favourable > opts.optimality_tol
            if not candidates.any():
                if phase == 1 and self._artificial_load() > max(1e-7, opts.feasibility_tol * self.m):
                    return "optimal"  # caller inspects the artificial load
                return "optimal"
            if self.bland:
                q = int(np.flatnonzero(candidates)[0])
            else:
                q = int(np.argmax(favourable))
            direction = 1.0 if stat[q] == AT_LOWER else -1.0

            w = self._ftran(q)
            delta = direction * w
            ub = self._upper_full()[self.basis]
            ratios = np.full(self.m, np.inf)
            pos = delta > opts.pivot_tol
            if pos.any():
                ratios[pos] = self.xb[pos] / delta[pos]
            neg = delta < -opts.pivot_tol
            if neg.any():
                finite = neg & np.isfinite(ub)
                ratios[finite] = (self.xb[finite] - ub[finite]) / delta[finite]
            np.maximum(ratios, 0.0, out=ratios)

            bound_step = self.upper_struct[q]
            min_ratio = float(ratios.min(initial=np.inf))
            if bound_step <= min_ratio:
                if not np.isfinite(bound_step):
                    raise _NumericalTrouble("unbounded direction in a bounded problem")
                self.xb -= bound_step * delta
                self.vstat[q] = AT_UPPER if stat[q] == AT_LOWER else AT_LOWER
                continue
            if not np.isfinite(min_ratio):
                raise _NumericalTrouble("no blocking variable found")

            near = np.flatnonzero(ratios <= min_ratio + 1e-12)
            if self.bland:
                leave = int(near[np.argmin(self.basis[near])])
            else:
                leave = int(near[np.argmax(np.abs(delta[near]))])
            step = float(ratios[leave])

            leaving = int(self.basis[leave])
            self.xb -= step * delta
            self.vstat[leaving] = AT_LOWER if delta[leave] > 0 else AT_UPPER
            entering_value = step if direction > 0 else self.upper_struct[q] - step
            self.basis[leave] = q
            self.vstat[q] = BASIC
            self.xb[leave] = entering_value

            pivot_row = self.binv[leave, :] / w[leave]
            w_masked = w.copy()
            w_masked[leave] = 0.0
            self.binv -= np.outer(w_masked, pivot_row)
            self.binv[leave, :] = pivot_row
            self.pivots += 1
            since_refactor += 1

            objective = float(cost_full[self.basis] @ self.xb)
            if objective >= prev_objective - 1e-13 * (1.0 + abs(objective)):
                self.stalled += 1
                if self.stalled > stall_threshold:
                    self.bland = True
            else:
                self.stalled = 0
            prev_objective = objective

            if since_refactor >= opts.refactor_every:
                self._refactor()
                since_refactor = 0
                if self._bound_violation() > 100 * opts.feasibility_tol:
                    raise _NumericalTrouble("feasibility drift after refactorization")

    def _finish(self, status: str, message: str = "") -> SimplexResult:
        if status == "optimal":
            self._refactor()
            if self._bound_violation() > 100 * self.options.feasibility_tol:
                raise _NumericalTrouble("final basis lost feasibility")
        x = np.where(self.vstat[: self.ns] == AT_UPPER, self.upper_struct, 0.0)
        structural = self.basis < self.ns
        x[self.basis[structural]] = self.xb[structural]
        return SimplexResult(
            status=status,
            x=x,
            objective=float(self.cost_struct @ x),
            iterations=self.iterations,
            pivots=self.pivots,
            basis=(self.basis.copy(), self.vstat.copy()) if status == "optimal" else None,
            message=message,
        )
