"""Dense bounded-variable primal simplex.

Solves problems of the form

    maximize    c . x
    subject to  sum(x) == 1
                A x >= b            (optional extra rows)
                0 <= x <= u

which is the shape of every optimisation over a trimming-weight polytope
(weights capped at ``1 / (alpha * n)``).  The solver is two-phase, keeps an
explicit basis inverse updated by eta pivots, and prices with Dantzig's rule
(lowest index on ties), dropping to Bland's rule once degenerate pivots
start repeating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundedLp",
    "LpError",
    "LpResult",
    "feasible",
    "greedy_fill",
    "solve_max",
]

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
DUAL_TOL = 1e-10
_REFACTOR_EVERY = 64
_DEGENERATE_RUN = 40


class LpError(ArithmeticError):
    """Raised on numerical breakdown of the simplex iterations."""


@dataclass(frozen=True)
class BoundedLp:
    """A box-and-simplex linear program.

    ``rows`` and ``rhs`` encode extra constraints ``rows @ x >= rhs``.
    """

    objective: np.ndarray
    upper: np.ndarray
    rows: np.ndarray = field(default=None)
    rhs: np.ndarray = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        u = np.asarray(self.upper, dtype=float).ravel()
        if c.shape != u.shape:
            raise ValueError("objective and upper bounds differ in length")
        if c.size == 0:
            raise ValueError("empty program")
        if np.any(~(u > 0)):
            raise ValueError("upper bounds must be positive")
        n = c.size
        rows = np.zeros((0, n)) if self.rows is None else np.asarray(self.rows, dtype=float)
        rows = rows.reshape(-1, n)
        rhs = np.zeros(0) if self.rhs is None else np.asarray(self.rhs, dtype=float).ravel()
        if rhs.size != rows.shape[0]:
            raise ValueError("rows and rhs differ in length")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(rhs)) and np.all(np.isfinite(c))):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "upper", u)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n(self) -> int:
        return self.objective.size

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        v = [abs(x.sum() - 1.0), max(0.0, -x.min()), max(0.0, (x - self.upper).max())]
        if self.rows.shape[0]:
            v.append(max(0.0, (self.rhs - self.rows @ x).max()))
        return float(max(v))

    def to_dict(self) -> dict:
        return {
            "objective": self.objective.tolist(),
            "upper": self.upper.tolist(),
            "rows": self.rows.tolist(),
            "rhs": self.rhs.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundedLp":
        n = len(data["objective"])
        rows = data.get("rows") or np.zeros((0, n))
        return cls(data["objective"], data["upper"], rows, data.get("rhs") or [])


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    solution: np.ndarray
    duals: np.ndarray | None = None
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def greedy_fill(scores: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fill caps in order of decreasing score until total mass 1.

    This is the exact maximiser of ``scores . x`` over the box-and-simplex
    polytope.  Ties are broken by index (stable sort).
    """
    scores = np.asarray(scores, dtype=float)
    upper = np.asarray(upper, dtype=float)
    order = np.argsort(-scores, kind="stable")
    caps = upper[order]
    before = np.concatenate(([0.0], np.cumsum(caps)[:-1]))
    take = np.clip(1.0 - before, 0.0, caps)
    x = np.zeros_like(scores)
    x[order] = take
    return x


class _Simplex:
    """One solve; holds the working arrays of the bounded-variable method."""

    def __init__(self, lp: BoundedLp, start: np.ndarray | None, max_iter: int | None):
        n, k = lp.n, lp.rows.shape[0]
        m = 1 + k
        self.n, self.k, self.m = n, k, m
        a_struct = np.vstack([np.ones((1, n)), lp.rows])
        a_slack = np.vstack([np.zeros((1, k)), -np.eye(k)])
        self.b = np.concatenate(([1.0], lp.rhs))

        if start is None:
            x0 = greedy_fill(lp.objective, lp.upper)
        else:
            x0 = np.asarray(start, dtype=float)
        # nonbasic structurals sit exactly on a bound
        at_upper = x0 > 0.5 * lp.upper
        xs = np.where(at_upper, lp.upper, 0.0)

        resid = self.b - a_struct @ xs
        basis = np.empty(m, dtype=np.intp)
        sign = np.ones(m)
        n_art = 0
        art_rows = []
        for r in range(m):
            if r > 0 and resid[r] <= 0.0:
                basis[r] = n + (r - 1)  # slack is basic and nonnegative
            else:
                sign[r] = 1.0 if resid[r] >= 0.0 else -1.0
                art_rows.append(r)
                basis[r] = n + k + n_art
                n_art += 1
        a_art = np.zeros((m, n_art))
        for j, r in enumerate(art_rows):
            a_art[r, j] = sign[r]
        self.A = np.hstack([a_struct, a_slack, a_art])
        self.N = n + k + n_art
        self.n_art = n_art
        self.lower = np.zeros(self.N)
        self.upper = np.concatenate([lp.upper, np.full(k + n_art, np.inf)])
        self.x = np.concatenate([xs, np.zeros(k + n_art)])
        self.basis = basis
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[basis] = True
        self.binv = np.eye(m)
        self.max_iter = max_iter if max_iter is not None else 50 * (self.N + m) + 1000
        self.iterations = 0
        self._pivots_since_refactor = 0
        self._refactor()

    def _refactor(self):
        bmat = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError as exc:
            raise LpError("degenerate basis") from exc
        if not np.all(np.isfinite(self.binv)):
            raise LpError("degenerate basis")
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs
        self._pivots_since_refactor = 0

    def run(self, cost: np.ndarray) -> str:
        """Iterate to optimality for ``cost``; returns "optimal" or "unbounded"."""
        A, lower, upper = self.A, self.lower, self.upper
        fixed = upper - lower <= 0.0
        scale = max(1.0, float(np.abs(cost).max()))
        dtol = DUAL_TOL * scale
        bland = False
        degenerate_run = 0
        d = None
        while True:
            if self.iterations >= self.max_iter:
                raise LpError("degenerate basis")
            if d is None:
                # reduced costs only change when the basis does; bound flips reuse them
                y = cost[self.basis] @ self.binv
                d = cost - y @ A
                at_up = self.x >= upper
                eligible = ~self.is_basic & ~fixed & (((d > dtol) & ~at_up) | ((d < -dtol) & at_up))
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                self.duals = y
                return "optimal"
            if bland:
                j = int(cand[0])
            else:
                order = cand[np.argsort(-np.abs(d[cand]), kind="stable")]
                done = self._bulk_flip(order, at_up)
                if done:
                    eligible[order[:done]] = False
                    degenerate_run = 0
                    if done == order.size:
                        continue
                j = int(order[done])
            sigma = -1.0 if at_up[j] else 1.0
            col = self.binv @ A[:, j]
            step = sigma * col  # x_B moves by -t * step

            t_best = upper[j] - lower[j]
            leave = -1
            leave_to_upper = False
            xb = self.x[self.basis]
            lb = lower[self.basis]
            ub = upper[self.basis]
            dec = step > PIVOT_TOL
            inc = step < -PIVOT_TOL
            ratios = np.full(self.m, np.inf)
            ratios[dec] = (xb[dec] - lb[dec]) / step[dec]
            fin = inc & np.isfinite(ub)
            ratios[fin] = (ub[fin] - xb[fin]) / (-step[fin])
            ratios = np.maximum(ratios, 0.0)
            if ratios.size:
                r_min = ratios.min()
                if r_min < t_best:
                    ties = np.flatnonzero(ratios <= r_min + 1e-15)
                    # Bland: among tied rows leave with the lowest variable index
                    leave = int(ties[np.argmin(self.basis[ties])])
                    t_best = float(ratios[leave])
                    leave_to_upper = bool(inc[leave])
            if not np.isfinite(t_best):
                return "unbounded"

            self.iterations += 1
            if t_best <= 1e-12:
                degenerate_run += 1
                if degenerate_run > _DEGENERATE_RUN:
                    bland = True
            else:
                degenerate_run = 0

            self.x[self.basis] = xb - t_best * step
            if leave < 0:
                # bound flip, basis unchanged
                self.x[j] = upper[j] if sigma > 0 else lower[j]
                at_up[j] = sigma > 0
                eligible[j] = False
                continue
            old = self.basis[leave]
            self.x[j] = self.x[j] + sigma * t_best
            self.x[old] = upper[old] if leave_to_upper else lower[old]
            piv = col[leave]
            if abs(piv) < PIVOT_TOL:
                raise LpError("degenerate basis")
            # eta update of the explicit inverse
            row = self.binv[leave] / piv
            self.binv -= np.outer(col, row)
            self.binv[leave] = row
            self.basis[leave] = j
            self.is_basic[old] = False
            self.is_basic[j] = True
            d = None
            self._pivots_since_refactor += 1
            if self._pivots_since_refactor >= _REFACTOR_EVERY:
                self._refactor()

    def _bulk_flip(self, order: np.ndarray, at_up: np.ndarray) -> int:
        """Apply the longest prefix of ``order`` that consists of pure bound flips.

        Sequential Dantzig pricing with cached reduced costs would flip these
        same variables one at a time; doing it as a block is equivalent.
        Returns the number of variables flipped.
        """
        upper, lower = self.upper, self.lower
        lb = lower[self.basis]
        ub = upper[self.basis]
        done = 0
        chunk = 4
        while done < order.size:
            block = order[done:done + chunk]
            rng = upper[block] - lower[block]
            finite = np.isfinite(rng)
            if not finite[0]:
                break
            if not finite.all():
                block = block[: int(np.argmin(finite))]
                rng = rng[: block.size]
            sigma = np.where(at_up[block], -1.0, 1.0)
            steps = (self.binv @ self.A[:, block]) * (sigma * rng)
            xb = self.x[self.basis][:, None] - np.cumsum(steps, axis=1)
            ok = np.all((xb >= lb[:, None] - 1e-13) & (xb <= ub[:, None] + 1e-13), axis=0)
            p = block.size if ok.all() else int(np.argmin(ok))
            if p == 0:
                break
            self.x[self.basis] = xb[:, p - 1]
            flipped = block[:p]
            self.x[flipped] = np.where(sigma[:p] > 0, upper[flipped], lower[flipped])
            at_up[flipped] = sigma[:p] > 0
            self.iterations += p
            done += p
            if p < block.size:
                break
            chunk *= 4
        return done

    def phase_one(self) -> bool:
        """Drive artificials to zero; returns feasibility."""
        if self.n_art:
            cost = np.zeros(self.N)
            cost[self.n + self.k:] = -1.0
            self.run(cost)
            infeas = float(self.x[self.n + self.k:].sum())
            if infeas > FEAS_TOL:
                return False
            # artificials may stay basic, but only at level zero
            self.upper[self.n + self.k:] = 0.0
            self.x[self.n + self.k:] = np.minimum(self.x[self.n + self.k:], 0.0)
            self._refactor()
        return True

    def solution(self) -> np.ndarray:
        x = np.clip(self.x[: self.n], 0.0, self.upper[: self.n])
        return x


def _solve(lp: BoundedLp, start, max_iter, with_objective: bool) -> LpResult:
    if lp.upper.sum() < 1.0 - FEAS_TOL:
        return LpResult("infeasible", float("nan"), np.full(lp.n, np.nan))
    sx = _Simplex(lp, start, max_iter)
    if not sx.phase_one():
        return LpResult("infeasible", float("nan"), np.full(lp.n, np.nan), iterations=sx.iterations)
    duals = None
    if with_objective:
        cost = np.zeros(sx.N)
        cost[: lp.n] = lp.objective
        status = sx.run(cost)
        if status == "unbounded":
            return LpResult("unbounded", float("inf"), sx.solution(), iterations=sx.iterations)
        duals = sx.duals
    x = sx.solution()
    if lp.violation(x) > FEAS_TOL:
        raise LpError("degenerate basis")
    return LpResult("optimal", float(lp.objective @ x), x, duals, sx.iterations)


def solve_max(lp: BoundedLp, start: np.ndarray | None = None, max_iter: int | None = None) -> LpResult:
    """Maximise ``lp.objective @ x`` over the feasible set.

    ``start`` optionally suggests a vertex: coordinates above half their cap
    start at the cap, the rest at zero.  By default the greedy fill for the
    objective is used, which is already optimal when there are no extra rows.
    """
    return _solve(lp, start, max_iter, with_objective=True)


def feasible(lp: BoundedLp, start: np.ndarray | None = None, max_iter: int | None = None) -> LpResult:
    """Phase-one feasibility check; ``value`` is 0 for a feasible program."""
    res = _solve(lp, start, max_iter, with_objective=False)
    if res.ok:
        return LpResult("optimal", 0.0, res.solution, None, res.iterations)
    return res
