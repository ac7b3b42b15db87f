"""Discrete probability measures and their alpha-trimmings.

A measure ``Q`` belongs to the alpha-trimming of ``P`` when
``Q(B) <= P(B) / alpha`` for every Borel set ``B``.  For purely atomic
measures this is equivalent to the atomwise bound, which is what every check
in this module uses after merging coincident atoms.

Samples are plain ``(n, d)`` float arrays whose row order is the arrival
order.  Trimming weights are ``(n,)`` arrays indexed by sample position; the
cap applies to the merged weight of coincident points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "PROB_TOL",
    "DensityFn",
    "DiscreteMeasure",
    "IndexSetError",
    "TrimmingError",
    "as_sample",
    "atom_ids",
    "check_trim_weights",
    "empirical_measure",
    "in_index_set",
    "rn_reweight",
    "sequential_update",
    "transport_distance",
    "trim_membership",
    "trim_violations",
    "trim_weights_ok",
]

PROB_TOL = 1e-12
DIST_TOL = 1e-9


class TrimmingError(ValueError):
    """Weights or a measure fall outside the requested trimming class."""


class IndexSetError(ValueError):
    """A density reweighting was requested at an index where mean g < 1."""


def as_sample(points: Any) -> np.ndarray:
    """Coerce to a finite ``(n, d)`` float array; 1-D input is one coordinate."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("sample must be a 2-D array of points")
    if x.shape[0] == 0:
        raise ValueError("empty sample")
    if x.shape[1] == 0:
        raise ValueError("points must have at least one coordinate")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite coordinates")
    return x


def atom_ids(sample: np.ndarray) -> np.ndarray:
    """Label each sample position with the index of its distinct atom."""
    _, inverse = np.unique(as_sample(sample), axis=0, return_inverse=True)
    return inverse.ravel()


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on R^d.

    Construction merges coincident atoms, drops zero-mass atoms and sorts the
    atoms lexicographically, so two equal measures have equal arrays.
    """

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = as_sample(self.atoms)
        probs = np.asarray(self.probs, dtype=float).ravel()
        if probs.size != atoms.shape[0]:
            raise ValueError("atoms and probs differ in length")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise ValueError("probabilities must sum to 1")
        uniq, inverse = np.unique(atoms, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=probs, minlength=uniq.shape[0])
        keep = merged > 0
        object.__setattr__(self, "atoms", uniq[keep])
        object.__setattr__(self, "probs", merged[keep])

    @classmethod
    def from_weights(cls, sample: np.ndarray, weights: np.ndarray) -> "DiscreteMeasure":
        sample = as_sample(sample)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (sample.shape[0],):
            raise ValueError("one weight per sample point required")
        return cls(sample, weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return self.probs.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.atoms.shape == other.atoms.shape
            and np.array_equal(self.atoms, other.atoms)
            and np.allclose(self.probs, other.probs, rtol=0, atol=PROB_TOL)
        )

    def mean(self) -> np.ndarray:
        return self.probs @ self.atoms

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate function values given at the atoms (leading axis)."""
        return np.tensordot(self.probs, np.asarray(values, dtype=float), axes=(0, 0))

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteMeasure":
        return cls(data["atoms"], data["probs"])


def empirical_measure(sample: np.ndarray) -> DiscreteMeasure:
    """Uniform weights ``1/n`` on the sample; repeated points accumulate."""
    sample = as_sample(sample)
    n = sample.shape[0]
    return DiscreteMeasure(sample, np.full(n, 1.0 / n))


def trim_violations(q_measure: DiscreteMeasure, p_measure: DiscreteMeasure, alpha: float) -> list[dict]:
    """Atoms of ``Q`` that break ``Q({x}) <= P({x}) / alpha``, in atom order.

    Each entry holds the atom, both masses and the excess over the cap.
    An atom outside the support of ``P`` has ``p == 0`` and always violates.
    """
    _check_alpha(alpha)
    if q_measure.dim != p_measure.dim:
        raise ValueError("dimension mismatch")
    both = np.vstack([q_measure.atoms, p_measure.atoms])
    uniq, inverse = np.unique(both, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    kq = len(q_measure)
    p_mass = np.zeros(uniq.shape[0])
    p_mass[inverse[kq:]] = p_measure.probs
    p_at_q = p_mass[inverse[:kq]]
    excess = q_measure.probs - p_at_q / alpha
    bad = (excess > PROB_TOL) | (p_at_q <= 0)
    return [
        {
            "atom": q_measure.atoms[i].tolist(),
            "q": float(q_measure.probs[i]),
            "p": float(p_at_q[i]),
            "excess": float(excess[i]),
        }
        for i in np.flatnonzero(bad)
    ]


def trim_membership(q_measure: DiscreteMeasure, p_measure: DiscreteMeasure, alpha: float) -> bool:
    """True when ``Q`` lies in the alpha-trimming of ``P``."""
    return not trim_violations(q_measure, p_measure, alpha)


def trim_weights_ok(weights: np.ndarray, sample: np.ndarray, alpha: float, ids: np.ndarray | None = None) -> bool:
    """Check the trimming-weight invariant for the first ``len(weights)`` points.

    ``ids`` may carry precomputed :func:`atom_ids` of a longer sample whose
    prefix is being checked; this avoids re-deduplicating in loops.
    """
    _check_alpha(alpha)
    q = np.asarray(weights, dtype=float)
    n = q.size
    if n == 0 or np.any(q < 0) or not np.all(np.isfinite(q)):
        return False
    if abs(math.fsum(q) - 1.0) > PROB_TOL:
        return False
    if ids is None:
        ids = atom_ids(as_sample(sample)[:n])
    ids = ids[:n]
    size = int(ids.max()) + 1
    merged = np.bincount(ids, weights=q, minlength=size)
    counts = np.bincount(ids, minlength=size)
    return bool(np.all(merged <= counts / (alpha * n) + PROB_TOL))


def check_trim_weights(weights, sample, alpha, ids=None) -> None:
    if not trim_weights_ok(weights, sample, alpha, ids):
        raise TrimmingError("not in trimming class")


def sequential_update(
    weights: np.ndarray,
    sample: np.ndarray,
    alpha: float,
    *,
    ids: np.ndarray | None = None,
    check: bool = True,
) -> np.ndarray:
    """Extend trimming weights for ``n`` points to ``n + 1`` points.

    Old weights shrink by ``n / (n + 1)`` and the new point receives
    ``1 / (n + 1)``.  The result stays in the trimming class of the longer
    empirical measure whenever the input was in the shorter one.

    Args:
        weights: current weights, one per point of ``sample[:n]``.
        sample: the arrival-ordered sample; needs at least ``n + 1`` rows.
        alpha: trimming level in (0, 1].
        ids: optional precomputed atom labels for ``sample``.
        check: validate the input weights first (raises TrimmingError).
    """
    q = np.asarray(weights, dtype=float)
    n = q.size
    sample = as_sample(sample)
    if sample.shape[0] <= n:
        raise ValueError("sample has no point to append")
    if check:
        check_trim_weights(q, sample, alpha, ids)
    out = np.empty(n + 1)
    out[:n] = q * (n / (n + 1.0))
    out[n] = 1.0 / (n + 1.0)
    return out


def _running_excess(values: np.ndarray) -> np.ndarray:
    """Partial sums of ``|g| - 1``, accumulated left to right.

    Shared by :func:`in_index_set` and the ladder statistics so that both
    see bit-identical sums.
    """
    return np.add.accumulate(np.abs(values) - 1.0)


def in_index_set(sample_prefix: np.ndarray, g: "DensityFn") -> bool:
    """True when ``(1/n) * sum(|g(X_i)| - 1) >= 0`` over the prefix."""
    values = g(as_sample(sample_prefix))
    return bool(_running_excess(values)[-1] >= 0.0)


def rn_reweight(sample: np.ndarray, g: "DensityFn", alpha: float) -> np.ndarray:
    """Weights proportional to the density values ``g(X_i)``.

    Requires the sample length to be an index where the empirical mean of
    ``g`` is at least 1 and ``g`` bounded by ``1/alpha``; the normalised
    weights then satisfy the trimming cap.
    """
    _check_alpha(alpha)
    sample = as_sample(sample)
    values = g(sample)
    if np.any(values < 0):
        raise ValueError("density takes negative values")
    if g.bound > 1.0 / alpha + PROB_TOL:
        raise ValueError(f"density bound {g.bound} exceeds 1/alpha = {1.0 / alpha}")
    if np.any(values > g.bound + PROB_TOL):
        raise ValueError("density exceeds its declared bound")
    if not np.any(values > 0):
        raise IndexSetError("degenerate density")
    if _running_excess(values)[-1] < 0.0:
        raise IndexSetError("index not in N_Q")
    return values / values.sum()


def transport_distance(q1: DiscreteMeasure, q2: DiscreteMeasure) -> float:
    """Wasserstein-1 distance with Euclidean ground cost.

    In one dimension the transportation optimum has the closed form
    ``integral |F1 - F2|``; otherwise the transportation LP is solved with
    HiGHS.
    """
    if q1.dim != q2.dim:
        raise ValueError("dimension mismatch")
    if q1 == q2:
        return 0.0
    # fixed argument order keeps the result exactly symmetric
    if (len(q1), q1.atoms.tobytes(), q1.probs.tobytes()) > (len(q2), q2.atoms.tobytes(), q2.probs.tobytes()):
        q1, q2 = q2, q1
    if q1.dim == 1:
        return _w1_line(q1, q2)
    return _w1_lp(q1, q2)


def _w1_line(q1: DiscreteMeasure, q2: DiscreteMeasure) -> float:
    x = np.concatenate([q1.atoms[:, 0], q2.atoms[:, 0]])
    w = np.concatenate([q1.probs, -q2.probs])
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    cdf_gap = np.cumsum(w)[:-1]
    return float(np.abs(cdf_gap) @ np.diff(x))


_LP_MAX_CELLS = 4_000_000


def _w1_lp(q1: DiscreteMeasure, q2: DiscreteMeasure) -> float:
    from scipy.optimize import linprog
    from scipy.sparse import csr_array, hstack, kron, identity, vstack

    m, k = len(q1), len(q2)
    if m * k > _LP_MAX_CELLS:
        raise ValueError(f"transport problem with {m}x{k} couplings is too large for the exact LP")
    cost = np.linalg.norm(q1.atoms[:, None, :] - q2.atoms[None, :, :], axis=2).ravel()
    rows = kron(identity(m, format="csr"), csr_array(np.ones((1, k))))
    cols = kron(csr_array(np.ones((1, m))), identity(k, format="csr"))
    a_eq = vstack([rows, cols]).tocsr()
    b_eq = np.concatenate([q1.probs, q2.probs])
    # one marginal constraint is redundant; HiGHS copes with that
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ArithmeticError(f"transport LP failed: {res.message}")
    return max(0.0, float(res.fun))


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


# -- densities ---------------------------------------------------------------

_FORMS = ("constant", "indicator", "truncated-linear", "tabulated")


@dataclass(frozen=True)
class DensityFn:
    """A nonnegative density drawn from a small closed catalogue.

    Forms and their ``params``:

    * ``constant``: ``value``
    * ``indicator``: ``value``, optional ``lo`` / ``hi`` corner vectors
      (``None`` entries are unbounded); ``value`` on the box, 0 elsewhere
    * ``truncated-linear``: ``intercept``, ``slope`` vector, ``cap``;
      evaluates ``clip(intercept + slope . x, 0, cap)``
    * ``tabulated``: ``values`` listed by sample position; evaluating on a
      sample of length ``n`` returns the first ``n`` values
    """

    form: str
    params: dict = field(default_factory=dict)
    bound: float | None = None

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"unknown density form {self.form!r}; expected one of {_FORMS}")
        declared = self._natural_bound() if self.bound is None else float(self.bound)
        if not np.isfinite(declared) or declared < 0:
            raise ValueError("density bound must be finite and nonnegative")
        object.__setattr__(self, "bound", declared)

    def _natural_bound(self) -> float:
        p = self.params
        if self.form == "constant":
            return float(p["value"])
        if self.form == "indicator":
            return float(p["value"])
        if self.form == "truncated-linear":
            return float(p["cap"])
        vals = np.asarray(p["values"], dtype=float)
        return float(vals.max()) if vals.size else 0.0

    def __call__(self, sample: np.ndarray) -> np.ndarray:
        x = as_sample(sample)
        p = self.params
        n, d = x.shape
        if self.form == "constant":
            out = np.full(n, float(p["value"]))
        elif self.form == "indicator":
            inside = np.ones(n, dtype=bool)
            for key, cmp in (("lo", np.greater_equal), ("hi", np.less_equal)):
                corner = p.get(key)
                if corner is None:
                    continue
                corner = np.broadcast_to(
                    np.array([np.nan if c is None else c for c in np.atleast_1d(corner)], dtype=float), (d,)
                )
                ok = np.isnan(corner)
                inside &= np.all(cmp(x, np.where(ok, 0.0, corner)) | ok, axis=1)
            out = np.where(inside, float(p["value"]), 0.0)
        elif self.form == "truncated-linear":
            slope = np.broadcast_to(np.asarray(p["slope"], dtype=float), (d,))
            out = np.clip(float(p["intercept"]) + x @ slope, 0.0, float(p["cap"]))
        else:
            vals = np.asarray(p["values"], dtype=float)
            if n > vals.size:
                raise ValueError("tabulated density has fewer values than sample points")
            out = vals[:n].copy()
        if np.any(out < 0):
            raise ValueError("density takes negative values")
        return out

    def to_dict(self) -> dict:
        if self.form == "tabulated":
            return {"tabulated": list(map(float, self.params["values"])), "bound": self.bound}
        return {"form": self.form, "params": self.params, "bound": self.bound}

    @classmethod
    def from_dict(cls, data: dict) -> "DensityFn":
        if "tabulated" in data:
            return cls("tabulated", {"values": list(data["tabulated"])}, data.get("bound"))
        return cls(data["form"], dict(data.get("params", {})), data.get("bound"))

    @classmethod
    def constant(cls, value: float = 1.0) -> "DensityFn":
        return cls("constant", {"value": value})

    @classmethod
    def indicator(cls, value: float, lo=None, hi=None) -> "DensityFn":
        return cls("indicator", {"value": value, "lo": lo, "hi": hi})

    @classmethod
    def tabulated(cls, values) -> "DensityFn":
        return cls("tabulated", {"values": [float(v) for v in values]})
