"""Seeded Monte Carlo experiments for the large-sample behaviour of trimmings.

Five experiments are provided, each returning a :class:`ConvergenceReport`:

* ``consistency``: Hausdorff distance between the empirical zonoid region and
  a population reference region along a sample-size schedule.
* ``sequence``: Wasserstein distance from an explicitly constructed sequence
  ``Q_n`` in the empirical trimmings to a fixed target ``Q = g dP``.
* ``ladder``: tail statistic of the relative gaps between ladder epochs.
* ``gc``: uniform deviation of empirical means over a function family.
* ``integral-stability``: grid disagreement between epsilon-relaxed integral
  regions of samples and the reference integral region.

Seeding: a single master seed; every random stream is derived from it with
:func:`derive_seed` (SHA-256 of the master and a tuple of string keys), so
replications can run in any order or process and still give identical
results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .families import FunctionFamily, make_family
from .measure import (
    DensityFn,
    DiscreteMeasure,
    as_sample,
    atom_ids,
    empirical_measure,
    _running_excess,
    rn_reweight,
    sequential_update,
    transport_distance,
    trim_membership,
    trim_weights_ok,
)
from .regions import (
    SupportRegion,
    direction_grid,
    hausdorff_distance,
    integral_region_mask,
    query_lattice,
    zonoid_region,
)

__all__ = [
    "EXPERIMENTS",
    "MASTER_SEED",
    "SCHEMA_VERSION",
    "ConvergenceReport",
    "DistributionSpec",
    "ExperimentConfig",
    "LadderStats",
    "default_config",
    "derive_seed",
    "draw_sample",
    "gc_deviation",
    "gc_experiment",
    "integral_stability_experiment",
    "ladder_epochs",
    "ladder_experiment",
    "nq_ladder",
    "partial_report",
    "reference_region",
    "region_consistency_experiment",
    "run_experiment",
    "tail_ratio",
    "trimmed_sequence_experiment",
]

SCHEMA_VERSION = 1
MASTER_SEED = 20081
_KINDS = ("uniform-box", "gaussian", "mixture")


def derive_seed(master: int, *keys) -> int:
    """Deterministic 63-bit seed for the stream named by ``keys``."""
    text = json.dumps([int(master), *[str(k) for k in keys]])
    return int(hashlib.sha256(text.encode()).hexdigest()[:16], 16) >> 1


# -- distributions -----------------------------------------------------------

@dataclass(frozen=True)
class DistributionSpec:
    """Population law of the i.i.d. sample.

    ``uniform-box`` takes ``lo`` and ``hi`` corners, ``gaussian`` takes
    ``mean`` and ``cov``, and ``mixture`` takes ``weights`` (two entries) and
    ``components`` (two nested spec dicts of equal dimension).
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {_KINDS}")
        p = self.params
        if self.kind == "uniform-box":
            lo, hi = np.atleast_1d(np.asarray(p["lo"], float)), np.atleast_1d(np.asarray(p["hi"], float))
            if lo.shape != hi.shape or np.any(lo >= hi):
                raise ValueError("uniform box needs lo < hi coordinatewise")
        elif self.kind == "gaussian":
            mean = np.atleast_1d(np.asarray(p["mean"], float))
            cov = np.atleast_2d(np.asarray(p["cov"], float))
            if cov.shape != (mean.size, mean.size) or not np.allclose(cov, cov.T):
                raise ValueError("covariance must be a symmetric d x d matrix")
            if np.linalg.eigvalsh(cov).min() < -1e-12:
                raise ValueError("covariance must be positive semidefinite")
        else:
            w = np.asarray(p["weights"], float)
            comps = [c if isinstance(c, DistributionSpec) else DistributionSpec(c["kind"], c["params"])
                     for c in p["components"]]
            if w.shape != (2,) or len(comps) != 2 or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise ValueError("mixture needs two components and weights summing to 1")
            if comps[0].dim != comps[1].dim:
                raise ValueError("mixture components differ in dimension")

    def _components(self):
        return [c if isinstance(c, DistributionSpec) else DistributionSpec(c["kind"], c["params"])
                for c in self.params["components"]]

    @property
    def dim(self) -> int:
        p = self.params
        if self.kind == "uniform-box":
            return np.atleast_1d(p["lo"]).size
        if self.kind == "gaussian":
            return np.atleast_1d(p["mean"]).size
        return self._components()[0].dim

    def mean(self) -> np.ndarray:
        p = self.params
        if self.kind == "uniform-box":
            return (np.atleast_1d(np.asarray(p["lo"], float)) + np.atleast_1d(np.asarray(p["hi"], float))) / 2
        if self.kind == "gaussian":
            return np.atleast_1d(np.asarray(p["mean"], float))
        w = np.asarray(p["weights"], float)
        a, b = self._components()
        return w[0] * a.mean() + w[1] * b.mean()

    def bounding_box(self) -> np.ndarray:
        """Two corner rows enclosing (almost all of) the mass."""
        p = self.params
        if self.kind == "uniform-box":
            return np.array([np.atleast_1d(p["lo"]), np.atleast_1d(p["hi"])], dtype=float)
        if self.kind == "gaussian":
            m = self.mean()
            s = 3 * np.sqrt(np.diag(np.atleast_2d(np.asarray(p["cov"], float))))
            return np.array([m - s, m + s])
        boxes = np.vstack([c.bounding_box() for c in self._components()])
        return np.array([boxes.min(axis=0), boxes.max(axis=0)])

    def draw(self, n: int, seed: int) -> np.ndarray:
        d = self.dim
        p = self.params
        if self.kind == "uniform-box":
            lo, hi = self.bounding_box()
            return lo + (hi - lo) * np.random.default_rng(seed).random((n, d))
        if self.kind == "gaussian":
            cov = np.atleast_2d(np.asarray(p["cov"], float))
            w, v = np.linalg.eigh(cov)
            root = v * np.sqrt(np.clip(w, 0, None))
            return self.mean() + np.random.default_rng(seed).standard_normal((n, d)) @ root.T
        a, b = self._components()
        labels = np.random.default_rng(derive_seed(seed, "labels")).random(n) >= p["weights"][0]
        xa = a.draw(n, derive_seed(seed, "component", 0))
        xb = b.draw(n, derive_seed(seed, "component", 1))
        return np.where(labels[:, None], xb, xa)

    def support(self, directions: np.ndarray, alpha: float) -> np.ndarray | None:
        """Population zonoid support values, or None when no closed form is used."""
        u = np.atleast_2d(np.asarray(directions, dtype=float))
        if self.kind == "gaussian":
            cov = np.atleast_2d(np.asarray(self.params["cov"], float))
            sd = np.sqrt(np.einsum("ij,jk,ik->i", u, cov, u))
            spread = 0.0 if alpha >= 1 else norm.pdf(norm.ppf(1 - alpha)) / alpha
            return u @ self.mean() + sd * spread
        if self.kind == "uniform-box" and self.dim <= 2:
            lo, hi = self.bounding_box()
            c = u * (hi - lo)
            shift = u @ lo + np.minimum(c, 0).sum(axis=1)
            mags = np.abs(c)
            if self.dim == 1:
                return shift + np.array([_box_tail_mean(m[0], 0.0, alpha) for m in mags])
            return shift + np.array([_box_tail_mean(m[0], m[1], alpha) for m in mags])
        return None

    def to_dict(self) -> dict:
        p = dict(self.params)
        if self.kind == "mixture":
            p["components"] = [c.to_dict() for c in self._components()]
        return {"kind": self.kind, "params": _plain(p)}

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        return cls(data["kind"], dict(data["params"]))


def _box_tail_mean(a: float, b: float, alpha: float) -> float:
    """Mean of the upper alpha-tail of ``a U1 + b U2`` with independent uniforms."""
    if a < b:
        a, b = b, a
    if a == 0:
        return 0.0
    r = b / (2 * a)
    if alpha <= r:
        return a + b - (2.0 / 3.0) * math.sqrt(2 * a * b * alpha)
    if alpha <= 1 - r:
        t = a + b / 2 - a * alpha
        return ((a * a - t * t) / (2 * a) + r * (a + b / 3)) / alpha
    # symmetric about (a + b) / 2: split the mean into the two tails
    lower = a + b - _box_tail_mean(a, b, 1 - alpha)
    return ((a + b) / 2 - (1 - alpha) * lower) / alpha


def draw_sample(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. points; a longer draw with the same seed extends a shorter one."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return spec.draw(int(n), int(seed))


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# -- ladder epochs -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LadderStats:
    epochs: np.ndarray
    ratios: np.ndarray


def _ladder_from_sums(sums: np.ndarray, max_epochs: int | None) -> LadderStats:
    epochs = np.flatnonzero(sums >= 0) + 1
    if max_epochs is not None:
        epochs = epochs[:max_epochs]
    ratios = np.diff(epochs) / epochs[:-1] if epochs.size > 1 else np.zeros(0)
    return LadderStats(epochs, ratios)


def ladder_epochs(z, max_epochs: int | None = None) -> LadderStats:
    """Times ``n`` at which the partial sum ``z_1 + ... + z_n`` is nonnegative."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise ValueError("empty sequence")
    return _ladder_from_sums(np.add.accumulate(z), max_epochs)


def nq_ladder(sample: np.ndarray, g: DensityFn, max_epochs: int | None = None) -> LadderStats:
    """Ladder epochs of ``|g(X_i)| - 1``, i.e. the indices where reweighting is allowed."""
    return _ladder_from_sums(_running_excess(g(as_sample(sample))), max_epochs)


def tail_ratio(stats: LadderStats) -> float:
    """Median gap ratio over the last decile of epochs (NaN if fewer than two epochs)."""
    k = stats.epochs.size
    if k < 2:
        return float("nan")
    tail = max(1, math.ceil(k / 10))
    return float(np.median(stats.ratios[-tail:]))


# -- configuration and reports -----------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment run.

    ``reference`` is ``"analytic"`` (closed-form population object, falling
    back to a large sample when none exists) or an explicit large-sample
    size.  ``source`` selects the ladder increments: ``"rademacher"`` or
    ``"density"`` (``|g(X_i)| - 1``).
    """

    experiment: str
    dist: DistributionSpec
    alpha: float = 0.5
    n_schedule: tuple = (100, 400, 1600, 6400)
    replications: int = 20
    seed: int = MASTER_SEED
    grid: int | None = None
    reference: str | int = "analytic"
    density: DensityFn | None = None
    family: str = "clipped-axes"
    epsilon: float = 0.05
    query_size: int = 101
    source: str = "rademacher"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {sorted(EXPERIMENTS)}")
        sched = tuple(int(n) for n in self.n_schedule)
        if not sched or sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("n_schedule must be a strictly increasing list of positive sizes")
        object.__setattr__(self, "n_schedule", sched)
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.source not in ("rademacher", "density"):
            raise ValueError("source must be 'rademacher' or 'density'")
        if self.reference != "analytic" and (not isinstance(self.reference, int) or self.reference < 1):
            raise ValueError("reference must be 'analytic' or a positive sample size")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def n_ref(self) -> int:
        return self.reference if isinstance(self.reference, int) else 10 * max(self.n_schedule)

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "dist": self.dist.to_dict(),
            "alpha": self.alpha,
            "n_schedule": list(self.n_schedule),
            "replications": self.replications,
            "seed": self.seed,
            "grid": self.grid,
            "reference": self.reference,
            "density": None if self.density is None else _plain(self.density.to_dict()),
            "family": self.family,
            "epsilon": self.epsilon,
            "query_size": self.query_size,
            "source": self.source,
            "workers": self.workers,
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        name = data.get("experiment")
        base = default_config(name).to_dict() if name in EXPERIMENTS else {}
        base.update(data)
        unknown = set(base) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base["dist"] = DistributionSpec.from_dict(base["dist"])
        if base.get("density") is not None:
            base["density"] = DensityFn.from_dict(base["density"])
        if "n_schedule" in base:
            base["n_schedule"] = tuple(base["n_schedule"])
        return cls(**base)

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form (worker count excluded)."""
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Per-schedule summaries plus the per-replication values behind them.

    ``metrics`` maps a metric name to a ``(replications, len(schedule))``
    array; the first entry is the primary metric.
    """

    experiment: str
    config: dict
    config_hash: str
    seed: int
    schedule: tuple
    metrics: dict
    extra: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        rows = []
        for j, n in enumerate(self.schedule):
            row = {"n": int(n)}
            for name, vals in self.metrics.items():
                col = np.asarray(vals, dtype=float)[:, j]
                ok = col[np.isfinite(col)]
                row[f"{name}_mean"] = float(ok.mean()) if ok.size else float("nan")
                row[f"{name}_median"] = float(np.median(ok)) if ok.size else float("nan")
                row[f"{name}_std"] = float(ok.std()) if ok.size else float("nan")
            row["replications"] = int(np.isfinite(np.asarray(next(iter(self.metrics.values())))[:, j]).sum())
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        rows = self.summary()
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION} experiment={self.experiment} "
                  f"config_hash={self.config_hash} seed={self.seed}\n")
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "config": self.config,
            "schedule": list(self.schedule),
            "summary": self.summary(),
            "replications": {k: _nan_safe(np.asarray(v, float).tolist()) for k, v in self.metrics.items()},
            "extra": _nan_safe(_plain(self.extra)),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _nan_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, list):
        return [_nan_safe(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _nan_safe(v) for k, v in obj.items()}
    return obj


def _replicate(fn, config: ExperimentConfig, shared, sink: list | None = None) -> list:
    """Run ``fn(config, shared, r)`` for every replication, ordered by ``r``.

    Finished rows are also appended to ``sink`` as they arrive so that a
    caller can salvage them after an interruption.
    """
    rows = [] if sink is None else sink
    reps = range(config.replications)
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for row in pool.map(fn, [config] * len(reps), [shared] * len(reps), reps):
                rows.append(row)
    else:
        for r in reps:
            rows.append(fn(config, shared, r))
    return list(rows)


def partial_report(config: ExperimentConfig, rows: list) -> ConvergenceReport | None:
    """Report over the replications that finished, or None if none did."""
    return _report(config, rows, {"partial": True}) if rows else None


def _report(config: ExperimentConfig, rows: list, extra: dict | None = None) -> ConvergenceReport:
    names = list(rows[0])
    metrics = {k: np.array([r[k] for r in rows], dtype=float) for k in names}
    return ConvergenceReport(
        config.experiment, config.to_dict(), config.hash(), config.seed, config.n_schedule, metrics, extra or {}
    )


def _rep_seed(config: ExperimentConfig, r: int) -> int:
    return derive_seed(config.seed, config.experiment, "replication", r)


def _ref_seed(config: ExperimentConfig) -> int:
    return derive_seed(config.seed, config.experiment, "reference")


# -- region consistency ------------------------------------------------------

def reference_region(config: ExperimentConfig) -> SupportRegion:
    """Population zonoid region on the experiment grid."""
    u = direction_grid(config.dist.dim, config.grid)
    if config.reference == "analytic":
        h = config.dist.support(u, config.alpha)
        if h is not None:
            return SupportRegion(u, h)
    big = draw_sample(config.dist, config.n_ref, _ref_seed(config))
    return zonoid_region(big, config.alpha, u, vertices=False)


def _consistency_rep(config, ref, r):
    x = draw_sample(config.dist, config.n_schedule[-1], _rep_seed(config, r))
    dist = [hausdorff_distance(zonoid_region(x[:n], config.alpha, ref.directions, vertices=False), ref)
            for n in config.n_schedule]
    return {"hausdorff": dist}


def region_consistency_experiment(config: ExperimentConfig, sink: list | None = None) -> ConvergenceReport:
    """Hausdorff distance from empirical zonoid regions to the population region."""
    ref = reference_region(config)
    rows = _replicate(_consistency_rep, config, ref, sink)
    return _report(config, rows, {"reference_h": ref.h})


# -- constructed trimmed sequence --------------------------------------------

def target_measure(config: ExperimentConfig) -> DiscreteMeasure:
    """Large-sample discretisation of ``Q = g dP``."""
    big = draw_sample(config.dist, config.n_ref, _ref_seed(config))
    vals = config.density(big)
    return DiscreteMeasure.from_weights(big, vals / vals.sum())


def build_trimmed_sequence(sample: np.ndarray, g: DensityFn, alpha: float, keep=None):
    """Weights ``q_n`` for ``n = 1..len(sample)`` following the constructive limit argument.

    At every index where the running mean of ``g`` is at least 1 the weights
    are ``g(X_i) / sum g``; in between, the previous weights are extended by
    the sequential update.  Indices before the first such index have no
    weights.  Yields ``(n, q_n, reweighted)`` for every ``n`` (or only for
    ``n`` in ``keep``), and raises if any ``q_n`` leaves the trimming class.
    """
    sample = as_sample(sample)
    ids = atom_ids(sample)
    sums = _running_excess(g(sample))
    keep = None if keep is None else set(int(k) for k in keep)
    q = None
    for n in range(1, sample.shape[0] + 1):
        fresh = sums[n - 1] >= 0
        if fresh:
            q = rn_reweight(sample[:n], g, alpha)
        elif q is not None:
            q = sequential_update(q, sample, alpha, ids=ids, check=False)
        if q is not None and not trim_weights_ok(q, sample, alpha, ids):
            raise ArithmeticError(f"constructed weights left the trimming class at n={n}")
        if keep is None or n in keep:
            yield n, q, bool(fresh)


def _sequence_rep(config, target, r):
    x = draw_sample(config.dist, config.n_schedule[-1], _rep_seed(config, r))
    dist, member = [], []
    for n, q, _ in build_trimmed_sequence(x, config.density, config.alpha, keep=config.n_schedule):
        if q is None:
            dist.append(float("nan"))
            member.append(float("nan"))
            continue
        qn = DiscreteMeasure.from_weights(x[:n], q)
        member.append(float(trim_membership(qn, empirical_measure(x[:n]), config.alpha)))
        dist.append(transport_distance(qn, target))
    return {"transport": dist, "member": member}


def trimmed_sequence_experiment(config: ExperimentConfig, sink: list | None = None) -> ConvergenceReport:
    """Distance from the constructed ``Q_n`` to the reweighted reference ``Q``.

    Entries before the first admissible reweighting index are NaN.  Every
    ``q_n`` is checked against the trimming cap during construction and the
    reported ones are also checked as measures (``member`` metric).
    """
    if config.density is None:
        raise ValueError("sequence experiment needs a density")
    if config.density.bound > 1.0 / config.alpha + 1e-12:
        raise ValueError("density bound exceeds 1/alpha")
    target = target_measure(config)
    return _report(config, _replicate(_sequence_rep, config, target, sink))


# -- ladder ratios -----------------------------------------------------------

def _ladder_increments(config: ExperimentConfig, r: int) -> np.ndarray:
    n = config.n_schedule[-1]
    seed = _rep_seed(config, r)
    if config.source == "rademacher":
        return np.where(np.random.default_rng(seed).random(n) < 0.5, -1.0, 1.0)
    return np.abs(config.density(draw_sample(config.dist, n, seed))) - 1.0


def _ladder_rep(config, _shared, r):
    sums = np.add.accumulate(_ladder_increments(config, r))
    stats = [_ladder_from_sums(sums[:n], None) for n in config.n_schedule]
    return {"tail_ratio": [tail_ratio(s) for s in stats], "epochs": [float(s.epochs.size) for s in stats]}


def ladder_experiment(config: ExperimentConfig, sink: list | None = None) -> ConvergenceReport:
    """Last-decile median of ladder gap ratios at each sequence length."""
    if config.source == "density" and config.density is None:
        raise ValueError("density source needs a density")
    rows = _replicate(_ladder_rep, config, None, sink)
    first = _ladder_from_sums(np.add.accumulate(_ladder_increments(config, 0)), None)
    return _report(config, rows, {"first_replication": {"epochs": first.epochs, "ratios": first.ratios}})


# -- Glivenko-Cantelli deviations --------------------------------------------

def gc_deviation(sample: np.ndarray, family: FunctionFamily, reference: DiscreteMeasure, prefix_schedule) -> np.ndarray:
    """``max_f |mean of f over the first n points - integral of f under reference|`` per ``n``."""
    x = as_sample(sample)
    sched = np.asarray(prefix_schedule, dtype=int)
    if np.any(sched < 1) or np.any(sched > x.shape[0]):
        raise ValueError("prefix lengths must lie in 1..len(sample)")
    if len(family) == 0:
        return np.zeros(sched.size)
    target = reference.integrate(family.values(reference.atoms))
    csum = np.add.accumulate(family.values(x), axis=0)
    means = csum[sched - 1] / sched[:, None]
    return np.max(np.abs(means - target), axis=1)


def _experiment_family(config: ExperimentConfig) -> FunctionFamily:
    # scaled to the population box so every replication uses the same family
    return make_family(config.family, config.dist.bounding_box())


def _gc_rep(config, shared, r):
    family, ref = shared
    x = draw_sample(config.dist, config.n_schedule[-1], _rep_seed(config, r))
    return {"deviation": gc_deviation(x, family, ref, config.n_schedule).tolist()}


def gc_experiment(config: ExperimentConfig, sink: list | None = None) -> ConvergenceReport:
    """Uniform deviation of empirical family means from a large-sample reference."""
    family = _experiment_family(config)
    big = draw_sample(config.dist, config.n_ref, _ref_seed(config))
    ref = empirical_measure(big)
    return _report(config, _replicate(_gc_rep, config, (family, ref), sink))


# -- integral-region stability -----------------------------------------------

def _stability_rep(config, shared, r):
    family, query, ref_mask = shared
    x = draw_sample(config.dist, config.n_schedule[-1], _rep_seed(config, r))
    members = max(1, int(ref_mask.sum()))
    dis, miss = [], []
    for n in config.n_schedule:
        mask = integral_region_mask(x[:n], config.alpha, family, query, config.epsilon)
        dis.append(float(np.mean(mask != ref_mask)))
        miss.append(float(np.sum(ref_mask & ~mask)) / members)
    return {"miss": miss, "disagreement": dis}


def integral_stability_experiment(
    config: ExperimentConfig,
    family: FunctionFamily | None = None,
    query: np.ndarray | None = None,
    sink: list | None = None,
) -> ConvergenceReport:
    """Compare epsilon-relaxed sample integral regions with the reference region.

    ``miss`` is the fraction of reference-region grid points absent from the
    sample region; ``disagreement`` is the fraction of all grid points where
    the two masks differ.
    """
    family = _experiment_family(config) if family is None else family
    if not family.continuous_bounded:
        raise ValueError("stability experiment needs continuous bounded members")
    if query is None:
        query = query_lattice(config.dist.bounding_box(), config.query_size)
    big = draw_sample(config.dist, config.n_ref, _ref_seed(config))
    ref_mask = integral_region_mask(big, config.alpha, family, query, 0.0)
    rows = _replicate(_stability_rep, config, (family, query, ref_mask), sink)
    return _report(config, rows, {"reference_members": int(ref_mask.sum()), "grid_points": int(query.shape[0])})


# -- registry ----------------------------------------------------------------

EXPERIMENTS = {
    "consistency": region_consistency_experiment,
    "sequence": trimmed_sequence_experiment,
    "ladder": ladder_experiment,
    "gc": gc_experiment,
    "integral-stability": integral_stability_experiment,
}

_UNIT_SQUARE = {"kind": "uniform-box", "params": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]}}
_UNIT_LINE = {"kind": "uniform-box", "params": {"lo": [0.0], "hi": [1.0]}}
_HALF_DENSITY = {"form": "indicator", "params": {"value": 2.0, "lo": None, "hi": [0.5]}}

_DEFAULTS = {
    "consistency": {"dist": _UNIT_SQUARE, "n_schedule": [100, 400, 1600, 6400]},
    "sequence": {"dist": _UNIT_LINE, "n_schedule": [100, 400, 1600, 6400], "density": _HALF_DENSITY},
    "ladder": {"dist": _UNIT_LINE, "n_schedule": [1000, 100000], "density": _HALF_DENSITY},
    "gc": {"dist": _UNIT_SQUARE, "n_schedule": [100, 1000, 10000, 100000], "family": "clipped-16"},
    "integral-stability": {"dist": _UNIT_SQUARE, "n_schedule": [200, 800, 3200], "family": "clipped-axes"},
}


def default_config(name: str, **overrides) -> ExperimentConfig:
    """The built-in configuration for an experiment, with optional overrides."""
    if name not in _DEFAULTS:
        raise ValueError(f"unknown experiment {name!r}; expected one of {sorted(_DEFAULTS)}")
    base = {"experiment": name, **_DEFAULTS[name], **overrides}
    base["dist"] = DistributionSpec.from_dict(base["dist"]) if isinstance(base["dist"], dict) else base["dist"]
    dens = base.get("density")
    if isinstance(dens, dict):
        base["density"] = DensityFn.from_dict(dens)
    base["n_schedule"] = tuple(base["n_schedule"])
    return ExperimentConfig(**base)


def run_experiment(config: ExperimentConfig, sink: list | None = None) -> ConvergenceReport:
    return EXPERIMENTS[config.experiment](config, sink=sink)
