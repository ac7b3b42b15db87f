"""Finite function families generating integral trimmed regions.

Every member comes from a small catalogue so that families serialise
cleanly and carry a declared envelope:

========== ============================================ ====================
kind       value                                        envelope
========== ============================================ ====================
linear     <u, x>                                       ||u|| * ||x||
clipped    min(max(<u, x>, lo), hi)                     max(|lo|, |hi|)
bump       exp(-||x - c||^2 / s)                        1
========== ============================================ ====================
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measure import as_sample

__all__ = ["CATALOG", "FunctionFamily", "Member", "make_family", "clipped_family"]

_KINDS = ("linear", "clipped", "bump")


@dataclass(frozen=True)
class Member:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown member kind {self.kind!r}")
        p = dict(self.params)
        if self.kind in ("linear", "clipped"):
            p["u"] = [float(v) for v in np.atleast_1d(p["u"])]
        if self.kind == "clipped":
            p["lo"], p["hi"] = float(p["lo"]), float(p["hi"])
            if p["lo"] > p["hi"]:
                raise ValueError("clipped member needs lo <= hi")
        if self.kind == "bump":
            p["center"] = [float(v) for v in np.atleast_1d(p["center"])]
            p["scale"] = float(p["scale"])
            if p["scale"] <= 0:
                raise ValueError("bump scale must be positive")
        object.__setattr__(self, "params", p)

    @property
    def bounded(self) -> bool:
        return self.kind != "linear"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = as_sample(x)
        p = self.params
        if self.kind == "linear":
            return x @ np.asarray(p["u"])
        if self.kind == "clipped":
            return np.clip(x @ np.asarray(p["u"]), p["lo"], p["hi"])
        diff = x - np.asarray(p["center"])
        return np.exp(-np.einsum("ij,ij->i", diff, diff) / p["scale"])

    def envelope(self, x: np.ndarray) -> np.ndarray:
        x = as_sample(x)
        p = self.params
        if self.kind == "linear":
            return np.linalg.norm(p["u"]) * np.linalg.norm(x, axis=1)
        if self.kind == "clipped":
            return np.full(x.shape[0], max(abs(p["lo"]), abs(p["hi"])))
        return np.ones(x.shape[0])

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass(frozen=True)
class FunctionFamily:
    members: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def continuous_bounded(self) -> bool:
        return all(m.bounded for m in self.members)

    def values(self, x: np.ndarray) -> np.ndarray:
        """Member values, shape ``(len(x), len(self))``."""
        x = as_sample(x)
        if not self.members:
            return np.zeros((x.shape[0], 0))
        return np.column_stack([m(x) for m in self.members])

    def envelope(self, x: np.ndarray) -> np.ndarray:
        x = as_sample(x)
        if not self.members:
            return np.zeros(x.shape[0])
        return np.max(np.column_stack([m.envelope(x) for m in self.members]), axis=1)

    def envelope_holds(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        """Spot-check ``|f| <= envelope`` on the given points."""
        if not self.members:
            return True
        return bool(np.all(np.abs(self.values(x)) <= self.envelope(x)[:, None] + tol))

    def to_dict(self) -> dict:
        return {"name": self.name, "members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, data: dict) -> "FunctionFamily":
        members = []
        for item in data["members"]:
            item = dict(item)
            kind = item.pop("kind")
            members.append(Member(kind, item))
        return cls(tuple(members), data.get("name", "custom"))


def _axis_directions(d: int) -> np.ndarray:
    eye = np.eye(d)
    return np.vstack([eye, -eye])


def _circle_directions(m: int) -> np.ndarray:
    t = 2 * np.pi * np.arange(m) / m
    return np.column_stack([np.cos(t), np.sin(t)])


def clipped_family(directions, center, floor: float, cap: float, name: str = "clipped") -> FunctionFamily:
    """Clipped projections ``clip(<u, x - center>, floor, cap)``.

    The offset by ``center`` is folded into ``lo`` and ``hi``; shifting a
    member by a constant leaves the generated region unchanged.
    """
    center = np.asarray(center, dtype=float)
    members = []
    for u in np.atleast_2d(np.asarray(directions, dtype=float)):
        shift = float(u @ center)
        members.append(Member("clipped", {"u": u, "lo": floor + shift, "hi": cap + shift}))
    return FunctionFamily(tuple(members), name)


def _linear(directions, name):
    return FunctionFamily(tuple(Member("linear", {"u": u}) for u in directions), name)


def _bumps(center, scale, d, name):
    offsets = np.vstack([np.zeros(d), 0.5 * scale * _axis_directions(d)])
    return FunctionFamily(
        tuple(Member("bump", {"center": center + o, "scale": float(scale) ** 2}) for o in offsets), name
    )


CATALOG = {
    "linear-axes": "linear functionals <±e_j, x>",
    "linear-8": "linear functionals along 8 equally spaced directions (2-D only)",
    "clipped-axes": "projections on ±e_j about the data centre, clipped to [-0.1 s, 0.4 s]",
    "clipped-8": "8 equally spaced clipped projections (2-D only), same clipping",
    "clipped-16": "16 equally spaced clipped projections (2-D only), same clipping",
    "bumps": "Gaussian bumps at the data centre and at ±s/2 along each axis",
}


def make_family(name: str, sample: np.ndarray) -> FunctionFamily:
    """Build a catalogue family scaled to the bounding box of ``sample``.

    ``s`` is the largest half-width of the bounding box and the centre is
    the box midpoint.
    """
    sample = as_sample(sample)
    if name not in CATALOG:
        raise KeyError(name)
    d = sample.shape[1]
    lo, hi = sample.min(axis=0), sample.max(axis=0)
    center = (lo + hi) / 2
    s = float(np.max(hi - lo)) / 2 or 1.0
    if name.endswith(("-8", "-16")) and d != 2:
        raise ValueError(f"family {name!r} needs 2-D data")
    if name == "linear-axes":
        return _linear(_axis_directions(d), name)
    if name == "linear-8":
        return _linear(_circle_directions(8), name)
    if name == "clipped-axes":
        return clipped_family(_axis_directions(d), center, -0.1 * s, 0.4 * s, name)
    if name in ("clipped-8", "clipped-16"):
        return clipped_family(_circle_directions(int(name.split("-")[1])), center, -0.1 * s, 0.4 * s, name)
    return _bumps(center, s, d, name)
