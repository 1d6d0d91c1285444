"""Discrete measures on R^n with growth verification over a dyadic scale window.

A measure here is a finite list of weighted point masses standing in for a
Borel measure sampled at resolution 2**-J.  Point masses cannot satisfy
mu(B(x,r)) <= C * r**m as r -> 0, so every growth and kernel computation in
this package is restricted to the declared window of radii [2**-J, 2**s].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "PowerBoundReport",
    "ball_mass",
    "power_bound_report",
    "uniform_measure",
    "cantor_measure",
    "random_measure",
    "measure_to_json",
    "measure_from_json",
    "save_measure",
    "load_measure",
]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many weighted point masses.

    ``window`` is the exponent pair (-J, s): the measure is meant to emulate
    the upper growth bound mu(B(x,r)) <= C * r**m for radii in [2**-J, 2**s].
    """

    points: np.ndarray  # (N, n)
    masses: np.ndarray  # (N,)
    m: float
    J: int
    s: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        ms = np.asarray(self.masses, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", ms)
        if pts.shape[0] == 0:
            raise ValueError("measure needs at least one atom")
        if ms.shape[0] != pts.shape[0]:
            raise ValueError("masses must align with points")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(ms)):
            raise ValueError("points and masses must be finite")
        if not np.all(ms > 0):
            raise ValueError("every mass must be positive")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("atoms must be pairwise distinct")
        if self.m <= 0:
            raise ValueError("growth exponent m must be positive")
        if self.J < 0 or self.s < 0:
            raise ValueError("window exponents must satisfy J >= 0 and s >= 0")

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def window(self) -> tuple[int, int]:
        return (-self.J, self.s)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def scaled(self, factor: float) -> "DiscreteMeasure":
        """Same atoms with all masses multiplied by ``factor``."""
        return DiscreteMeasure(self.points.copy(), self.masses * factor, self.m, self.J, self.s)


@dataclass(frozen=True)
class PowerBoundReport:
    """Largest sampled ratio mu(B(x,r)) / r**m inside the scale window."""

    constant: float
    witnesses: list  # (center tuple, radius, ratio), near-maximal first
    samples: int


def ball_mass(mu: DiscreteMeasure, center, radius: float, closed: bool = False) -> float:
    """Mass of the Euclidean ball B(center, radius); open by default."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float).reshape(1, -1)
    d = np.linalg.norm(mu.points - c, axis=1)
    inside = d <= radius if closed else d < radius
    return float(mu.masses[inside].sum())


def power_bound_report(
    mu: DiscreteMeasure, samples_per_scale: int = 1, max_witnesses: int = 5
) -> PowerBoundReport:
    """Scan mu(B(x,r))/r^m over atom centers and log-spaced window radii.

    Radii run from 2**-J to 2**s with ``samples_per_scale`` log-uniform
    subdivisions per octave; centers are the atoms themselves (the ratio peaks
    near mass concentrations, and atom centers keep the scan deterministic).
    """
    if samples_per_scale < 1:
        raise ValueError("samples_per_scale must be >= 1")
    radii = [
        2.0 ** (e + j / samples_per_scale)
        for e in range(-mu.J, mu.s)
        for j in range(samples_per_scale)
    ]
    radii.append(2.0**mu.s)

    diffs = mu.points[:, None, :] - mu.points[None, :, :]
    dist = np.sqrt((diffs * diffs).sum(axis=2))
    records = []
    best = 0.0
    for r in radii:
        ratios = ((dist < r) @ mu.masses) / r**mu.m
        best = max(best, float(ratios.max()))
        for i in np.argsort(ratios)[-max_witnesses:]:
            records.append((tuple(mu.points[i]), r, float(ratios[i])))
    records.sort(key=lambda rec: -rec[2])
    return PowerBoundReport(
        constant=best,
        witnesses=records[:max_witnesses],
        samples=mu.size * len(radii),
    )


# ---------------------------------------------------------------------------
# generators


def uniform_measure(n_atoms: int, s: int = 0, m: float = 1.0) -> DiscreteMeasure:
    """Equally spaced unit-interval atoms k/N with mass 1/N each."""
    if n_atoms < 1:
        raise ValueError("need at least one atom")
    J = max(0, math.ceil(math.log2(n_atoms))) if n_atoms > 1 else 0
    pts = (np.arange(n_atoms, dtype=float) / n_atoms).reshape(-1, 1)
    masses = np.full(n_atoms, 1.0 / n_atoms)
    return DiscreteMeasure(pts, masses, m=m, J=J, s=s)


def cantor_measure(level: int, base: int = 3, s: int = 0) -> DiscreteMeasure:
    """Two-branch Cantor iterate: midpoints of the 2**level surviving intervals.

    At each step the first and last of ``base`` subintervals survive, so the
    natural growth exponent is m = log 2 / log base.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    if base < 3:
        raise ValueError("base must be >= 3")
    positions = np.zeros(1)
    width = 1.0
    for _ in range(level):
        width /= base
        positions = np.concatenate([positions, positions + (base - 1) * width])
    positions = np.sort(positions) + width / 2.0
    masses = np.full(positions.size, 2.0**-level)
    m = math.log(2.0) / math.log(base)
    J = math.ceil(level * math.log2(base))
    return DiscreteMeasure(positions.reshape(-1, 1), masses, m=m, J=J, s=s)


def random_measure(n_atoms: int, J: int, seed: int, s: int = 0, m: float = 1.0) -> DiscreteMeasure:
    """Random 1-D atoms kept >= 2**-J apart so every fine cube is a singleton.

    Atoms are jittered centers of distinct cells of width 2**-(J-1); the
    jitter stays within the middle half of each cell, so any two atoms are at
    least 2**-J apart in every translate of the dyadic lattice.
    """
    if J < 1:
        raise ValueError("J must be >= 1 for the separation construction")
    cells = 2 ** (J - 1)
    if n_atoms > cells:
        raise ValueError("too many atoms for the requested resolution")
    rng = np.random.Generator(np.random.Philox(seed))
    idx = np.sort(rng.choice(cells, size=n_atoms, replace=False))
    offs = rng.uniform(0.25, 0.75, size=n_atoms)
    pts = ((idx + offs) * 2.0 ** -(J - 1)).reshape(-1, 1)
    masses = rng.uniform(0.5, 1.5, size=n_atoms)
    masses /= masses.sum()
    return DiscreteMeasure(pts, masses, m=m, J=J, s=s)


# ---------------------------------------------------------------------------
# JSON round trip: {"n": int, "m": float, "window": [-J, s], "atoms": [[x..., mass], ...]}


def measure_to_json(mu: DiscreteMeasure) -> dict:
    atoms = [[*map(float, p), float(w)] for p, w in zip(mu.points, mu.masses)]
    return {"n": mu.n, "m": mu.m, "window": [-mu.J, mu.s], "atoms": atoms}


def measure_from_json(obj: dict) -> DiscreteMeasure:
    n = int(obj["n"])
    atoms = np.asarray(obj["atoms"], dtype=float)
    if atoms.ndim != 2 or atoms.shape[1] != n + 1:
        raise ValueError("atoms must be rows [x_1..x_n, mass]")
    neg_j, s = obj["window"]
    return DiscreteMeasure(atoms[:, :n], atoms[:, n], m=float(obj["m"]), J=-int(neg_j), s=int(s))


def save_measure(mu: DiscreteMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(mu), fh)


def load_measure(path) -> DiscreteMeasure:
    with open(path) as fh:
        return measure_from_json(json.load(fh))
