"""Randomly shifted dyadic grids, cube geometry, and good/bad classification.

Convention: a grid covers generations g in [-s, J] (side length 2**-g).  The
translation of a generation-g cube uses only the shift bits w_i with
2**-i < 2**-g, i.e. i in (g, J]; bits below resolution 2**-J are dropped, so
the finest cubes coincide with the standard lattice and the family stays a
genuine nested dyadic system.  A cube is addressed by its integer corner in
shifted coordinates: the real lower-left corner is corner * 2**-g + shift(g).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "ShiftedGrid",
    "DyadicCube",
    "CubeIndex",
    "goodness_exponent",
    "sample_grid",
    "cube_geometry",
    "is_good",
    "pi_good",
    "pi_good_by_generation",
    "badness_union_bound",
    "auto_r",
    "good_shift_bits",
]


def goodness_exponent(alpha: float, m: float) -> float:
    """The separation exponent alpha / (2m + 2*alpha) used by goodness."""
    return alpha / (2.0 * m + 2.0 * alpha)


def badness_union_bound(r: int, gamma: float, scales: int | None = None) -> float:
    """Upper bound on the probability that a cube is bad.

    Summing, over each coarse scale offset k >= r, the fraction of lattice
    positions within 2**(k*(1-gamma)) of a boundary gives the union bound
    sum_k 2*(floor(2**(k(1-gamma))) + 1) / 2**k.  With ``scales=None`` the
    closed-form majorant 2*2**(-r*gamma)/(1 - 2**-gamma) + 2**(2-r) of the
    full series is returned.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if scales is None:
        return 2.0 * 2.0 ** (-r * gamma) / (1.0 - 2.0**-gamma) + 2.0 ** (2 - r)
    total = 0.0
    for k in range(r, scales + 1):
        hits = 2.0 * (math.floor(2.0 ** (k * (1.0 - gamma))) + 1.0)
        total += min(1.0, hits / 2.0**k)
    return min(1.0, total)


def auto_r(gamma: float) -> int:
    """Smallest r with 2**(r(1-gamma)) >= 3 and series union bound < 1."""
    r = 1
    while 2.0 ** (r * (1.0 - gamma)) < 3.0 or badness_union_bound(r, gamma) >= 1.0:
        r += 1
        if r > 64:
            raise ValueError("no feasible r below 64 for this gamma")
    return r


class ShiftedGrid:
    """A randomly translated dyadic grid over generations [-s, J].

    ``bits`` has one row per stored scale i in (-s, J], row index i + s - 1.
    ``r`` and ``gamma`` parametrize good/bad classification; gamma should be
    alpha/(2m+2alpha) for the ambient kernel and measure exponents.
    """

    def __init__(self, n, s, J, r, gamma, bits, seed=None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if s < 0 or J < 0:
            raise ValueError("window exponents must satisfy s >= 0 and J >= 0")
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if r < 1 or 2.0 ** (r * (1.0 - gamma)) < 3.0:
            raise ValueError("need r >= 1 with 2**(r*(1-gamma)) >= 3")
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape != (J + s, n) or not np.isin(bits, (0, 1)).all():
            raise ValueError(f"bits must be a 0/1 array of shape ({J + s}, {n})")
        self.n = int(n)
        self.s = int(s)
        self.J = int(J)
        self.r = int(r)
        self.gamma = float(gamma)
        self.bits = bits
        self.seed = seed
        # shift per generation, finest (zero) to coarsest; row index g + s
        shifts = np.zeros((J + s + 1, n))
        for g in range(J - 1, -s - 1, -1):
            shifts[g + s] = shifts[g + s + 1] + 2.0 ** -(g + 1) * bits[g + s]
        self._shifts = shifts

    @classmethod
    def sample(cls, seed, n, s, J, r, gamma):
        rng = np.random.Generator(np.random.Philox(seed))
        bits = rng.integers(0, 2, size=(J + s, n))
        return cls(n, s, J, r, gamma, bits, seed=seed)

    @classmethod
    def standard(cls, n, s, J, r, gamma):
        """The unshifted grid D_0 (all bits zero); debugging constructor."""
        return cls(n, s, J, r, gamma, np.zeros((J + s, n), dtype=np.int64))

    @property
    def generations(self) -> range:
        return range(-self.s, self.J + 1)

    def bit(self, i: int) -> np.ndarray:
        """Shift bit w_i, valid for i in (-s, J]."""
        if not (-self.s < i <= self.J):
            raise ValueError("bit index outside stored range")
        return self.bits[i + self.s - 1]

    def shift(self, g: int) -> np.ndarray:
        """Translation applied to generation-g cubes."""
        if g not in self.generations:
            raise ValueError("generation outside grid window")
        return self._shifts[g + self.s]

    def cube(self, g: int, corner) -> "DyadicCube":
        if g not in self.generations:
            raise ValueError("generation outside grid window")
        return DyadicCube(self, int(g), tuple(int(c) for c in np.atleast_1d(corner)))

    def finest_label(self, points: np.ndarray) -> np.ndarray:
        """Integer corners of the finest cubes containing each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.floor(pts * 2.0**self.J).astype(np.int64)

    def coarsen_label(self, labels: np.ndarray, g: int) -> np.ndarray:
        """Corner of the parent at generation g-1 given corners at g."""
        w = self.bit(g)
        return (labels - w) >> 1

    def cube_containing(self, g: int, point) -> "DyadicCube":
        lab = self.finest_label(np.asarray(point, dtype=float).reshape(1, -1))
        for gg in range(self.J, g, -1):
            lab = self.coarsen_label(lab, gg)
        return self.cube(g, lab[0])

    def to_json(self, include_bits: bool = False) -> dict:
        obj = {"n": self.n, "s": self.s, "J": self.J, "r": self.r,
               "gamma": self.gamma, "seed": self.seed}
        if include_bits:
            obj["bits"] = self.bits.tolist()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "ShiftedGrid":
        if "bits" in obj:
            return cls(obj["n"], obj["s"], obj["J"], obj["r"], obj["gamma"],
                       np.asarray(obj["bits"]), seed=obj.get("seed"))
        if obj.get("seed") is None:
            raise ValueError("grid descriptor needs a seed or explicit bits")
        return cls.sample(obj["seed"], obj["n"], obj["s"], obj["J"], obj["r"], obj["gamma"])

    def save(self, path, include_bits: bool = True) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(include_bits=include_bits), fh)


def sample_grid(seed, n, s, J, r, gamma) -> ShiftedGrid:
    """Draw the shift bits of a grid from a counter-based generator."""
    return ShiftedGrid.sample(seed, n, s, J, r, gamma)


@dataclass(frozen=True)
class DyadicCube:
    """One cube of a shifted grid: generation g and integer corner."""

    grid: ShiftedGrid
    g: int
    corner: tuple

    @property
    def side(self) -> float:
        return 2.0**-self.g

    @property
    def generation(self) -> int:
        return self.g

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.corner, dtype=float) * self.side + self.grid.shift(self.g)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    @property
    def center(self) -> np.ndarray:
        return self.lo + self.side / 2.0

    def box(self):
        return self.lo, self.hi

    def carleson_box(self):
        """Space-time box Q x (0, side)."""
        return self.box(), (0.0, self.side)

    def whitney_region(self):
        """Space-time band Q x (side/2, side)."""
        return self.box(), (self.side / 2.0, self.side)

    def parent(self) -> "DyadicCube":
        if self.g - 1 < -self.grid.s:
            raise ValueError("no parent inside the grid window")
        w = self.grid.bit(self.g)
        corner = tuple((c - int(b)) >> 1 for c, b in zip(self.corner, w))
        return DyadicCube(self.grid, self.g - 1, corner)

    def ancestor(self, k: int) -> "DyadicCube":
        """The cube k generations up; exists iff g - k >= -s."""
        if k < 0:
            raise ValueError("k must be nonnegative")
        cube = self
        for _ in range(k):
            cube = cube.parent()
        return cube

    def children(self) -> list:
        if self.g + 1 > self.grid.J:
            raise ValueError("no children below the grid window")
        w = self.grid.bit(self.g + 1)
        base = [2 * c + int(b) for c, b in zip(self.corner, w)]
        kids = []
        for mask in range(2**self.grid.n):
            corner = tuple(base[j] + ((mask >> j) & 1) for j in range(self.grid.n))
            kids.append(DyadicCube(self.grid, self.g + 1, corner))
        return kids

    def contains_point(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p < self.hi))

    def __repr__(self):
        return f"Q(g={self.g}, corner={self.corner})"


def cube_geometry(Q: DyadicCube):
    """Spatial box, Carleson time interval (0, l), Whitney interval (l/2, l)."""
    return Q.box(), (0.0, Q.side), (Q.side / 2.0, Q.side)


def is_good(Q: DyadicCube) -> bool:
    """Whether Q keeps distance > side(Q)^gamma * side(Qt)^(1-gamma) from the
    boundaries of every grid cube Qt with side >= 2**r * side(Q) inside the
    window.  Distances reduce to integer arithmetic on corner offsets.
    """
    grid, g = Q.grid, Q.g
    corner = np.asarray(Q.corner, dtype=np.int64)
    x = np.zeros(grid.n, dtype=np.int64)
    for k in range(1, g + grid.s + 1):
        x += (1 << (k - 1)) * grid.bit(g - k + 1)
        if k < grid.r:
            continue
        m_cells = 1 << k
        p = (corner - x) % m_cells
        d = np.minimum(p, m_cells - 1 - p)  # in units of side(Q)
        if d.min() <= 2.0 ** (k * (1.0 - grid.gamma)):
            return False
    return True


@lru_cache(maxsize=None)
def _good_fraction_exact(bits: int, r: int, gamma: float, corner: int) -> float:
    """Fraction of coarse-bit patterns making a 1-D cube good over ``bits``
    coarse scales; the corner drops out (the offset map is a bijection)."""
    if bits < r:
        return 1.0
    x = np.arange(1 << bits, dtype=np.int64)
    good = np.ones(x.size, dtype=bool)
    for k in range(r, bits + 1):
        m_cells = 1 << k
        p = (corner - x) % m_cells
        good &= np.minimum(p, m_cells - 1 - p) > 2.0 ** (k * (1.0 - gamma))
    return float(good.mean())


def pi_good(
    n: int,
    r: int,
    gamma: float,
    depth_budget: int,
    mode: str = "exact",
    seed: int = 0,
    trials: int = 100_000,
    corner=0,
):
    """Probability that a random translate of a cube is good.

    ``depth_budget`` counts the coarse scales above the cube inside the
    window (generation of the cube plus the top exponent s).  Exact mode
    enumerates all shift-bit patterns and needs n * depth_budget <= 24 bits;
    montecarlo draws patterns from a counter-based generator.  Returns
    (estimate, standard_error); exact results carry stderr 0.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if depth_budget < 0:
        raise ValueError("depth_budget must be nonnegative")
    corners = np.broadcast_to(np.asarray(corner, dtype=np.int64).ravel(), (n,)) \
        if np.ndim(corner) else np.full(n, int(corner), dtype=np.int64)
    if mode == "exact":
        if n * depth_budget > 24:
            raise ValueError("exact enumeration budget exceeded (n * depth_budget > 24)")
        est = 1.0
        for j in range(n):
            est *= _good_fraction_exact(depth_budget, r, gamma, int(corners[j]))
        return est, 0.0
    if mode != "montecarlo":
        raise ValueError("mode must be 'exact' or 'montecarlo'")
    if depth_budget < r:
        return 1.0, 0.0
    rng = np.random.Generator(np.random.Philox(seed))
    good = np.ones(trials, dtype=bool)
    for j in range(n):
        x = rng.integers(0, 1 << depth_budget, size=trials, dtype=np.int64)
        cgood = np.ones(trials, dtype=bool)
        for k in range(r, depth_budget + 1):
            m_cells = 1 << k
            p = (corners[j] - x) % m_cells
            cgood &= np.minimum(p, m_cells - 1 - p) > 2.0 ** (k * (1.0 - gamma))
        good &= cgood
    est = float(good.mean())
    stderr = math.sqrt(max(est * (1.0 - est), 1e-12) / trials)
    return est, stderr


def pi_good_by_generation(grid: ShiftedGrid) -> dict:
    """Exact goodness probability per generation of the grid window."""
    out = {}
    for g in grid.generations:
        budget = g + grid.s
        out[g], _ = pi_good(grid.n, grid.r, grid.gamma, budget, mode="exact")
    return out


def good_shift_bits(n: int, s: int, J: int, g: int, corner) -> np.ndarray:
    """Shift bits that keep the cube at (g, corner) mid-cell at every coarse
    scale, so it is good whenever 2**(r*gamma) > 3.

    The offset of the cube from the coarse lattice is steered to the
    alternating-bit pattern 0b...0101, i.e. roughly a third of each coarse
    cell.  Bits finer than 2**-g are zero.  Useful for pinning deterministic
    deep ancestor stacks in diagnostics; sampled grids only contain such
    cubes with probability pi_good.
    """
    corner = np.atleast_1d(np.asarray(corner, dtype=np.int64))
    if corner.shape != (n,):
        raise ValueError("corner must have one entry per dimension")
    depth = g + s
    bits = np.zeros((J + s, n), dtype=np.int64)
    third = 0
    for j in range(0, depth, 2):
        third += 1 << j
    for j in range(n):
        x = (int(corner[j]) - third) % (1 << depth) if depth > 0 else 0
        for k in range(depth):  # bit of scale i = g - k is digit k of x
            bits[g - k + s - 1, j] = (x >> k) & 1
    return bits


class CubeIndex:
    """Atom-to-cube assignment for one (grid, measure) pair.

    Corner labels are derived once at the finest generation and coarsened by
    the exact integer parent map, so nesting is consistent by construction.
    """

    def __init__(self, grid: ShiftedGrid, mu):
        self.grid = grid
        self.mu = mu
        labels = grid.finest_label(mu.points)
        self._labels = {grid.J: labels}
        for g in range(grid.J, -grid.s, -1):
            labels = grid.coarsen_label(labels, g)
            self._labels[g - 1] = labels
        self._groups = {}
        self._children = {}
        for g in grid.generations:
            groups = {}
            for i, row in enumerate(self._labels[g]):
                groups.setdefault(tuple(int(v) for v in row), []).append(i)
            self._groups[g] = {c: np.asarray(ix, dtype=np.intp) for c, ix in groups.items()}
        for g in grid.generations:
            if g == -grid.s:
                continue
            kids = {}
            for c in self._groups[g]:
                parent = tuple(
                    int(v) for v in self.grid.coarsen_label(np.asarray(c, dtype=np.int64), g)
                )
                kids.setdefault(parent, []).append(c)
            self._children[g - 1] = kids

    def label_of_atom(self, g: int, i: int) -> tuple:
        return tuple(int(v) for v in self._labels[g][i])

    def corners_at(self, g: int) -> list:
        return sorted(self._groups[g])

    def cubes_at(self, g: int) -> list:
        return [self.grid.cube(g, c) for c in self.corners_at(g)]

    def atoms_in(self, cube_or_g, corner=None) -> np.ndarray:
        if corner is None:
            g, corner = cube_or_g.g, cube_or_g.corner
        else:
            g = cube_or_g
        return self._groups[g].get(tuple(corner), np.empty(0, dtype=np.intp))

    def children_of(self, cube: DyadicCube) -> list:
        """Occupied children of ``cube`` (mass may still be zero only if the
        measure had zero masses, which the measure type forbids)."""
        corners = self._children.get(cube.g, {}).get(cube.corner, [])
        return [self.grid.cube(cube.g + 1, c) for c in sorted(corners)]

    def mass(self, cube: DyadicCube) -> float:
        idx = self.atoms_in(cube)
        return float(self.mu.masses[idx].sum()) if idx.size else 0.0

    def top_cubes(self) -> list:
        return self.cubes_at(-self.grid.s)
