"""One-dimensional element meshes with bisection refinement."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .quadrature import QuadratureRule


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing element boundaries x_0 < ... < x_N.

    Immutable; ``refine`` and ``coarsen`` return new meshes.
    """

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("a mesh needs at least two boundaries")
        if not np.all(np.isfinite(b)):
            raise ValueError("mesh boundaries must be finite")
        if np.any(np.diff(b) <= 0):
            raise ValueError("mesh boundaries must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)

    @property
    def a(self) -> float:
        return float(self.boundaries[0])

    @property
    def b(self) -> float:
        return float(self.boundaries[-1])

    @property
    def n_elements(self) -> int:
        return self.boundaries.size - 1

    @property
    def jacobians(self) -> np.ndarray:
        return np.diff(self.boundaries) / 2.0

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def __len__(self):
        return self.n_elements

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return np.array_equal(self.boundaries, other.boundaries)

    def __repr__(self):
        return f"Mesh(n_elements={self.n_elements}, domain=[{self.a:g}, {self.b:g}])"

    def quadrature_positions(self, rule: QuadratureRule) -> np.ndarray:
        """Global Gauss point positions, shape (N_el, Q): x_n + J_n (1 + xi_q)."""
        return self.boundaries[:-1, None] + self.jacobians[:, None] * (1.0 + rule.nodes[None, :])

    def element_of(self, x) -> np.ndarray:
        """Index of the element containing each x (right end maps to the last element)."""
        idx = np.searchsorted(self.boundaries, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)

    def node_index(self, x: float, tol: float = 1e-12) -> int:
        """Index of the boundary equal to x within tol; ValueError if none."""
        i = int(np.argmin(np.abs(self.boundaries - x)))
        if abs(self.boundaries[i] - x) > tol * max(1.0, abs(x)):
            raise ValueError(f"x={x} is not an element boundary of {self!r}")
        return i

    def to_text(self) -> str:
        return "".join(f"{x:.17g}\n" for x in self.boundaries)

    @classmethod
    def from_text(cls, text: str) -> "Mesh":
        return cls(np.array([float(line) for line in text.split() if line.strip()]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Mesh":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class ElementPoints:
    index: int
    left: float
    right: float
    jacobian: float
    positions: np.ndarray


def uniform_mesh(a: float, b: float, n_elements: int) -> Mesh:
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if isinstance(n_elements, bool) or int(n_elements) != n_elements or n_elements < 1:
        raise ValueError(f"need a positive element count, got {n_elements!r}")
    return Mesh(np.linspace(a, b, int(n_elements) + 1))


def element_points(mesh: Mesh, rule: QuadratureRule) -> list[ElementPoints]:
    xq = mesh.quadrature_positions(rule)
    jac = mesh.jacobians
    bnd = mesh.boundaries
    return [
        ElementPoints(n, float(bnd[n]), float(bnd[n + 1]), float(jac[n]), xq[n])
        for n in range(mesh.n_elements)
    ]


def refine(mesh: Mesh, marks: Iterable[int]) -> Mesh:
    """Bisect every marked element."""
    marks = set(int(m) for m in marks)
    bad = [m for m in marks if not 0 <= m < mesh.n_elements]
    if bad:
        raise ValueError(f"element indices out of range: {sorted(bad)}")
    b = mesh.boundaries
    mids = [(b[m] + b[m + 1]) / 2.0 for m in sorted(marks)]
    return Mesh(np.sort(np.concatenate([b, mids])))


def coarsen(mesh: Mesh, pairs: Iterable) -> Mesh:
    """Merge each marked pair of adjacent elements into one.

    A pair may be given as ``(i, i + 1)`` or as the left index ``i``.
    """
    lefts = []
    for p in pairs:
        if isinstance(p, (tuple, list)):
            if len(p) != 2 or int(p[1]) != int(p[0]) + 1:
                raise ValueError(f"pair {p!r} is not two adjacent elements")
            p = p[0]
        lefts.append(int(p))
    used: set[int] = set()
    for i in lefts:
        if not 0 <= i < mesh.n_elements - 1:
            raise ValueError(f"pair starting at {i} out of range")
        if i in used or i + 1 in used:
            raise ValueError(f"pair starting at {i} overlaps another pair")
        used.update((i, i + 1))
    drop = [i + 1 for i in lefts]
    return Mesh(np.delete(mesh.boundaries, drop))
