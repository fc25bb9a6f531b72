"""Closed sets with computable projections, distances, and normal cones.

Each set works on flat 1-d points; matrix-valued sets store the matrix
shape and reshape internally (row-major), so the Frobenius geometry of a
matrix variable coincides with the Euclidean geometry of its flattening.

``normal_cone`` returns a small description object that can measure the
distance from a unit vector to the cone, report whether the cone is a
linear subspace (and give an orthonormal basis when it is), and produce
deterministic unit samples for the regularity analyzer.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import orthonormal_basis, pseudo_inverse, sphere_lattice

__all__ = [
    "MembershipError",
    "ProjectionTieBreakError",
    "DegenerateProjectionWarning",
    "SubspaceCone",
    "RayCone",
    "RaySpanCone",
    "SymmetricConjugationCone",
    "ProductCone",
    "normal_cone_distance",
    "ProjectableSet",
    "AffineSubspace",
    "DiagonalLift",
    "ProductSet",
    "Translate",
    "LinfBall",
    "OrthonormalRows",
    "RowSpace",
    "Sphere",
]

#: Relative membership tolerance: x belongs to S when dist(x, S) <= rtol * (1 + |x|).
MEMBERSHIP_RTOL = 1e-9

_PRIMES = (1, 3, 5, 7, 11, 13, 17, 19, 23, 29)


class MembershipError(ValueError):
    """An operation that needs a point of the set received one outside it."""


class ProjectionTieBreakError(RuntimeError):
    """A projection is multivalued and no tie-break rule was configured."""


class DegenerateProjectionWarning(UserWarning):
    """A nearest-point problem had multiple solutions; a representative was chosen."""


# ---------------------------------------------------------------------------
# Normal-cone descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubspaceCone:
    """Linear subspace spanned by orthonormal columns of ``basis``."""

    basis: np.ndarray
    base_point: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def distance(self, v) -> float:
        vec = np.asarray(v, dtype=float)
        if self.basis.shape[1] == 0:
            return float(np.linalg.norm(vec))
        return float(np.linalg.norm(vec - self.basis @ (self.basis.T @ vec)))

    def as_subspace_basis(self):
        return self.basis

    def unit_samples(self, count: int) -> np.ndarray:
        if self.basis.shape[1] == 0:
            return np.zeros((0, self.dim))
        coeff = sphere_lattice(count, self.basis.shape[1])
        dirs = coeff @ self.basis.T
        return np.vstack([dirs, -dirs])


@dataclass(frozen=True, eq=False)
class RayCone:
    """Nonnegative span of a single unit direction, or its full line."""

    direction: np.ndarray
    base_point: np.ndarray
    two_sided: bool = False

    @property
    def dim(self) -> int:
        return self.direction.shape[0]

    def distance(self, v) -> float:
        vec = np.asarray(v, dtype=float)
        coef = float(self.direction @ vec)
        if not self.two_sided:
            coef = max(coef, 0.0)
        return float(np.linalg.norm(vec - coef * self.direction))

    def as_subspace_basis(self):
        if self.two_sided:
            return self.direction[:, None]
        return None

    def unit_samples(self, count: int) -> np.ndarray:
        if self.two_sided:
            return np.vstack([self.direction, -self.direction])
        return self.direction[None, :]


@dataclass(frozen=True, eq=False)
class RaySpanCone:
    """Nonnegative combinations of signed coordinate rays.

    ``signs[i] == +1`` allows arbitrary nonnegative i-th coordinates,
    ``-1`` arbitrary nonpositive ones, and ``0`` pins the coordinate to
    zero.  The generators are orthogonal, so the distance splits per
    coordinate and is exact.
    """

    signs: np.ndarray
    base_point: np.ndarray

    @property
    def dim(self) -> int:
        return self.signs.shape[0]

    def distance(self, v) -> float:
        vec = np.asarray(v, dtype=float)
        residual = np.where(self.signs * vec > 0.0, 0.0, vec)
        return float(np.linalg.norm(residual))

    def as_subspace_basis(self):
        if np.any(self.signs != 0):
            return None
        return np.zeros((self.dim, 0))

    def unit_samples(self, count: int) -> np.ndarray:
        active = np.flatnonzero(self.signs)
        if active.size == 0:
            return np.zeros((0, self.dim))
        coeff = np.abs(sphere_lattice(count, active.size))
        out = np.zeros((count, self.dim))
        out[:, active] = coeff * self.signs[active]
        return out


@dataclass(frozen=True, eq=False)
class SymmetricConjugationCone:
    """Matrices ``A @ U`` with ``A`` symmetric, for ``U`` with orthonormal rows.

    Vectors are flattened row-major.  Because ``U U^T = I``, the map
    ``A -> A @ U`` is an isometry from symmetric matrices into the ambient
    space, which makes this cone a linear subspace with an explicit
    orthonormal basis.
    """

    base_matrix: np.ndarray
    base_point: np.ndarray

    @property
    def dim(self) -> int:
        return self.base_matrix.size

    def distance(self, v) -> float:
        d, m = self.base_matrix.shape
        mat = np.asarray(v, dtype=float).reshape(d, m)
        u = self.base_matrix
        sym = 0.5 * (mat @ u.T + u @ mat.T)
        return float(np.linalg.norm(mat - sym @ u))

    def as_subspace_basis(self):
        d, m = self.base_matrix.shape
        u = self.base_matrix
        cols = []
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        for i in range(d):
            for j in range(i, d):
                a = np.zeros((d, d))
                if i == j:
                    a[i, i] = 1.0
                else:
                    a[i, j] = inv_sqrt2
                    a[j, i] = inv_sqrt2
                cols.append((a @ u).ravel())
        return np.column_stack(cols)

    def unit_samples(self, count: int) -> np.ndarray:
        basis = self.as_subspace_basis()
        coeff = sphere_lattice(count, basis.shape[1])
        dirs = coeff @ basis.T
        return np.vstack([dirs, -dirs])


@dataclass(frozen=True, eq=False)
class ProductCone:
    """Cartesian product of per-block cones over a flat vector."""

    blocks: tuple
    base_point: np.ndarray

    @property
    def dim(self) -> int:
        return self.base_point.shape[0]

    def distance(self, v) -> float:
        vec = np.asarray(v, dtype=float)
        total = 0.0
        for start, stop, cone in self.blocks:
            total += cone.distance(vec[start:stop]) ** 2
        return float(np.sqrt(total))

    def as_subspace_basis(self):
        bases = []
        for _, _, cone in self.blocks:
            b = cone.as_subspace_basis()
            if b is None:
                return None
            bases.append(b)
        total_cols = sum(b.shape[1] for b in bases)
        out = np.zeros((self.dim, total_cols))
        col = 0
        for (start, stop, _), b in zip(self.blocks, bases):
            out[start:stop, col:col + b.shape[1]] = b
            col += b.shape[1]
        return out

    def unit_samples(self, count: int) -> np.ndarray:
        parts = [(start, stop, cone.unit_samples(count)) for start, stop, cone in self.blocks]
        active = [(start, stop, s) for start, stop, s in parts if s.shape[0] > 0]
        if not active:
            return np.zeros((0, self.dim))
        weights = np.abs(sphere_lattice(count, len(active)))
        out = np.zeros((count, self.dim))
        for j, (start, stop, samples) in enumerate(active):
            stride = _PRIMES[j % len(_PRIMES)]
            idx = (np.arange(count) * stride) % samples.shape[0]
            out[:, start:stop] = weights[:, j:j + 1] * samples[idx]
        norms = np.linalg.norm(out, axis=1)
        keep = norms > 0.0
        return out[keep] / norms[keep, None]


def normal_cone_distance(cone, v) -> float:
    """Distance from the vector ``v`` to the given normal-cone description."""
    return cone.distance(v)


# ---------------------------------------------------------------------------
# Sets
# ---------------------------------------------------------------------------


class ProjectableSet:
    """Base class: a closed subset of ``R^ambient_dim`` with a projection map.

    ``regularity_class`` is an unverified descriptive tag (``"convex"``,
    ``"prox-regular"``, or ``"unclassified"``); nothing in the package
    changes behavior based on it.
    """

    def __init__(self, ambient_dim: int, regularity_class: str):
        if ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        self.ambient_dim = int(ambient_dim)
        self.regularity_class = regularity_class

    def _check_point(self, x) -> np.ndarray:
        point = np.asarray(x, dtype=float)
        if point.ndim != 1 or point.shape[0] != self.ambient_dim:
            raise ValueError(
                f"expected a point of dimension {self.ambient_dim}, got shape {point.shape}"
            )
        if not np.all(np.isfinite(point)):
            raise ValueError("point entries must be finite")
        return point

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        point = self._check_point(x)
        return float(np.linalg.norm(point - self.project(point)))

    def contains(self, x, rtol: float = MEMBERSHIP_RTOL) -> bool:
        point = self._check_point(x)
        return self.distance(point) <= rtol * (1.0 + float(np.linalg.norm(point)))

    def _require_member(self, x) -> np.ndarray:
        point = self._check_point(x)
        if not self.contains(point):
            raise MembershipError(
                f"point is not in the set (distance {self.distance(point):.3e})"
            )
        return point

    def normal_cone(self, x):
        raise NotImplementedError


class AffineSubspace(ProjectableSet):
    """Affine subspace ``anchor + span(directions)``.

    Parameters
    ----------
    anchor : array_like, shape (n,)
        Any point of the subspace.
    directions : array_like, shape (k, n)
        Spanning directions, one per row; dependence is tolerated.
    """

    def __init__(self, anchor, directions):
        anchor = np.asarray(anchor, dtype=float)
        if anchor.ndim != 1:
            raise ValueError("anchor must be a 1-d point")
        super().__init__(anchor.shape[0], "convex")
        rows = np.asarray(directions, dtype=float)
        if rows.size == 0:
            rows = np.zeros((0, self.ambient_dim))
        basis_rows = orthonormal_basis(rows)
        if basis_rows.shape[0] and basis_rows.shape[1] != self.ambient_dim:
            raise ValueError("directions and anchor disagree on dimension")
        self.anchor = anchor
        self._basis = basis_rows.T.reshape(self.ambient_dim, -1)
        self._complement = None

    @property
    def subspace_dim(self) -> int:
        return self._basis.shape[1]

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        shifted = point - self.anchor
        return self.anchor + self._basis @ (self._basis.T @ shifted)

    def _complement_basis(self) -> np.ndarray:
        if self._complement is None:
            n, k = self._basis.shape
            if k == 0:
                self._complement = np.eye(n)
            elif k == n:
                self._complement = np.zeros((n, 0))
            else:
                full_left = np.linalg.svd(self._basis, full_matrices=True)[0]
                self._complement = full_left[:, k:]
        return self._complement

    def normal_cone(self, x) -> SubspaceCone:
        point = self._require_member(x)
        return SubspaceCone(self._complement_basis(), point)


class DiagonalLift(ProjectableSet):
    """Diagonal subspace ``{(x, x, ..., x)}`` of ``copies`` stacked blocks."""

    def __init__(self, base_dim: int, copies: int):
        if base_dim < 1 or copies < 2:
            raise ValueError("need base_dim >= 1 and copies >= 2")
        super().__init__(base_dim * copies, "convex")
        self.base_dim = int(base_dim)
        self.copies = int(copies)
        self._normal_basis = None

    def lift(self, x) -> np.ndarray:
        point = np.asarray(x, dtype=float)
        if point.shape != (self.base_dim,):
            raise ValueError(f"expected a base point of dimension {self.base_dim}")
        return np.tile(point, self.copies)

    def restrict(self, z) -> np.ndarray:
        point = self._check_point(z)
        return point[: self.base_dim].copy()

    def block_mean(self, z) -> np.ndarray:
        point = self._check_point(z)
        return point.reshape(self.copies, self.base_dim).mean(axis=0)

    def project(self, x) -> np.ndarray:
        return np.tile(self.block_mean(x), self.copies)

    def normal_cone(self, x) -> SubspaceCone:
        point = self._require_member(x)
        if self._normal_basis is None:
            self._normal_basis = np.kron(_helmert_contrasts(self.copies), np.eye(self.base_dim))
        return SubspaceCone(self._normal_basis, point)


def _helmert_contrasts(m: int) -> np.ndarray:
    """Orthonormal basis (columns) of the mean-zero subspace of ``R^m``."""
    out = np.zeros((m, m - 1))
    for r in range(1, m):
        out[:r, r - 1] = 1.0
        out[r, r - 1] = -float(r)
        out[:, r - 1] /= np.sqrt(r * (r + 1.0))
    return out


class ProductSet(ProjectableSet):
    """Cartesian product of component sets over a concatenated flat vector."""

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("need at least one component")
        super().__init__(
            sum(c.ambient_dim for c in components),
            _combine_regularity(c.regularity_class for c in components),
        )
        self.components = components
        bounds = np.cumsum([0] + [c.ambient_dim for c in components])
        self._spans = tuple((int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))

    def blocks(self, x):
        point = self._check_point(x)
        return [point[a:b] for a, b in self._spans]

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        return np.concatenate(
            [c.project(point[a:b]) for c, (a, b) in zip(self.components, self._spans)]
        )

    def distance(self, x) -> float:
        point = self._check_point(x)
        total = sum(
            c.distance(point[a:b]) ** 2 for c, (a, b) in zip(self.components, self._spans)
        )
        return float(np.sqrt(total))

    def normal_cone(self, x) -> ProductCone:
        point = self._require_member(x)
        blocks = tuple(
            (a, b, c.normal_cone(point[a:b]))
            for c, (a, b) in zip(self.components, self._spans)
        )
        return ProductCone(blocks, point)


def _combine_regularity(tags) -> str:
    tags = set(tags)
    if tags <= {"convex"}:
        return "convex"
    if tags <= {"convex", "prox-regular"}:
        return "prox-regular"
    return "unclassified"


class Translate(ProjectableSet):
    """The set ``base + shift``."""

    def __init__(self, base: ProjectableSet, shift):
        shift = np.asarray(shift, dtype=float)
        if shift.shape != (base.ambient_dim,):
            raise ValueError("shift dimension must match the base set")
        super().__init__(base.ambient_dim, base.regularity_class)
        self.base = base
        self.shift = shift

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        return self.base.project(point - self.shift) + self.shift

    def distance(self, x) -> float:
        point = self._check_point(x)
        return self.base.distance(point - self.shift)

    def normal_cone(self, x):
        point = self._require_member(x)
        inner = self.base.normal_cone(point - self.shift)
        return dataclasses.replace(inner, base_point=point)


class LinfBall(ProjectableSet):
    """Sup-norm ball ``{x : max_i |x_i| <= radius}`` (componentwise clamp)."""

    def __init__(self, radius: float, ambient_dim: int):
        if radius <= 0:
            raise ValueError("radius must be positive")
        super().__init__(ambient_dim, "convex")
        self.radius = float(radius)

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        return np.clip(point, -self.radius, self.radius)

    def normal_cone(self, x) -> RaySpanCone:
        point = self._require_member(x)
        active = np.abs(point) >= self.radius * (1.0 - 1e-12)
        signs = np.where(active, np.sign(point), 0.0)
        return RaySpanCone(signs, point)


class OrthonormalRows(ProjectableSet):
    """Matrices ``U`` of shape (rows, cols) with ``U U^T = I`` (rows <= cols).

    Projection replaces every singular value by one.  When the input is
    rank-deficient the nearest point is not unique; a representative is
    taken from the SVD factors and a :class:`DegenerateProjectionWarning`
    is emitted.
    """

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < rows:
            raise ValueError("need 1 <= rows <= cols")
        super().__init__(rows * cols, "prox-regular")
        self.rows = int(rows)
        self.cols = int(cols)

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        mat = point.reshape(self.rows, self.cols)
        left, sing, right_t = np.linalg.svd(mat, full_matrices=False)
        if sing[-1] <= 1e-12 * max(sing[0], 1.0):
            warnings.warn(
                "projection onto the orthonormal-row set is not unique for "
                "rank-deficient input; returning an SVD representative",
                DegenerateProjectionWarning,
                stacklevel=2,
            )
        return (left @ right_t).ravel()

    def normal_cone(self, x) -> SymmetricConjugationCone:
        point = self._require_member(x)
        return SymmetricConjugationCone(point.reshape(self.rows, self.cols), point)


class RowSpace(ProjectableSet):
    """Matrices of shape (rows, cols) whose rows lie in the row space of ``dictionary``.

    Equivalently ``{P @ dictionary : P arbitrary}`` whenever ``dictionary``
    has full row rank.  Projection multiplies by the cached row-space
    projector ``pinv(dictionary) @ dictionary`` on the right.
    """

    def __init__(self, dictionary, rows: int):
        mat = np.asarray(dictionary, dtype=float)
        if mat.ndim != 2:
            raise ValueError("dictionary must be a matrix")
        if rows < 1:
            raise ValueError("rows must be positive")
        super().__init__(rows * mat.shape[1], "convex")
        self.dictionary = mat
        self.rows = int(rows)
        self.cols = mat.shape[1]
        self._row_projector = pseudo_inverse(mat) @ mat
        self._normal_basis = None

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        mat = point.reshape(self.rows, self.cols)
        return (mat @ self._row_projector).ravel()

    def normal_cone(self, x) -> SubspaceCone:
        point = self._require_member(x)
        if self._normal_basis is None:
            sing = np.linalg.svd(self.dictionary, compute_uv=False)
            rank = int(np.count_nonzero(sing > 1e-12 * sing[0])) if sing.size else 0
            right = np.linalg.svd(self.dictionary, full_matrices=True)[2].T
            complement = right[:, rank:]
            self._normal_basis = np.kron(np.eye(self.rows), complement)
        return SubspaceCone(self._normal_basis, point)


class Sphere(ProjectableSet):
    """Sphere ``{x : |x - center| = radius}`` (the shell, not the ball).

    Projection from the center is multivalued: by default that raises
    :class:`ProjectionTieBreakError`; with ``center_policy="east"`` the
    representative ``center + radius * e_1`` is returned instead.
    """

    def __init__(self, center, radius: float, center_policy: str = "error"):
        center = np.asarray(center, dtype=float)
        if center.ndim != 1:
            raise ValueError("center must be a 1-d point")
        if radius <= 0:
            raise ValueError("radius must be positive")
        if center_policy not in ("error", "east"):
            raise ValueError("center_policy must be 'error' or 'east'")
        super().__init__(center.shape[0], "prox-regular")
        self.center = center
        self.radius = float(radius)
        self.center_policy = center_policy

    def project(self, x) -> np.ndarray:
        point = self._check_point(x)
        offset = point - self.center
        rho = float(np.linalg.norm(offset))
        if rho <= 1e-14 * (1.0 + float(np.linalg.norm(self.center))):
            if self.center_policy == "error":
                raise ProjectionTieBreakError(
                    "projection from the sphere center is multivalued"
                )
            east = np.zeros_like(self.center)
            east[0] = self.radius
            return self.center + east
        return self.center + (self.radius / rho) * offset

    def distance(self, x) -> float:
        point = self._check_point(x)
        return abs(float(np.linalg.norm(point - self.center)) - self.radius)

    def normal_cone(self, x) -> RayCone:
        point = self._require_member(x)
        offset = point - self.center
        direction = offset / float(np.linalg.norm(offset))
        return RayCone(direction, point, two_sided=True)
