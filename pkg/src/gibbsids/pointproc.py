"""Point configurations, interaction energies and the potential field.

Points are stored as ``(n, d)`` float arrays. Energies are extended reals:
``math.inf`` marks a hardcore violation and any sum containing it stays
infinite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma as _gamma

INF = math.inf
COINCIDENCE_TOL = 1e-12


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / _gamma(d / 2 + 1)


# ---------------------------------------------------------------------------
# Domains and configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box given by its center and side lengths."""

    center: tuple[float, ...]
    side_lengths: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        s = tuple(float(v) for v in np.atleast_1d(self.side_lengths))
        if len(c) != len(s):
            raise ValueError("center and side_lengths differ in dimension")
        if not all(np.isfinite(c)) or not all(v > 0 and np.isfinite(v) for v in s):
            raise ValueError(f"box needs finite center and positive sides, got {s}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "side_lengths", s)

    @classmethod
    def centered(cls, L: float, d: int) -> "BoxDomain":
        """The box (-L/2, L/2)^d."""
        return cls((0.0,) * d, (float(L),) * d)

    @classmethod
    def from_bounds(cls, lower: Sequence[float], upper: Sequence[float]) -> "BoxDomain":
        lo = np.atleast_1d(np.asarray(lower, float))
        hi = np.atleast_1d(np.asarray(upper, float))
        return cls(tuple((lo + hi) / 2), tuple(hi - lo))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.side_lengths) / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.side_lengths) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.side_lengths))

    def contains(self, x: np.ndarray, closed: bool = True) -> np.ndarray:
        x = np.asarray(x, float).reshape(-1, self.dim)
        if closed:
            return np.all((x >= self.lower) & (x <= self.upper), axis=1)
        return np.all((x > self.lower) & (x < self.upper), axis=1)

    def padded(self, r: float) -> "BoxDomain":
        """Smallest box containing ``self + B(0, r)``."""
        return BoxDomain(self.center, tuple(s + 2 * r for s in self.side_lengths))

    def parallel_volume(self, r: float) -> float:
        """Lebesgue measure of the Minkowski sum ``self + B(0, r)`` (Steiner formula)."""
        d = self.dim
        sides = self.side_lengths
        total = 0.0
        for k in range(d + 1):
            e = sum(math.prod(c) for c in itertools.combinations(sides, d - k))
            total += e * unit_ball_volume(k) * r**k
        return total


@dataclass(frozen=True)
class PointConfiguration:
    """A finite simple point set inside a bounding box."""

    points: np.ndarray
    domain: BoxDomain
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, self.domain.dim)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.validate:
            return
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        tol = 1e-9 * max(1.0, float(np.max(np.abs(self.domain.upper))))
        inside = np.all((pts >= self.domain.lower - tol) & (pts <= self.domain.upper + tol), axis=1)
        if not np.all(inside):
            raise ValueError(f"{np.count_nonzero(~inside)} point(s) outside the bounding domain")
        if len(pts) > 1 and cKDTree(pts).query_pairs(COINCIDENCE_TOL):
            raise ValueError("configuration is not simple (coincident points)")

    @classmethod
    def empty(cls, domain: BoxDomain) -> "PointConfiguration":
        return cls(np.empty((0, domain.dim)), domain)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def count_in(self, window: BoxDomain) -> int:
        """M_window: the number of points inside ``window``."""
        return int(np.count_nonzero(window.contains(self.points)))

    def restrict(self, window: BoxDomain) -> "PointConfiguration":
        return PointConfiguration(self.points[window.contains(self.points)], self.domain, validate=False)

    def add(self, x) -> "PointConfiguration":
        x = np.asarray(x, float).reshape(1, self.dim)
        return PointConfiguration(np.vstack([self.points, x]), self.domain)

    def remove(self, index: int) -> "PointConfiguration":
        return PointConfiguration(np.delete(self.points, index, axis=0), self.domain, validate=False)


def translate(config: PointConfiguration, v) -> PointConfiguration:
    v = np.asarray(v, float).reshape(config.dim)
    dom = BoxDomain(tuple(np.asarray(config.domain.center) + v), config.domain.side_lengths)
    return PointConfiguration(config.points + v, dom, validate=False)


# ---------------------------------------------------------------------------
# Pair potentials
# ---------------------------------------------------------------------------

# kernel codes shared with the compiled sampler
KIND_NONE, KIND_STRAUSS, KIND_HARDCORE, KIND_SOFTSHELL, KIND_TABULATED = range(5)


class PairPotential:
    """Radial, nonnegative (or +inf) pair potential with support in B(0, R)."""

    kind: int = KIND_NONE
    range: float = 0.0

    def radial(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        r = np.abs(x) if x.ndim <= 1 else np.linalg.norm(x, axis=-1)
        return self.radial(r)

    @property
    def at_origin(self) -> float:
        return float(self.radial(np.zeros(1))[0])

    def sup_on_ball(self, rho: float) -> float:
        """sup of phi over |y| <= rho."""
        r = np.linspace(0.0, min(rho, self.range), 2049)
        return float(np.max(self.radial(r)))

    def kernel_params(self) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
        """(kind, scalar params, knot radii, knot values) for the compiled sampler."""
        return self.kind, np.zeros(2), np.zeros(1), np.zeros(1)


class NoInteraction(PairPotential):
    kind = KIND_NONE
    range = 0.0

    def radial(self, r):
        return np.zeros_like(np.asarray(r, float))

    def __repr__(self):
        return "NoInteraction()"


@dataclass(frozen=True, repr=True)
class Strauss(PairPotential):
    """phi = a * 1{|x| <= R}."""

    a: float
    R: float
    kind = KIND_STRAUSS

    def __post_init__(self):
        if not (self.a > 0 and self.R > 0):
            raise ValueError("Strauss needs a > 0 and R > 0")

    @property
    def range(self):
        return self.R

    def radial(self, r):
        r = np.asarray(r, float)
        return np.where(r <= self.R, self.a, 0.0)

    def kernel_params(self):
        return self.kind, np.array([self.a, self.R]), np.zeros(1), np.zeros(1)


@dataclass(frozen=True)
class Hardcore(PairPotential):
    """phi = +inf on the closed ball of radius R."""

    R: float
    kind = KIND_HARDCORE

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("Hardcore needs R > 0")

    @property
    def range(self):
        return self.R

    def radial(self, r):
        r = np.asarray(r, float)
        return np.where(r <= self.R, INF, 0.0)

    def kernel_params(self):
        return self.kind, np.array([0.0, self.R]), np.zeros(1), np.zeros(1)


@dataclass(frozen=True)
class SoftShell(PairPotential):
    """phi(x) = exp(-|x|^-p) for 0 < |x| <= R, zero beyond and phi(0) = 0."""

    p: float
    R: float
    kind = KIND_SOFTSHELL

    def __post_init__(self):
        if not (self.p > 0 and self.R > 0):
            raise ValueError("SoftShell needs p > 0 and R > 0")

    @property
    def range(self):
        return self.R

    def radial(self, r):
        r = np.asarray(r, float)
        out = np.zeros_like(r)
        m = (r > 0) & (r <= self.R)
        out[m] = np.exp(-r[m] ** (-self.p))
        return out

    def sup_on_ball(self, rho):
        # increasing in |x| on (0, R]
        rho = min(rho, self.R)
        return float(math.exp(-rho ** (-self.p))) if rho > 0 else 0.0

    def kernel_params(self):
        return self.kind, np.array([self.p, self.R]), np.zeros(1), np.zeros(1)


@dataclass(frozen=True)
class Tabulated(PairPotential):
    """Radial knots with linear interpolation; exactly zero beyond the last knot."""

    radii: tuple[float, ...]
    values: tuple[float, ...]
    kind = KIND_TABULATED

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        v = np.asarray(self.values, float)
        if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
            raise ValueError("need at least two (radius, value) knots")
        if r[0] != 0 or np.any(np.diff(r) <= 0):
            raise ValueError("knot radii must start at 0 and increase strictly")
        if np.any(v < 0) or np.any(np.isnan(v)):
            raise ValueError("pair potential values must be nonnegative")
        object.__setattr__(self, "radii", tuple(r))
        object.__setattr__(self, "values", tuple(v))

    @property
    def range(self):
        return self.radii[-1]

    def radial(self, r):
        r = np.asarray(r, float)
        out = np.interp(r, self.radii, self.values)
        return np.where(r <= self.radii[-1], out, 0.0)

    def sup_on_ball(self, rho):
        r = np.asarray(self.radii)
        v = np.asarray(self.values)
        inside = v[r <= rho]
        edge = self.radial(np.array([min(rho, r[-1])]))[0]
        return float(max(inside.max(initial=0.0), edge))

    def kernel_params(self):
        return self.kind, np.array([0.0, self.range]), np.asarray(self.radii), np.asarray(self.values)


# ---------------------------------------------------------------------------
# Interaction models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pairwise:
    phi: PairPotential

    @property
    def range(self) -> float:
        return self.phi.range

    # nonnegative phi => h >= 0
    local_energy_lower_bound: float = 0.0

    @property
    def domination_intensity(self) -> float:
        return math.exp(-self.local_energy_lower_bound)


@dataclass(frozen=True)
class AreaEnergy:
    """U(eta) = |union of B(x_j, R)|; local energy lies in [0, |B(0,R)|]."""

    R: float
    local_energy_lower_bound: float = 0.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("AreaEnergy needs R > 0")

    @property
    def range(self) -> float:
        # U_Lambda depends on points within 2R of Lambda
        return 2 * self.R

    @property
    def domination_intensity(self) -> float:
        return math.exp(-self.local_energy_lower_bound)


InteractionModel = Pairwise | AreaEnergy


def _pair_sum(diffs: np.ndarray, phi: PairPotential) -> float:
    if len(diffs) == 0:
        return 0.0
    vals = phi(diffs)
    if np.any(np.isinf(vals)):
        return INF
    return float(np.sum(vals))


def total_energy(config: PointConfiguration, model: InteractionModel) -> float:
    pts = config.points
    if len(pts) == 0:
        return 0.0
    if isinstance(model, AreaEnergy):
        return union_of_balls_volume(pts, model.R)
    if model.range == 0:
        return 0.0
    tree = cKDTree(pts)
    pairs = tree.query_pairs(model.range, output_type="ndarray")
    if len(pairs) == 0:
        return 0.0
    return _pair_sum(pts[pairs[:, 0]] - pts[pairs[:, 1]], model.phi)


def conditional_energy(config: PointConfiguration, window: BoxDomain, model: InteractionModel) -> float:
    """U_window: energy of the pairs touching ``window`` (or U(eta) - U(eta outside))."""
    pts = config.points
    inside = window.contains(pts)
    if not np.any(inside):
        return 0.0
    if isinstance(model, AreaEnergy):
        outside = PointConfiguration(pts[~inside], config.domain, validate=False)
        full = total_energy(config, model)
        rest = total_energy(outside, model)
        if full == INF and rest == INF:
            return 0.0
        return full - rest
    if model.range == 0 or len(pts) < 2:
        return 0.0
    pairs = cKDTree(pts).query_pairs(model.range, output_type="ndarray")
    if len(pairs) == 0:
        return 0.0
    touch = inside[pairs[:, 0]] | inside[pairs[:, 1]]
    pairs = pairs[touch]
    return _pair_sum(pts[pairs[:, 0]] - pts[pairs[:, 1]], model.phi)


def local_energy(x, config: PointConfiguration, model: InteractionModel) -> float:
    """h(x, eta): energy increment from inserting ``x`` into ``config``."""
    x = np.asarray(x, float).reshape(config.dim)
    pts = config.points
    if len(pts):
        dist = np.linalg.norm(pts - x, axis=1)
        if np.min(dist) <= COINCIDENCE_TOL:
            raise ValueError("x coincides with an existing point")
    if isinstance(model, AreaEnergy):
        near = pts[dist < 2 * model.R] if len(pts) else pts
        if len(near) == 0:
            return unit_ball_volume(config.dim) * model.R**config.dim
        with_x = np.vstack([near, x])
        return union_of_balls_volume(with_x, model.R) - union_of_balls_volume(near, model.R)
    if model.range == 0 or len(pts) == 0:
        return 0.0
    return _pair_sum(pts[dist <= model.range] - x, model.phi)


# ---------------------------------------------------------------------------
# Union of equal balls
# ---------------------------------------------------------------------------


def _union_length_1d(x: np.ndarray, R: float) -> float:
    xs = np.sort(x)
    gaps = np.diff(xs)
    return float(2 * R + np.sum(np.minimum(gaps, 2 * R)))


def _union_area_2d(c: np.ndarray, R: float) -> float:
    # Green's theorem over the uncovered boundary arcs of every circle.
    n = len(c)
    tree = cKDTree(c)
    area = 0.0
    two_pi = 2 * math.pi
    for i in range(n):
        nbrs = [j for j in tree.query_ball_point(c[i], 2 * R) if j != i]
        covered = []
        for j in nbrs:
            dv = c[j] - c[i]
            dist = math.hypot(dv[0], dv[1])
            if dist >= 2 * R:
                continue
            mid = math.atan2(dv[1], dv[0]) % two_pi
            half = math.acos(dist / (2 * R))
            lo, hi = mid - half, mid + half
            if lo < 0:
                covered += [(lo + two_pi, two_pi), (0.0, hi)]
            elif hi > two_pi:
                covered += [(lo, two_pi), (0.0, hi - two_pi)]
            else:
                covered.append((lo, hi))
        covered.sort()
        free = []
        pos = 0.0
        for lo, hi in covered:
            if lo > pos:
                free.append((pos, lo))
            pos = max(pos, hi)
        if pos < two_pi:
            free.append((pos, two_pi))
        cx, cy = c[i]
        for t1, t2 in free:
            area += 0.5 * (
                R * R * (t2 - t1)
                + R * cx * (math.sin(t2) - math.sin(t1))
                - R * cy * (math.cos(t2) - math.cos(t1))
            )
    return area


def _union_volume_qmc(c: np.ndarray, R: float, m: int = 18, seed: int = 0) -> float:
    from scipy.stats import qmc

    d = c.shape[1]
    lo = c.min(axis=0) - R
    hi = c.max(axis=0) + R
    u = qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)
    pts = lo + u * (hi - lo)
    hit = np.asarray(cKDTree(c).query(pts, distance_upper_bound=R)[0] <= R)
    return float(np.prod(hi - lo) * hit.mean())


def union_of_balls_volume(centers: np.ndarray, R: float) -> float:
    """|union of closed balls B(c_j, R)|: exact for d <= 2, scrambled Sobol for d >= 3."""
    c = np.asarray(centers, float)
    if c.ndim == 1:
        c = c[:, None]
    if len(c) == 0:
        return 0.0
    d = c.shape[1]
    if d == 1:
        return _union_length_1d(c[:, 0], R)
    if d == 2:
        return _union_area_2d(c, R)
    return _union_volume_qmc(c, R)


# ---------------------------------------------------------------------------
# Single-site potential and the random field
# ---------------------------------------------------------------------------


# Profiles are module-level classes so potentials pickle into worker processes.


@dataclass(frozen=True)
class _RadialProfile:
    radii: np.ndarray
    values: np.ndarray

    def __call__(self, y):
        return np.interp(np.linalg.norm(y, axis=-1), self.radii, self.values, right=0.0)


@dataclass(frozen=True)
class _CosineProfile:
    depth: float
    radius: float

    def __call__(self, y):
        r = np.linalg.norm(y, axis=-1)
        c = np.cos(np.pi * np.minimum(r, self.radius) / (2 * self.radius))
        return np.where(r <= self.radius, -self.depth * c, 0.0)


@dataclass(frozen=True)
class _SeparableProfile:
    axis_profile: Callable
    half_width: float

    def __call__(self, y):
        y = np.asarray(y, float)
        inside = np.all(np.abs(y) <= self.half_width, axis=-1)
        return np.where(inside, -np.prod(self.axis_profile(y), axis=-1), 0.0)


@dataclass(frozen=True)
class _ScaledProfile:
    base: Callable
    factor: float

    def __call__(self, y):
        return self.factor * self.base(y)


class SingleSitePotential:
    """Continuous nonpositive single-site potential u0 with compact support.

    ``profile`` maps an ``(m, d)`` array of displacements to ``m`` values <= 0
    and must vanish outside the ball of radius ``support_radius``. The
    reflected form ``u(x) = -u0(-x)`` is exposed as :meth:`reflected`.
    """

    def __init__(
        self,
        profile: Callable[[np.ndarray], np.ndarray],
        support_radius: float,
        dim: int,
        lipschitz: float | None = None,
        name: str = "u0",
    ):
        if not support_radius > 0:
            raise ValueError("support radius must be positive")
        self._profile = profile
        self.support_radius = float(support_radius)
        self.dim = int(dim)
        self.name = name
        self._lipschitz = lipschitz
        probe = self(np.zeros((1, self.dim)))
        if probe[0] > 0:
            raise ValueError("u0 must be nonpositive")

    @classmethod
    def radial(cls, radii, values, dim: int, name: str = "tabulated") -> "SingleSitePotential":
        """Radial knot table, linear in between, zero past the last knot."""
        r = np.asarray(radii, float)
        v = np.asarray(values, float)
        if r[0] != 0 or np.any(np.diff(r) <= 0) or r.shape != v.shape:
            raise ValueError("radii must start at 0 and increase strictly")
        if np.any(v > 0):
            raise ValueError("u0 must be nonpositive")
        if v[-1] != 0:
            raise ValueError("last knot value must be 0 for continuity")

        lip = float(np.max(np.abs(np.diff(v) / np.diff(r))))
        return cls(_RadialProfile(r, v), r[-1], dim, lipschitz=lip, name=name)

    @classmethod
    def triangular(cls, depth: float, radius: float, dim: int = 1) -> "SingleSitePotential":
        """u0(y) = -depth * max(0, 1 - |y|/radius)."""
        return cls.radial([0.0, radius], [-depth, 0.0], dim, name=f"tri{depth:g}x{radius:g}")

    @classmethod
    def cosine(cls, depth: float, radius: float, dim: int = 1) -> "SingleSitePotential":
        """u0(y) = -depth * cos(pi |y| / (2 radius)) on |y| <= radius."""

        return cls(_CosineProfile(depth, radius), radius, dim, lipschitz=depth * np.pi / (2 * radius), name=f"cos{depth:g}x{radius:g}")

    @classmethod
    def separable(cls, axis_profile: Callable[[np.ndarray], np.ndarray], half_width: float, dim: int,
                  lipschitz: float | None = None) -> "SingleSitePotential":
        """u0(y) = -prod_i f(y_i) with f >= 0 supported in [-half_width, half_width]."""

        return cls(_SeparableProfile(axis_profile, half_width), half_width * math.sqrt(dim), dim, lipschitz=lipschitz, name="separable")

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, float).reshape(-1, self.dim)
        return np.asarray(self._profile(y), float)

    def reflected(self, x) -> np.ndarray:
        """u(x) = -u0(-x) >= 0."""
        x = np.asarray(x, float).reshape(-1, self.dim)
        return -self(-x)

    @property
    def at_origin(self) -> float:
        return float(self(np.zeros((1, self.dim)))[0])

    @property
    def lipschitz(self) -> float:
        if self._lipschitz is None:
            # finite-difference estimate along the axes
            r = np.linspace(-self.support_radius, self.support_radius, 4001)
            best = 0.0
            for k in range(self.dim):
                y = np.zeros((len(r), self.dim))
                y[:, k] = r
                best = max(best, float(np.max(np.abs(np.diff(self(y)) / np.diff(r)))))
            self._lipschitz = best
        return self._lipschitz

    def scaled(self, factor: float) -> "SingleSitePotential":
        return SingleSitePotential(_ScaledProfile(self._profile, factor), self.support_radius, self.dim,
                                   lipschitz=None if self._lipschitz is None else factor * self._lipschitz,
                                   name=f"{factor:g}*{self.name}")

    def __repr__(self):
        return f"SingleSitePotential({self.name}, support_radius={self.support_radius}, dim={self.dim})"


def potential_field(x, config: PointConfiguration | np.ndarray, u0: SingleSitePotential) -> np.ndarray:
    """V_eta(x) = sum_j u0(x - x_j), evaluated at every row of ``x``.

    Returns a scalar when a single point is given.
    """
    pts = config.points if isinstance(config, PointConfiguration) else np.asarray(config, float)
    pts = pts.reshape(-1, u0.dim)
    x = np.asarray(x, float)
    scalar = x.ndim <= 1 and x.size == u0.dim
    xs = x.reshape(-1, u0.dim)
    out = np.zeros(len(xs))
    if len(pts) == 0:
        return float(out[0]) if scalar else out
    rad = u0.support_radius
    if len(pts) * len(xs) <= 200_000:
        diff = xs[:, None, :] - pts[None, :, :]
        near = np.linalg.norm(diff, axis=-1) <= rad
        if np.any(near):
            out += np.bincount(np.nonzero(near)[0], weights=u0(diff[near]), minlength=len(xs))
    else:
        tree = cKDTree(xs)
        for p in pts:
            idx = tree.query_ball_point(p, rad)
            if idx:
                out[idx] += u0(xs[idx] - p)
    return float(out[0]) if scalar else out
