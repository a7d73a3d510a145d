"""Interaction windows, separated packings and the norm

    ||u||_S^2 = sup { sum_j u(x_j)^2 : x_i - x_j outside S for i != j }.

Windows are open, bounded and symmetric. The sup is computed on a lattice by
branch-and-bound (a lower bound of the continuum value); for piecewise-constant
staircase functions a cell-level search over closures gives an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pointproc import SingleSitePotential


class EmptyWindowError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


def direction_sample(d: int, n: int | None = None) -> np.ndarray:
    """Unit directions: both signs in 1D, an angle grid (0.5 deg) in 2D, a Fibonacci sphere in 3D."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        n = n or 720
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    n = n or 2000
    if d == 3:
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        th = np.pi * (1 + 5**0.5) * i
        return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
    g = np.random.default_rng(0).standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


class InteractionWindow:
    """Open, bounded, symmetric set S containing a neighbourhood of 0."""

    dim: int

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def radial(self, dirs: np.ndarray) -> np.ndarray:
        """Boundary distance rho(theta) along unit directions."""
        raise NotImplementedError

    @property
    def inradius(self) -> float:
        return float(np.min(self.radial(direction_sample(self.dim))))

    @property
    def outer_radius(self) -> float:
        return float(np.max(self.radial(direction_sample(self.dim))))

    def _as_points(self, x) -> np.ndarray:
        return np.asarray(x, float).reshape(-1, self.dim)

    def box_inside(self, lo, hi) -> bool:
        """Whether the open box (lo, hi) lies inside S (generic: sampled)."""
        pts = _box_samples(lo, hi, 9)
        return bool(np.all(self.contains(pts)))

    def box_meets_complement(self, lo, hi, closed: bool = False) -> bool:
        """Whether the box (closure if ``closed``) has a point outside S (generic: sampled)."""
        pts = _box_samples(lo, hi, 9)
        return bool(np.any(~self.contains(pts)))


def _box_samples(lo, hi, k):
    axes = [np.linspace(a, b, k) for a, b in zip(np.atleast_1d(lo), np.atleast_1d(hi))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _far_corner(lo, hi) -> np.ndarray:
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    return np.maximum(np.abs(lo), np.abs(hi))


@dataclass(frozen=True)
class Ball(InteractionWindow):
    r: float
    dim: int = 1

    def __post_init__(self):
        if not self.r > 0:
            raise EmptyWindowError("ball radius must be positive")

    def contains(self, x):
        x = self._as_points(x)
        return np.linalg.norm(x, axis=1) < self.r

    def radial(self, dirs):
        return np.full(len(dirs), self.r)

    @property
    def inradius(self):
        return self.r

    @property
    def outer_radius(self):
        return self.r

    def box_inside(self, lo, hi):
        return bool(np.linalg.norm(_far_corner(lo, hi)) <= self.r)

    def box_meets_complement(self, lo, hi, closed=False):
        far = np.linalg.norm(_far_corner(lo, hi))
        return bool(far >= self.r if closed else far > self.r)


@dataclass(frozen=True)
class Box(InteractionWindow):
    half_widths: tuple[float, ...]

    def __post_init__(self):
        hw = tuple(float(v) for v in np.atleast_1d(self.half_widths))
        if not all(v > 0 for v in hw):
            raise EmptyWindowError("box half-widths must be positive")
        object.__setattr__(self, "half_widths", hw)

    @property
    def dim(self):
        return len(self.half_widths)

    def contains(self, x):
        x = self._as_points(x)
        return np.all(np.abs(x) < np.asarray(self.half_widths), axis=1)

    def radial(self, dirs):
        a = np.abs(np.asarray(dirs, float))
        with np.errstate(divide="ignore"):
            return np.min(np.where(a > 0, np.asarray(self.half_widths) / a, np.inf), axis=1)

    @property
    def inradius(self):
        return min(self.half_widths)

    @property
    def outer_radius(self):
        return float(np.linalg.norm(self.half_widths))

    def box_inside(self, lo, hi):
        return bool(np.all(_far_corner(lo, hi) <= np.asarray(self.half_widths)))

    def box_meets_complement(self, lo, hi, closed=False):
        far = _far_corner(lo, hi)
        hw = np.asarray(self.half_widths)
        return bool(np.any(far >= hw) if closed else np.any(far > hw))


class StarRadial(InteractionWindow):
    """S = {x : |x| < rho(x/|x|)} for a symmetric boundary profile ``rho``."""

    def __init__(self, rho: Callable[[np.ndarray], np.ndarray], dim: int, name: str = "star"):
        self._rho = rho
        self.dim = dim
        self.name = name
        dirs = direction_sample(dim)
        r = self.radial(dirs)
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise EmptyWindowError("profile must be positive and finite")
        if not np.allclose(r, self.radial(-dirs), rtol=1e-12, atol=1e-12):
            raise ValueError("profile is not symmetric (S != -S)")

    @classmethod
    def tabulated(cls, dirs: np.ndarray, values: np.ndarray, name: str = "star") -> "StarRadial":
        """Profile tabulated on unit directions: periodic interpolation in 2D, nearest direction otherwise."""
        dirs = np.asarray(dirs, float)
        values = np.asarray(values, float)
        d = dirs.shape[1]
        if d == 1:
            pos = float(values[dirs[:, 0] > 0][0])
            return cls(lambda u: np.full(len(u), pos), 1, name)
        if d == 2:
            th = np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * np.pi)
            order = np.argsort(th)
            th, vals = th[order], values[order]

            def rho(u):
                a = np.mod(np.arctan2(u[:, 1], u[:, 0]), 2 * np.pi)
                return np.interp(a, th, vals, period=2 * np.pi)

            return cls(rho, 2, name)

        def rho_nn(u):
            return values[np.argmax(u @ dirs.T, axis=1)]

        return cls(rho_nn, d, name)

    def radial(self, dirs):
        return np.asarray(self._rho(np.asarray(dirs, float).reshape(-1, self.dim)), float)

    def contains(self, x):
        x = self._as_points(x)
        nrm = np.linalg.norm(x, axis=1)
        out = np.ones(len(x), bool)
        nz = nrm > 0
        if np.any(nz):
            out[nz] = nrm[nz] < self.radial(x[nz] / nrm[nz, None])
        return out

    def __repr__(self):
        return f"StarRadial({self.name}, dim={self.dim})"


def window_contains(S: InteractionWindow, x) -> np.ndarray | bool:
    res = S.contains(x)
    x = np.asarray(x)
    if x.ndim == 0 or (x.ndim == 1 and x.size == S.dim):
        return bool(res[0])
    return res


@dataclass(frozen=True)
class ConditionSReport:
    passed: bool
    worst_margin: float
    worst_alpha: float
    worst_direction: np.ndarray = field(repr=False)


def check_condition_S(S: InteractionWindow, alphas: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99),
                      n_dirs: int | None = None, probe: float = 1e-7) -> ConditionSReport:
    """Test alpha * closure(S) inside Int(S) on sampled boundary points.

    Each scaled boundary point must keep a small ball of radius
    ``probe * outer_radius`` inside S; the margin reported is the smallest
    ``rho(dir(q)) - |q|`` over the probe points q.
    """
    alphas = np.asarray(alphas, float)
    if np.any((alphas <= 0) | (alphas >= 1)):
        raise ValueError("alpha values must lie in (0, 1)")
    d = S.dim
    dirs = direction_sample(d, n_dirs)
    bnd = dirs * S.radial(dirs)[:, None]
    delta = probe * S.outer_radius
    offsets = np.vstack([np.zeros((1, d)), delta * direction_sample(d, 8 if d == 2 else None)])
    worst = (math.inf, math.nan, dirs[0])
    for a in alphas:
        q = (a * bnd)[:, None, :] + offsets[None, :, :]
        flat = q.reshape(-1, d)
        nrm = np.linalg.norm(flat, axis=1)
        safe = np.where(nrm > 0, nrm, 1.0)
        margin = S.radial(flat / safe[:, None]) - nrm
        margin = margin.reshape(len(dirs), len(offsets)).min(axis=1)
        i = int(np.argmin(margin))
        if margin[i] < worst[0]:
            worst = (float(margin[i]), float(a), dirs[i])
    return ConditionSReport(worst[0] > 0, worst[0], worst[1], worst[2])


def erode(S: InteractionWindow, eps: float) -> InteractionWindow:
    """S_eps = (S^c + closed B(0, eps))^c, i.e. the points at distance > eps from S^c."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps >= S.inradius:
        raise EmptyWindowError(f"erosion {eps} reaches the inradius {S.inradius} of S")
    if eps == 0:
        return S
    if isinstance(S, Ball):
        return Ball(S.r - eps, S.dim)
    if isinstance(S, Box):
        return Box(tuple(h - eps for h in S.half_widths))
    d = S.dim
    dirs = direction_sample(d)
    rho = S.radial(dirs)
    if d == 1:
        return StarRadial.tabulated(dirs, rho - eps, name=f"{getattr(S, 'name', 'S')}-{eps:g}")
    bnd = dirs * rho[:, None]
    lo = np.zeros(len(dirs))
    hi = rho.copy()
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        q = dirs * mid[:, None]
        dist = np.min(np.linalg.norm(q[:, None, :] - bnd[None, :, :], axis=-1), axis=1)
        ok = dist > eps
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return StarRadial.tabulated(dirs, lo, name=f"{getattr(S, 'name', 'S')}-{eps:g}")


# ---------------------------------------------------------------------------
# Nonnegative compactly supported functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """Nonnegative continuous function supported in the ball of radius ``support_radius``."""

    fn: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    dim: int
    lipschitz: float | None = None
    name: str = "u"

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, float).reshape(-1, self.dim)), float)

    @classmethod
    def from_potential(cls, u0: SingleSitePotential) -> "Bump":
        """The reflected form u(x) = -u0(-x)."""
        return cls(u0.reflected, u0.support_radius, u0.dim, u0.lipschitz, f"refl({u0.name})")

    @classmethod
    def triangle(cls, height: float = 1.0, radius: float = 1.0, dim: int = 1) -> "Bump":
        return cls(lambda x: height * np.maximum(0.0, 1 - np.linalg.norm(x, axis=1) / radius),
                   radius, dim, height / radius, "triangle")

    @classmethod
    def cosine(cls, radius: float = 1.0, dim: int = 1) -> "Bump":
        def fn(x):
            r = np.linalg.norm(x, axis=1)
            return np.where(r <= radius, np.cos(np.pi * np.minimum(r, radius) / (2 * radius)), 0.0)

        return cls(fn, radius, dim, np.pi / (2 * radius), "cosine")


def as_bump(u) -> Bump:
    if isinstance(u, (Bump, StaircaseFunction)):
        return u
    if isinstance(u, SingleSitePotential):
        return Bump.from_potential(u)
    raise TypeError(f"cannot interpret {type(u).__name__} as a nonnegative bump")


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------


def max_weight_packing(points: np.ndarray, weights: np.ndarray, compatible, cap: int,
                       groups: np.ndarray | None = None, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Maximize sum of weights over subsets of size <= cap that are pairwise compatible.

    ``compatible(i, rest)`` returns the boolean mask of candidates in ``rest``
    that may coexist with candidate ``i``. ``groups`` optionally labels a
    clique cover of the conflict graph (no two members of a group are
    compatible), which tightens the bound: at most one pick per group.
    Candidates are explored in order of decreasing weight and a branch is cut
    when its value plus the optimistic completion cannot beat the incumbent.
    """
    w = np.asarray(weights, float)
    if len(w) == 0 or cap <= 0:
        return 0.0, np.empty(0, int)
    order = np.argsort(-w, kind="stable")
    w_sorted = w[order]
    g_sorted = None
    n_groups = 0
    if groups is not None:
        _, g_sorted = np.unique(np.asarray(groups)[order], return_inverse=True)
        g_sorted = g_sorted.ravel()
        n_groups = int(g_sorted.max()) + 1
    best_val = 0.0
    best_set: list[int] = []

    def completion(cand: np.ndarray, room: int) -> float:
        # cand is sorted by decreasing weight, so the first `room` entries are the largest
        top = float(np.sum(w_sorted[cand[:room]]))
        if g_sorted is None or len(cand) <= 1:
            return top
        gm = np.zeros(n_groups)
        np.maximum.at(gm, g_sorted[cand], w_sorted[cand])
        if room < n_groups:
            gm = np.partition(gm, n_groups - room)[n_groups - room:]
        return min(top, float(np.sum(gm)))

    def dfs(cand: np.ndarray, value: float, chosen: list[int]):
        nonlocal best_val, best_set
        if value > best_val + tol or not best_set:
            best_val, best_set = value, list(chosen)
        room = cap - len(chosen)
        if room == 0:
            return
        csum = np.cumsum(w_sorted[cand])
        for pos in range(len(cand)):
            stop = min(pos + room, len(cand))
            head = csum[stop - 1] - (csum[pos - 1] if pos else 0.0)
            if value + head <= best_val + tol:
                break
            i = cand[pos]
            rest = cand[pos + 1:]
            if len(rest) and room > 1:
                nxt = rest[compatible(order[i], order[rest])]
            else:
                nxt = rest[:0]
            v = value + w_sorted[i]
            if len(nxt) and v + completion(nxt, room - 1) <= best_val + tol:
                if v > best_val + tol:
                    best_val, best_set = v, chosen + [i]
                continue
            dfs(nxt, v, chosen + [i])

    dfs(np.arange(len(w)), 0.0, [])
    return float(best_val), order[np.asarray(best_set, int)]


def conflict_groups(points: np.ndarray, side: float) -> np.ndarray | None:
    """Label points by half-open boxes of the given side; None when side is not positive."""
    if not side > 0:
        return None
    key = np.floor(np.asarray(points, float) / side).astype(np.int64)
    _, inv = np.unique(key, axis=0, return_inverse=True)
    return inv.ravel()


def _point_compat(S: InteractionWindow, X: np.ndarray):
    def compatible(i, rest):
        return ~S.contains(X[rest] - X[i])

    return compatible


@dataclass(frozen=True)
class SeparatedPacking:
    points: np.ndarray
    window: InteractionWindow
    values: np.ndarray

    @property
    def objective(self) -> float:
        return float(np.sum(self.values))

    def is_feasible(self) -> bool:
        p = self.points
        for i in range(len(p)):
            for j in range(len(p)):
                if i != j and self.window.contains(p[i] - p[j])[0]:
                    return False
        return True

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class NormResult:
    value: float
    witness: SeparatedPacking
    slack: float
    cap: int
    resolution: float
    power: int = 2

    def row(self, u_id: str, s_id: str):
        return (u_id, s_id, self.resolution, self.value, self.slack, len(self.witness))


def packing_cap(support_radius: float, S: InteractionWindow, d: int) -> int:
    """A priori bound on packing points meeting supp u."""
    return int(math.ceil(2 * support_radius / S.inradius + 1)) ** d


def lattice(support_radius: float, d: int, resolution: float) -> np.ndarray:
    k = int(math.floor(support_radius / resolution + 1e-9))
    ax = resolution * np.arange(-k, k + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def norm_u_S(u, S: InteractionWindow, resolution: float, power: int = 2) -> NormResult:
    """Lattice restriction of sup sum_j u(x_j)^power over S-separated point sets.

    ``u`` is a :class:`Bump`, a staircase function, or a single-site potential
    (its reflected form is used). The value is a lower bound of the continuum
    sup; ``slack`` is the continuity allowance cap * power * max(u)^(power-1)
    * Lip(u) * resolution * sqrt(d) / 2.
    """
    f = as_bump(u)
    d = f.dim
    if 2 * f.support_radius / resolution < 4:
        raise ValueError(f"resolution {resolution} gives fewer than 4 nodes across supp u")
    X = lattice(f.support_radius, d, resolution)
    vals = f(X)
    keep = vals > 0
    X, vals = X[keep], vals[keep]
    cap = packing_cap(f.support_radius, S, d)
    weights = vals**power
    groups = conflict_groups(X, 0.99 * S.inradius / math.sqrt(d))
    value, idx = max_weight_packing(X, weights, _point_compat(S, X), cap, groups)
    wit = SeparatedPacking(X[idx], S, weights[idx])
    lip = f.lipschitz if f.lipschitz is not None else 0.0
    m = float(vals.max()) if len(vals) else 0.0
    slack = cap * power * m ** (power - 1) * lip * resolution * math.sqrt(d) / 2
    return NormResult(value, wit, slack, cap, resolution, power)


# ---------------------------------------------------------------------------
# Staircase approximation
# ---------------------------------------------------------------------------


class StaircaseFunction:
    """u_n = sum_j u_{n,j} 1{cell j}, cells j/n + (0, 1/n]^d, u_{n,j} = sup over the cell."""

    def __init__(self, n: int, index: np.ndarray, values: np.ndarray, dim: int, support_radius: float):
        self.n = n
        self.dim = dim
        self.index = np.asarray(index, np.int64).reshape(-1, dim)
        self.values = np.asarray(values, float)
        self.support_radius = support_radius + math.sqrt(dim) / n
        self.lipschitz = None
        self.name = f"staircase{n}"
        self._lo = self.index.min(axis=0)
        span = self.index.max(axis=0) - self._lo + 1
        self._table = np.zeros(tuple(span))
        self._table[tuple((self.index - self._lo).T)] = self.values

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float).reshape(-1, self.dim)
        j = np.ceil(x * self.n - 1e-9).astype(np.int64) - 1 - self._lo
        ok = np.all((j >= 0) & (j < np.asarray(self._table.shape)), axis=1)
        out = np.zeros(len(x))
        out[ok] = self._table[tuple(j[ok].T)]
        return out

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.index / self.n
        return lo, lo + 1.0 / self.n

    def nonzero(self) -> "StaircaseFunction":
        keep = self.values > 0
        return StaircaseFunction(self.n, self.index[keep], self.values[keep], self.dim,
                                 self.support_radius - math.sqrt(self.dim) / self.n)


def staircase(u, n: int, samples_per_axis: int = 9) -> StaircaseFunction:
    """Cellwise sup of ``u`` on the grid of mesh 1/n.

    The sup per cell is taken over a ``samples_per_axis``-point grid including
    the corners, plus the cell point closest to the origin, which makes it
    exact for piecewise-linear and for radially nonincreasing profiles.
    """
    f = as_bump(u)
    d = f.dim
    if n < 1:
        raise ValueError("n must be a positive integer")
    kmax = int(math.ceil(f.support_radius * n)) + 1
    ax = np.arange(-kmax - 1, kmax + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    idx = np.stack([m.ravel() for m in mesh], axis=1)
    lo = idx / n
    hi = lo + 1.0 / n
    # discard cells that miss the support ball
    near = np.linalg.norm(np.clip(0.0, lo, hi), axis=1) <= f.support_radius
    idx, lo = idx[near], lo[near]
    t = np.linspace(0.0, 1.0, samples_per_axis)
    offs = np.stack([m.ravel() for m in np.meshgrid(*([t] * d), indexing="ij")], axis=1) / n
    pts = lo[:, None, :] + offs[None, :, :]
    vals = f(pts.reshape(-1, d)).reshape(len(lo), -1).max(axis=1)
    closest = np.clip(0.0, lo, lo + 1.0 / n)
    vals = np.maximum(vals, f(closest))
    return StaircaseFunction(n, idx, vals, d, f.support_radius)


def staircase_upper_norm(st: StaircaseFunction, S: InteractionWindow, power: int = 2) -> tuple[float, np.ndarray]:
    """Upper bound of ||u_n||_S^power from cells whose closures admit S^c differences.

    Requires cells small enough that two points of one cell always differ by
    an element of S (one point per cell).
    """
    st = st.nonzero()
    n, d = st.n, st.dim
    if math.sqrt(d) / n >= S.inradius:
        raise ValueError("cells too coarse: one cell could host two separated points")
    lo, hi = st.cell_bounds()
    w = st.values**power

    def compatible(i, rest):
        dlo = lo[rest] - hi[i]
        dhi = hi[rest] - lo[i]
        return np.array([S.box_meets_complement(a, b, closed=True) for a, b in zip(dlo, dhi)], bool)

    if isinstance(S, (Ball, Box)):
        def compatible(i, rest):  # noqa: F811 - vectorized closure test
            far = np.maximum(np.abs(lo[rest] - hi[i]), np.abs(hi[rest] - lo[i]))
            if isinstance(S, Ball):
                return np.linalg.norm(far, axis=1) >= S.r
            return np.any(far >= np.asarray(S.half_widths), axis=1)

    cap = packing_cap(st.support_radius, S, d)
    # closures of cells sharing a box of side s span at most s + 1/n per axis
    groups = conflict_groups(lo, 0.99 * S.inradius / math.sqrt(d) - 1.0 / n)
    value, idx = max_weight_packing(lo, w, compatible, cap, groups)
    return value, st.index[idx]


@dataclass(frozen=True)
class Upper2Row:
    n: int
    eps: float
    lower: float
    upper: float
    target: float

    @property
    def gap(self) -> float:
        return self.upper - self.target


def upper2_convergence(u, S: InteractionWindow, b: float, ns: Sequence[int], target: float | None = None,
                       sub: int = 8, target_resolution: float = 1e-3) -> list[Upper2Row]:
    """||u_n||^2 on the eroded windows S_{b/n} against ||u||_S^2.

    For each n the staircase norm is bracketed: ``lower`` from the sub-lattice
    of mesh 1/(n sub) aligned with the cells, ``upper`` from the cell-closure
    search.
    """
    f = as_bump(u)
    if target is None:
        target = norm_u_S(f, S, target_resolution).value
    rows = []
    for n in ns:
        eps = b / n
        Se = erode(S, eps)
        st = staircase(f, n)
        lower = norm_u_S(st, Se, 1.0 / (n * sub)).value
        upper, _ = staircase_upper_norm(st, Se)
        rows.append(Upper2Row(int(n), eps, lower, upper, target))
    return rows


def hardcore_floor(u0: SingleSitePotential, R: float, n: int = 64) -> float:
    """A constant beta with V_eta >= beta for every configuration with pair distances > R.

    -V_eta(x) is a sum of u over points pairwise separated by at least R, so
    beta = -(upper bound of the linear packing sup), taken from the staircase
    cell search.
    """
    f = Bump.from_potential(u0)
    st = staircase(f, n)
    value, _ = staircase_upper_norm(st, Ball(R, u0.dim), power=1)
    return -value
