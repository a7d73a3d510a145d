"""Finite-n inequalities and tail-regime fits.

Everything here is cheap and deterministic: tail-probability sandwiches for
the particle count, a quadratic bound on Gaussian lattice sums and the Laplace-functional
bound built on it, budgets for the weak-interaction condition, and the two
ordinate transforms that separate the Pastur regime (log N ~ lambda log|lambda|)
from the quadratic regime (log N ~ lambda^2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .packing import InteractionWindow
from .pointproc import (
    AreaEnergy,
    BoxDomain,
    Hardcore,
    NoInteraction,
    Pairwise,
    SingleSitePotential,
    SoftShell,
    Strauss,
    Tabulated,
    unit_ball_volume,
)
from .schrodinger import IdsEstimate

MAX_LATTICE_DIM = 8


def _edges(I, k: int) -> list[tuple[int, int]]:
    """Normalize an edge list to sorted zero-based pairs (i < j)."""
    out = set()
    for i, j in I or ():
        i, j = int(i), int(j)
        if i == j or not (0 <= i < k and 0 <= j < k):
            raise ValueError(f"bad edge ({i}, {j}) for k={k}")
        out.add((min(i, j), max(i, j)))
    return sorted(out)


# ---------------------------------------------------------------------------
# Cell graphs
# ---------------------------------------------------------------------------


def max_weight_independent_set(k: int, edges, weights) -> tuple[float, tuple[int, ...]]:
    """Heaviest vertex set with no edge inside, by include/exclude recursion on a pivot."""
    w = np.asarray(weights, float)
    nbr = [set() for _ in range(k)]
    for i, j in _edges(edges, k):
        nbr[i].add(j)
        nbr[j].add(i)

    def rec(free: frozenset) -> tuple[float, tuple[int, ...]]:
        if not free:
            return 0.0, ()
        # isolated vertices (within free) are always taken
        iso = [v for v in free if not (nbr[v] & free)]
        if iso:
            val, s = rec(free - set(iso))
            return val + float(w[iso].sum()), tuple(sorted(s + tuple(iso)))
        v = max(free, key=lambda x: len(nbr[x] & free))
        a_val, a_set = rec(free - {v} - nbr[v])
        a_val += w[v]
        b_val, b_set = rec(free - {v})
        if a_val >= b_val:
            return a_val, tuple(sorted(a_set + (v,)))
        return b_val, b_set

    return rec(frozenset(range(k)))


@dataclass(frozen=True)
class InteractionGraph:
    """Cells with the edge set I (every difference lies in S) and the family K.

    K collects the index sets whose pairs each admit some difference in S^c;
    for box cells against Ball or Box windows both quantifiers are decided
    exactly from the difference box of each pair of cells.
    """

    cells: tuple[BoxDomain, ...]
    window: InteractionWindow
    I: tuple[tuple[int, int], ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        I = []
        for i, j in itertools.combinations(range(len(self.cells)), 2):
            lo, hi = self.difference_box(i, j)
            if self.window.box_inside(lo, hi):
                I.append((i, j))
        object.__setattr__(self, "I", tuple(I))

    @property
    def k(self) -> int:
        return len(self.cells)

    def difference_box(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.cells[i], self.cells[j]
        return a.lower - b.upper, a.upper - b.lower

    def separable(self, i: int, j: int) -> bool:
        """Some x in cell i and y in cell j have x - y outside S."""
        lo, hi = self.difference_box(i, j)
        return self.window.box_meets_complement(lo, hi, closed=False)

    def in_K(self, J) -> bool:
        return all(self.separable(i, j) for i, j in itertools.combinations(sorted(J), 2))

    def K(self) -> list[tuple[int, ...]]:
        """All members of K (exponential in k)."""
        return [J for r in range(self.k + 1) for J in itertools.combinations(range(self.k), r) if self.in_K(J)]

    def max_K_weight(self, weights) -> tuple[float, tuple[int, ...]]:
        # J in K  <=>  no pair of J is an edge of I
        return max_weight_independent_set(self.k, self.I, weights)

    def validate_cells(self) -> None:
        """Each cell must have all self-differences inside S."""
        for c in self.cells:
            side = np.asarray(c.side_lengths)
            if not self.window.box_inside(-side, side):
                x = c.lower
                y = c.upper
                raise ValueError(f"cell {c} violates the within-S condition: x={x}, y={y}, x-y={x - y}")


# ---------------------------------------------------------------------------
# Gaussian lattice sums
# ---------------------------------------------------------------------------


def _log_axis_sum(c: float, tv: float, N: int) -> tuple[float, float]:
    """log sum_{n=0}^N exp(-c n^2 + tv n) and a log bound for the tail n > N (N past the peak)."""
    n = np.arange(N + 1)
    head = float(logsumexp(-c * n**2 + tv * n))
    m = N + 1
    log_q = -c * (2 * m + 1) + tv
    if log_q >= 0:
        raise ValueError("truncation does not reach the decreasing part of the summand")
    tail = -c * m**2 + tv * m - math.log1p(-math.exp(log_q))
    return head, tail


def _lattice_head(c: float, tv: np.ndarray, edges, N: int) -> float:
    """log of the sum over {0..N}^k, chunked over the first axis."""
    k = len(tv)
    n = np.arange(N + 1, dtype=float)
    lin = [-c * n**2 + tv[j] * n for j in range(k)]

    def exponent(first: np.ndarray) -> np.ndarray:
        grids = np.meshgrid(first, *([n] * (k - 1)), indexing="ij", sparse=True)
        e = -c * grids[0] ** 2 + tv[0] * grids[0]
        for j in range(1, k):
            e = e + lin[j].reshape([-1 if a == j else 1 for a in range(k)])
        for i, j in edges:
            e = e - 2 * c * grids[i] * grids[j]
        return e

    step = max(1, int(4_000_000 // (N + 1) ** (k - 1)))
    parts = [float(logsumexp(exponent(n[s:s + step]))) for s in range(0, N + 1, step)]
    return float(logsumexp(parts))


def _lattice_tail(c: float, tv: np.ndarray, N: int) -> float:
    """log bound of the mass outside {0..N}^k, cross terms dropped (they are nonpositive)."""
    k = len(tv)
    axes = [_log_axis_sum(c, tv[j], N) for j in range(k)]
    full = [float(np.logaddexp(h, tl)) for h, tl in axes]
    return float(logsumexp([axes[j][1] + sum(full[i] for i in range(k) if i != j) for j in range(k)]))


def gaussian_lattice_sum(c: float, v, I=(), t: float = 0.0, truncation: int | None = None,
                         return_tail: bool = False, rel_tail: float = 1e-12):
    """log G(t) with G = sum_{n in N^k} exp(-c sum n_j^2 - 2c sum_I n_i n_j + t sum v_j n_j).

    Each axis starts truncated at ceil(t max v / (2c)) + ceil(40/sqrt(c))
    unless given. A rigorous bound of the discarded mass is added before
    taking the log; the bound drops the cross terms, so with edges present the
    truncation is widened until it is below ``rel_tail`` of the retained mass.
    With ``return_tail`` the log relative tail bound is returned as well.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    v = np.atleast_1d(np.asarray(v, float))
    k = len(v)
    if k > MAX_LATTICE_DIM:
        raise ValueError(f"k={k} exceeds {MAX_LATTICE_DIM}; the sum is exponential in k")
    if np.any(v <= 0):
        raise ValueError("weights v must be positive")
    edges = _edges(I, k)
    tv = t * v
    peak = int(math.ceil(max(tv.max(), 0.0) / (2 * c)))
    N = truncation if truncation is not None else peak + int(math.ceil(40 / math.sqrt(c)))
    N = max(N, peak)
    while True:
        head = _lattice_head(c, tv, edges, N)
        log_tail = _lattice_tail(c, tv, N)
        if truncation is not None or log_tail - head < math.log(rel_tail):
            break
        N = int(math.ceil(1.25 * N)) + 1
    total = float(np.logaddexp(head, log_tail))
    if return_tail:
        return total, log_tail - head
    return total


def int_lem_bound(c: float, v, I=(), t: float = 0.0, eps: float = 0.1) -> float:
    """(1 + eps) * max over independent sets J of sum_J v_j^2 * t^2 / (4c), log scale."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    v = np.atleast_1d(np.asarray(v, float))
    k = len(v)
    best = 0.0
    # exhaustive enumeration of subsets (k is small)
    edges = set(_edges(I, k))
    for mask in range(1 << k):
        J = [j for j in range(k) if mask >> j & 1]
        if any((a, b) in edges for a, b in itertools.combinations(J, 2)):
            continue
        best = max(best, float(np.sum(v[J] ** 2)))
    return (1 + eps) * best * t * t / (4 * c)


@dataclass(frozen=True)
class ThresholdReport:
    grid: np.ndarray
    lattice_sum: np.ndarray
    bound: np.ndarray
    threshold: float
    violations: np.ndarray

    @property
    def holds(self) -> np.ndarray:
        return self.lattice_sum <= self.bound

    @property
    def finite(self) -> bool:
        return math.isfinite(self.threshold)


def find_validity_threshold(c: float, v, I, eps: float, t_grid: Sequence[float]) -> ThresholdReport:
    """Smallest grid t from which the lattice sum stays below the bound on the rest of the grid.

    Violations below the threshold are expected (the inequality is asymptotic)
    and are returned. The threshold is +inf when the last grid point fails.
    """
    t_grid = np.sort(np.asarray(t_grid, float))
    if len(t_grid) < 2 or np.any(t_grid <= 0):
        raise ValueError("need a positive t grid with at least two points")
    G = np.array([gaussian_lattice_sum(c, v, I, t) for t in t_grid])
    B = np.array([int_lem_bound(c, v, I, t, eps) for t in t_grid])
    ok = G <= B
    if not ok[-1]:
        T = math.inf
    else:
        bad = np.nonzero(~ok)[0]
        T = float(t_grid[bad[-1] + 1]) if len(bad) else float(t_grid[0])
    return ThresholdReport(t_grid, G, B, T, t_grid[~ok])


def upper_lap_bound(cells: Sequence[BoxDomain], v, S: InteractionWindow, a: float, eps: float = 0.0) -> float:
    """(1 + eps) / (2a) * max_{J in K} sum_J v_j^2 for a step function sum v_j 1{cell j}.

    With the default ``eps = 0`` this is the bare coefficient of t^2.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    v = np.atleast_1d(np.asarray(v, float))
    graph = InteractionGraph(tuple(cells), S)
    if len(v) != graph.k:
        raise ValueError("one weight per cell is required")
    graph.validate_cells()
    best, _ = graph.max_K_weight(v**2)
    return (1 + eps) * best / (2 * a)


# ---------------------------------------------------------------------------
# Count-tail sandwich
# ---------------------------------------------------------------------------


def sup_energy(model, n: int, window: BoxDomain) -> float:
    """An upper bound of U over n points placed in ``window``."""
    if isinstance(model, AreaEnergy):
        ball = unit_ball_volume(window.dim) * model.R**window.dim
        return min(n * ball, window.parallel_volume(model.R))
    if n <= 1:
        return 0.0
    pairs = n * (n - 1) / 2
    if not isinstance(model, Pairwise):
        raise TypeError(f"unsupported model {model!r}")
    phi = model.phi
    if isinstance(phi, NoInteraction):
        return 0.0
    if isinstance(phi, Strauss):
        return phi.a * pairs
    if isinstance(phi, Hardcore):
        return math.inf
    if isinstance(phi, (SoftShell, Tabulated)):
        return pairs * phi.sup_on_ball(window.diameter)
    raise TypeError(f"no energy bound for {phi!r}")


def tail_lower_bound(window: BoxDomain, n: int, model, z: float | None = None, R: float | None = None) -> float:
    """log of e^{-z |Lambda_R|} |Lambda|^n / n! * exp(-sup U), a lower bound of P(M = n)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    z = model.domination_intensity if z is None else z
    R = model.range if R is None else R
    su = sup_energy(model, n, window)
    if math.isinf(su):
        return -math.inf
    vol = window.volume
    return -z * window.parallel_volume(R) + n * math.log(vol) - float(gammaln(n + 1)) - su


def tail_upper_bound(cells: Sequence[BoxDomain], counts, a: float, I=(), tight: bool = False) -> float:
    """log of e^{|Lambda|} prod |Lambda_j|^{n_j}/n_j! exp(-(a/2) sum n_j(n_j-1) - a sum_I n_i n_j).

    Valid when phi >= a on S and each cell's self-differences lie in S. With
    ``tight`` the factor e^{|Lambda|} is dropped: it cancels against the
    Poisson normalization.
    """
    n = np.asarray(counts, np.int64)
    if len(n) != len(cells):
        raise ValueError("one count per cell is required")
    vols = np.array([c.volume for c in cells])
    out = 0.0 if tight else float(vols.sum())
    out += float(np.sum(n * np.log(vols) - gammaln(n + 1)))
    out -= 0.5 * a * float(np.sum(n * (n - 1)))
    for i, j in _edges(I, len(cells)):
        out -= a * float(n[i] * n[j])
    return out


# ---------------------------------------------------------------------------
# Condition (W)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakBudget:
    x: float
    n: int
    budget: float
    ratio: float


def weak_condition_budget(model, n: int, x: float, dim: int = 1) -> WeakBudget:
    """Upper bound of sup U over n points in B(0, r(x)), with ratio budget / (x log x).

    AreaEnergy: |B(0,R)| n. SoftShell: C(n,2) sup_{|y| <= 2 r(x)} phi with
    r(x) = (log x)^{-1/p} / 2.
    """
    if not x > 1:
        raise ValueError("x must exceed 1")
    if isinstance(model, AreaEnergy):
        budget = unit_ball_volume(dim) * model.R**dim * n
    elif isinstance(model, Pairwise) and isinstance(model.phi, SoftShell):
        phi = model.phi
        diam = math.log(x) ** (-1.0 / phi.p)
        budget = n * (n - 1) / 2 * phi.sup_on_ball(diam)
    elif isinstance(model, Pairwise) and isinstance(model.phi, (Strauss, Hardcore)):
        raise ValueError(f"{type(model.phi).__name__} does not satisfy the weak-interaction condition")
    else:
        raise TypeError(f"no budget rule for {model!r}")
    return WeakBudget(float(x), int(n), float(budget), float(budget / (x * math.log(x))))


# ---------------------------------------------------------------------------
# Tail-slope fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    kind: str
    lambdas: np.ndarray
    ordinates: np.ndarray
    ordinate_low: np.ndarray
    ordinate_high: np.ndarray
    valid: np.ndarray
    window: np.ndarray
    plateau: float
    plateau_ci: tuple[float, float]
    target: float
    relative_spread: float

    @property
    def ratio_to_target(self) -> float:
        return self.plateau / self.target if self.target else math.nan


def _fit(ids: IdsEstimate, denom, kind: str, target: float, window, max_rel_ci: float) -> SlopeFit:
    lam = np.asarray(ids.lambdas, float)
    N = np.asarray(ids.n_hat, float)
    lo = np.asarray(ids.ci_low, float)
    hi = np.asarray(ids.ci_high, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        valid = (N > 0) & ((hi - lo) < max_rel_ci * N)
        if kind == "pastur":
            valid &= lam < -1
        d = denom(lam)
        ords = np.log(N) / d
        # d < 0 for pastur (lambda < -1) and > 0 for quadratic; order the bounds accordingly
        a = np.log(np.where(lo > 0, lo, np.nan)) / d
        b = np.log(hi) / d
    o_lo, o_hi = np.fmin(a, b), np.fmax(a, b)
    idx = np.nonzero(valid)[0]
    if window is None:
        if len(idx) == 0:
            raise ValueError("empty fit window: no lambda with positive, well-resolved N_hat")
        order = idx[np.argsort(lam[idx])]
        m = max(1, int(math.ceil(len(order) / 3)))
        win = np.sort(order[:m])
    else:
        w0, w1 = window
        win = idx[(lam[idx] >= w0) & (lam[idx] <= w1)]
        if len(win) == 0:
            raise ValueError(f"empty fit window [{w0}, {w1}]")
    vals = ords[win]
    plateau = float(np.mean(vals))
    ci = (float(np.nanmean(o_lo[win])), float(np.nanmean(o_hi[win])))
    spread = float((vals.max() - vals.min()) / abs(plateau)) if plateau != 0 else math.inf
    return SlopeFit(kind, lam, ords, o_lo, o_hi, valid, win, plateau, ci, float(target), spread)


def pastur_slope_fit(ids: IdsEstimate, u0, window: tuple[float, float] | None = None,
                     max_rel_ci: float = 0.5) -> SlopeFit:
    """Ordinates log N(lambda) / (lambda log|lambda|), compared with -1/u0(0)."""
    u00 = u0.at_origin if isinstance(u0, SingleSitePotential) else float(u0)
    if not u00 < 0:
        raise ValueError("u0(0) must be negative")
    return _fit(ids, lambda l: l * np.log(np.abs(l)), "pastur", -1.0 / u00, window, max_rel_ci)


def quadratic_slope_fit(ids: IdsEstimate, phi0: float, norm_u_S_value: float,
                        window: tuple[float, float] | None = None, max_rel_ci: float = 0.5) -> SlopeFit:
    """Ordinates log N(lambda) / lambda^2, compared with -phi(0) / (2 ||u||_S^2)."""
    if not norm_u_S_value > 0:
        raise ValueError("norm value must be positive")
    return _fit(ids, lambda l: l * l, "quadratic", -phi0 / (2 * norm_u_S_value), window, max_rel_ci)


def synthetic_ids(lambdas, log_n) -> IdsEstimate:
    """An exact (zero-width CI) IdsEstimate from a planted log N(lambda)."""
    lam = np.asarray(lambdas, float)
    N = np.exp(np.asarray(log_n, float))
    return IdsEstimate(lam, N, N.copy(), N.copy(), L=math.nan, h=math.nan, replicas=0, model_id="synthetic")


@dataclass(frozen=True)
class IdsBoundReport:
    lambdas: np.ndarray
    log_n: np.ndarray
    bound: np.ndarray
    best_t: np.ndarray
    holds: np.ndarray

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.holds))


def ids_upper_bound_check(ids: IdsEstimate, log_laplace: Mapping[float, float], slack: float = 0.0) -> IdsBoundReport:
    """log N_hat(lambda) <= min_t (lambda t + log L(t)) + slack, judged at the lower CI end.

    ``log_laplace`` maps t to an upper confidence value of
    log E exp(t sum_j u(x_j)). At t = 0 the bound is the log of the total
    normalized dimension count, which caps N_hat trivially.
    """
    lam = np.asarray(ids.lambdas, float)
    with np.errstate(divide="ignore"):
        logN = np.log(np.asarray(ids.n_hat, float))
        log_low = np.log(np.asarray(ids.ci_low, float))
    ts = sorted(log_laplace)
    if not ts:
        raise ValueError("empty t schedule")
    cand = np.empty((len(ts), len(lam)))
    for r, t in enumerate(ts):
        if t == 0:
            if not ids.nodes or not ids.volume > 0:
                raise ValueError("t = 0 needs the grid size and volume of the estimate")
            cand[r] = math.log(ids.nodes / ids.volume)
        else:
            cand[r] = lam * t + float(log_laplace[t])
    k = np.argmin(cand, axis=0)
    bound = cand[k, np.arange(len(lam))]
    return IdsBoundReport(lam, logN, bound, np.asarray(ts)[k], log_low <= bound + slack)
