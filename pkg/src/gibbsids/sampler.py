"""Poisson sampling, birth-death-move Metropolis-Hastings for finite-volume
Gibbs specifications, and Monte Carlo estimators built on sample batches."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import _kernels
from .pointproc import (
    AreaEnergy,
    BoxDomain,
    InteractionModel,
    NoInteraction,
    Pairwise,
    PointConfiguration,
    SingleSitePotential,
    conditional_energy,
    local_energy,
)

CHUNK = 1 << 16


class HeavyTailWarning(RuntimeWarning):
    """The Laplace functional estimate rests on very few samples."""


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# Targets and sample batches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GibbsTarget:
    """P_{window, boundary}: density exp(-U_window(eta + boundary)) against unit Poisson."""

    model: InteractionModel
    window: BoxDomain
    boundary: PointConfiguration | None = None
    move_radius: float | None = None

    def __post_init__(self):
        if self.boundary is not None and len(self.boundary):
            if np.any(self.window.contains(self.boundary.points, closed=False)):
                raise ValueError("boundary points must lie outside the window")

    @property
    def boundary_points(self) -> np.ndarray:
        if self.boundary is None:
            return np.empty((0, self.window.dim))
        return np.ascontiguousarray(self.boundary.points)

    @property
    def step_radius(self) -> float:
        if self.move_radius is not None:
            return self.move_radius
        if self.model.range > 0:
            return self.model.range / 2
        return 0.25 * min(self.window.side_lengths)

    @property
    def domination_intensity(self) -> float:
        return self.model.domination_intensity


@dataclass(frozen=True)
class PoissonTarget:
    window: BoxDomain
    intensity: float = 1.0

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")


class SampleBatch:
    """Immutable batch of configurations stored as flat coordinates plus offsets."""

    def __init__(self, coords: np.ndarray, counts: np.ndarray, domain: BoxDomain, seed=None):
        self.domain = domain
        self.coords = np.asarray(coords, float).reshape(-1, domain.dim)
        self.sizes = np.asarray(counts, np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        if self.offsets[-1] != len(self.coords):
            raise ValueError("counts do not match the number of coordinates")
        self.seed = seed
        self.coords.setflags(write=False)

    def __len__(self) -> int:
        return len(self.sizes)

    def __getitem__(self, i: int) -> PointConfiguration:
        if i < 0:
            i += len(self)
        a, b = self.offsets[i], self.offsets[i + 1]
        return PointConfiguration(self.coords[a:b], self.domain, validate=False)

    def __iter__(self) -> Iterator[PointConfiguration]:
        for i in range(len(self)):
            yield self[i]

    @property
    def sample_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), self.sizes)

    def counts(self, window: BoxDomain | None = None) -> np.ndarray:
        """M_window for every sample (the whole batch domain by default)."""
        if window is None:
            return self.sizes.copy()
        inside = window.contains(self.coords)
        return np.bincount(self.sample_index[inside], minlength=len(self)).astype(np.int64)

    def linear_statistic(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """sum_j f(x_j) for every sample."""
        if len(self.coords) == 0:
            return np.zeros(len(self))
        vals = np.asarray(f(self.coords), float)
        return np.bincount(self.sample_index, weights=vals, minlength=len(self))

    @staticmethod
    def concatenate(batches: Sequence["SampleBatch"]) -> "SampleBatch":
        batches = list(batches)
        dom = batches[0].domain
        return SampleBatch(
            np.concatenate([b.coords for b in batches]) if batches else np.empty((0, dom.dim)),
            np.concatenate([b.sizes for b in batches]),
            dom,
        )

    def min_pair_distance(self) -> float:
        """Smallest within-sample pair distance across the batch (inf if none)."""
        best = math.inf
        for i in np.nonzero(self.sizes >= 2)[0]:
            p = self.coords[self.offsets[i]:self.offsets[i + 1]]
            dist = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
            dist[np.diag_indices(len(p))] = np.inf
            best = min(best, float(dist.min()))
        return best


# ---------------------------------------------------------------------------
# Poisson sampling
# ---------------------------------------------------------------------------


def sample_poisson(window: BoxDomain, intensity: float, rng) -> PointConfiguration:
    """One realization of the Poisson process with the given intensity on ``window``."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    rng = as_rng(rng)
    n = rng.poisson(intensity * window.volume)
    pts = window.lower + rng.random((n, window.dim)) * np.asarray(window.side_lengths)
    return PointConfiguration(pts, window, validate=False)


def sample_poisson_batch(window: BoxDomain, intensity: float, size: int, rng) -> SampleBatch:
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    rng = as_rng(rng)
    counts = rng.poisson(intensity * window.volume, size)
    pts = window.lower + rng.random((int(counts.sum()), window.dim)) * np.asarray(window.side_lengths)
    return SampleBatch(pts, counts, window)


# ---------------------------------------------------------------------------
# Birth-death-move chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainState:
    configuration: PointConfiguration
    step: int = 0
    stream_id: int = 0


def _ball_displacements(rng: np.random.Generator, m: int, d: int, radius: float) -> np.ndarray:
    if d == 1:
        return (2 * rng.random((m, 1)) - 1) * radius
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random((m, 1)) ** (1.0 / d))


def _draw(rng: np.random.Generator, m: int, target: GibbsTarget):
    win = target.window
    uni = rng.random((m, 3))
    loc = win.lower + rng.random((m, win.dim)) * np.asarray(win.side_lengths)
    disp = _ball_displacements(rng, m, win.dim, target.step_radius)
    return uni, loc, disp


def _energy_with_boundary(x, others, target: GibbsTarget) -> float:
    win = target.window
    bnd = target.boundary_points
    conf = PointConfiguration(np.vstack([np.asarray(others, float).reshape(-1, win.dim), bnd]),
                              _hull(win, bnd), validate=False)
    return local_energy(x, conf, target.model)


def birth_acceptance(x, points, target: GibbsTarget) -> float:
    """min(1, |Lambda| e^{-h(x, eta + gamma)} / (n + 1)) for adding ``x`` to ``points``."""
    e = _energy_with_boundary(x, points, target)
    if e == math.inf:
        return 0.0
    return min(1.0, target.window.volume * math.exp(-e) / (len(points) + 1))


def death_acceptance(j: int, points, target: GibbsTarget) -> float:
    """min(1, n e^{h(x_j, eta - x_j + gamma)} / |Lambda|) for removing point ``j``."""
    pts = np.asarray(points, float).reshape(len(points), -1)
    others = np.delete(pts, j, axis=0)
    e = _energy_with_boundary(pts[j], others, target)
    return min(1.0, len(pts) * math.exp(e) / target.window.volume)


def move_acceptance(j: int, x_new, points, target: GibbsTarget) -> float:
    """min(1, e^{-(h_new - h_old)}) for moving point ``j`` to ``x_new`` inside the window."""
    pts = np.asarray(points, float).reshape(len(points), -1)
    win = target.window
    x_new = np.asarray(x_new, float)
    if np.any(x_new < win.lower) or np.any(x_new > win.upper):
        return 0.0
    others = np.delete(pts, j, axis=0)
    e_new = _energy_with_boundary(x_new, others, target)
    if e_new == math.inf:
        return 0.0
    e_old = _energy_with_boundary(pts[j], others, target)
    return min(1.0, math.exp(e_old - e_new))


def target_density(points, target: GibbsTarget) -> float:
    """Unnormalized density exp(-U_Lambda(eta + gamma)) with respect to the unit Poisson process."""
    win = target.window
    pts = np.asarray(points, float).reshape(-1, win.dim)
    bnd = target.boundary_points
    conf = PointConfiguration(np.vstack([pts, bnd]), _hull(win, bnd), validate=False)
    return math.exp(-conditional_energy(conf, win, target.model))


def _python_steps(pts: list, target: GibbsTarget, uni, loc, disp, acc, record=None):
    """Reference implementation of the kernel's step semantics for any model."""
    for s in range(len(uni)):
        t = uni[s, 0]
        n = len(pts)
        if t < 1 / 3:
            acc[0, 0] += 1
            if uni[s, 2] < birth_acceptance(loc[s], pts, target):
                pts.append(loc[s].copy())
                acc[0, 1] += 1
        elif t < 2 / 3:
            acc[1, 0] += 1
            if n:
                j = min(int(uni[s, 1] * n), n - 1)
                if uni[s, 2] < death_acceptance(j, pts, target):
                    pts[j] = pts[-1]
                    pts.pop()
                    acc[1, 1] += 1
        else:
            acc[2, 0] += 1
            if n:
                j = min(int(uni[s, 1] * n), n - 1)
                x = pts[j] + disp[s]
                if uni[s, 2] < move_acceptance(j, x, pts, target):
                    pts[j] = x
                    acc[2, 1] += 1
        if record is not None:
            record(s, pts)


def _hull(win: BoxDomain, bnd: np.ndarray) -> BoxDomain:
    if len(bnd) == 0:
        return win
    lo = np.minimum(win.lower, bnd.min(axis=0))
    hi = np.maximum(win.upper, bnd.max(axis=0))
    return BoxDomain.from_bounds(lo, hi)


def mcmc_step(state: ChainState, target: GibbsTarget, rng) -> ChainState:
    """One birth (1/3), death (1/3) or move (1/3) Metropolis-Hastings update."""
    rng = as_rng(rng)
    uni, loc, disp = _draw(rng, 1, target)
    pts = [p.copy() for p in state.configuration.points]
    _python_steps(pts, target, uni, loc, disp, np.zeros((3, 2), np.int64))
    conf = PointConfiguration(np.asarray(pts).reshape(-1, target.window.dim), target.window, validate=False)
    return ChainState(conf, state.step + 1, state.stream_id)


@dataclass
class ChainResult:
    samples: SampleBatch
    acceptance: dict
    final_state: ChainState
    tau: float
    ess: float
    seed: object = None


def integrated_autocorr_time(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's self-consistent window."""
    x = np.asarray(x, float)
    n = len(x)
    if n < 4 or np.var(x) == 0:
        return 1.0
    y = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, m)
    acf = np.fft.irfft(f * np.conj(f), m)[:n]
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= c * taus
    w = int(np.argmax(window)) if np.any(window) else n - 1
    return float(max(taus[w], 1.0))


def _use_kernel(model) -> bool:
    return isinstance(model, Pairwise)


def run_chain(
    target: GibbsTarget,
    steps: int,
    burn_in: int = 0,
    thinning: int = 10,
    rng=None,
    initial: PointConfiguration | None = None,
    stream_id: int = 0,
    observe: BoxDomain | None = None,
    force_python: bool = False,
) -> ChainResult:
    """Run one chain for ``steps`` total updates and keep every ``thinning``-th
    state after ``burn_in``.

    The effective sample size reported alongside is computed from the
    autocorrelation of the point count in ``observe`` (the target window by
    default).
    """
    if burn_in >= steps:
        raise ValueError(f"burn_in ({burn_in}) must be smaller than steps ({steps})")
    if thinning < 1:
        raise ValueError("thinning must be >= 1")
    seed = rng if not isinstance(rng, np.random.Generator) else None
    rng = as_rng(rng)
    win = target.window
    d = win.dim
    pts0 = np.empty((0, d)) if initial is None else np.asarray(initial.points, float).reshape(-1, d)
    acc = np.zeros((3, 2), np.int64)
    out_coords: list[np.ndarray] = []
    out_counts: list[np.ndarray] = []

    if _use_kernel(target.model) and not force_python:
        kind, par, kr, kv = target.model.phi.kernel_params()
        cap = max(64, 4 * int(win.volume) + 32, 2 * len(pts0))
        buf = np.zeros((cap, d))
        buf[: len(pts0)] = pts0
        n = len(pts0)
        bnd = np.ascontiguousarray(target.boundary_points, dtype=float)
        lo = np.ascontiguousarray(win.lower)
        hi = np.ascontiguousarray(win.upper)
        rmax = float(target.model.range)
        done = 0
        while done < steps:
            m = min(CHUNK, steps - done)
            uni, loc, disp = _draw(rng, m, target)
            # phase: index of the global step so that recording starts after burn-in
            start = 0
            while start < m:
                g0 = done + start
                if g0 + (m - start) <= burn_in:
                    thin, phase = 0, 0
                    sub_end = m
                elif g0 < burn_in:
                    thin, phase = 0, 0
                    sub_end = start + (burn_in - g0)
                else:
                    thin = thinning
                    phase = (g0 - burn_in) % thinning
                    # keep the record buffer below ~4M coordinates
                    sub_end = min(m, start + max(thinning, (4_000_000 // buf.shape[0]) * thinning))
                u_s, l_s, d_s = uni[start:sub_end], loc[start:sub_end], disp[start:sub_end]
                max_rec = (len(u_s) // thinning + 1) if thin else 0
                o_pts = np.empty((max(max_rec, 1) * buf.shape[0], d))
                o_n = np.empty(max(max_rec, 1), np.int64)
                status, s_done, n, n_rec, n_coord = _kernels.pairwise_chain(
                    buf, n, bnd, u_s, l_s, d_s, lo, hi, win.volume, kind, par, kr, kv, rmax,
                    thin, phase, o_pts, o_n, acc)
                out_coords.append(o_pts[:n_coord].copy())
                out_counts.append(o_n[:n_rec].copy())
                start += s_done
                if status == _kernels.FULL:
                    bigger = np.zeros((2 * buf.shape[0], d))
                    bigger[:n] = buf[:n]
                    buf = bigger
            done += m
        final = buf[:n].copy()
    else:
        pts = [p.copy() for p in pts0]
        done = 0
        rec_c: list[np.ndarray] = []
        rec_n: list[int] = []
        while done < steps:
            m = min(CHUNK, steps - done)
            uni, loc, disp = _draw(rng, m, target)
            base = done

            def record(s, cur, base=base):
                g = base + s
                if g >= burn_in and (g - burn_in) % thinning == thinning - 1:
                    rec_n.append(len(cur))
                    if cur:
                        rec_c.append(np.asarray(cur).reshape(-1, d).copy())

            _python_steps(pts, target, uni, loc, disp, acc, record)
            done += m
        out_coords = rec_c or [np.empty((0, d))]
        out_counts = [np.asarray(rec_n, np.int64)]
        final = np.asarray(pts).reshape(-1, d)

    batch = SampleBatch(np.concatenate(out_coords) if out_coords else np.empty((0, d)),
                        np.concatenate(out_counts) if out_counts else np.empty(0, np.int64),
                        win, seed=seed)
    series = batch.counts(observe)
    tau = integrated_autocorr_time(series)
    acceptance = {
        name: (int(acc[i, 1]) / acc[i, 0] if acc[i, 0] else float("nan"))
        for i, name in enumerate(("birth", "death", "move"))
    }
    state = ChainState(PointConfiguration(final, win, validate=False), steps, stream_id)
    return ChainResult(batch, acceptance, state, tau, len(batch) / tau, seed)


def sample_gibbs(target: GibbsTarget, n_samples: int, rng, thinning: int = 10,
                 burn_in: int | None = None, chains: int = 1) -> ChainResult:
    """``n_samples`` thinned draws split over ``chains`` independent chains.

    The default burn-in is 10^4 times the expected Poisson count of the
    window (at least 10^4 steps). Streams are spawned from one seed sequence
    so the result depends only on (seed, chains).
    """
    if burn_in is None:
        burn_in = int(max(1e4, 1e4 * target.window.volume))
    seq = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    per = [n_samples // chains + (1 if i < n_samples % chains else 0) for i in range(chains)]
    results = [
        run_chain(target, burn_in + k * thinning, burn_in, thinning, np.random.default_rng(s), stream_id=i)
        for i, (k, s) in enumerate(zip(per, seq.spawn(chains)))
        if k > 0
    ]
    batch = SampleBatch.concatenate([r.samples for r in results])
    acc = {k: float(np.nanmean([r.acceptance[k] for r in results])) for k in results[0].acceptance}
    tau = float(np.mean([r.tau for r in results]))
    return ChainResult(batch, acc, results[-1].final_state, tau, len(batch) / tau, seq.entropy)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def wilson_interval(k, n, z: float = 1.959963984540054):
    """Wilson score interval; ``k`` and ``n`` may be non-integer (effective counts)."""
    k = np.asarray(k, float)
    p = k / n
    den = 1 + z * z / n
    center = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return np.clip(center - half, 0, 1), np.clip(center + half, 0, 1)


@dataclass(frozen=True)
class CountPmfEstimate:
    n: np.ndarray
    hits: np.ndarray
    probability: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_samples: int
    effective_samples: float

    def prob(self, n: int) -> float:
        idx = np.nonzero(self.n == n)[0]
        return float(self.probability[idx[0]]) if len(idx) else 0.0

    def rows(self, seed=None):
        for i in range(len(self.n)):
            yield ("count_pmf", int(self.n[i]), float(self.probability[i]), float(self.ci_low[i]),
                   float(self.ci_high[i]), self.n_samples, seed)


def estimate_count_pmf(samples: SampleBatch, window: BoxDomain | None = None,
                       effective_samples: float | None = None) -> CountPmfEstimate:
    """Empirical law of M_window with Wilson 95% intervals.

    Pass ``effective_samples`` (e.g. the chain ESS) to widen the intervals for
    autocorrelated streams.
    """
    if len(samples) == 0:
        raise ValueError("empty sample stream")
    counts = samples.counts(window)
    hits = np.bincount(counts)
    n_vals = np.arange(len(hits))
    total = len(counts)
    n_eff = float(total if effective_samples is None else min(effective_samples, total))
    p = hits / total
    lo, hi = wilson_interval(p * n_eff, n_eff)
    return CountPmfEstimate(n_vals, hits, p, lo, hi, total, n_eff)


def _as_function(u) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(u, SingleSitePotential):
        return u.reflected
    return u


@dataclass(frozen=True)
class LaplaceEstimate:
    t: float
    log_mean: float
    log_ci_low: float
    log_ci_high: float
    log_se: float
    weight_ess: float
    n_samples: int
    unstable: bool

    @property
    def mean(self) -> float:
        return math.exp(self.log_mean)

    def row(self, seed=None):
        return ("log_laplace", self.t, self.log_mean, self.log_ci_low, self.log_ci_high, self.n_samples, seed)


def laplace_functional_mc(samples: SampleBatch, u, t: float, effective_samples: float | None = None,
                          z: float = 1.959963984540054) -> LaplaceEstimate:
    """Monte Carlo estimate of E exp(t sum_j u(x_j)).

    ``u`` is the nonnegative reflected single-site potential (or any
    nonnegative function of position). Aggregation uses a max shift; the
    log-scale interval comes from a jackknife of the log mean.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    n = len(samples)
    if n == 0:
        raise ValueError("empty sample stream")
    if t == 0:
        return LaplaceEstimate(0.0, 0.0, 0.0, 0.0, 0.0, float(n), n, False)
    s = t * samples.linear_statistic(_as_function(u))
    lse = logsumexp(s)
    log_mean = lse - math.log(n)
    w = np.exp(s - s.max())
    ess_w = float(w.sum() ** 2 / np.sum(w * w))
    # leave-one-out log means
    tot = w.sum()
    loo = np.log(np.maximum(tot - w, 1e-300)) + s.max() - math.log(n - 1) if n > 1 else np.array([log_mean])
    n_eff = n if effective_samples is None else min(effective_samples, n)
    if n > 1:
        jk_var = (n - 1) / n * np.sum((loo - loo.mean()) ** 2)
        jk_var *= n / n_eff
    else:
        jk_var = math.inf
    log_se = math.sqrt(jk_var)
    unstable = ess_w < 10
    if unstable:
        warnings.warn(f"Laplace functional at t={t} is dominated by {ess_w:.1f} samples", HeavyTailWarning,
                      stacklevel=2)
    return LaplaceEstimate(float(t), float(log_mean), float(log_mean - z * log_se), float(log_mean + z * log_se),
                           float(log_se), ess_w, n, unstable)


def poisson_laplace_closed_form(u, t: float, z: float, window: BoxDomain, log: bool = False,
                                epsrel: float = 1e-8) -> float:
    """exp(z * integral over window of (exp(t u(x)) - 1) dx) by adaptive quadrature."""
    if t == 0:
        return 0.0 if log else 1.0
    f = _as_function(u)
    d = window.dim
    lo, hi = window.lower, window.upper
    if d == 1:
        brk = [0.0] if lo[0] < 0 < hi[0] else None
        val, _ = integrate.quad(lambda x: math.expm1(t * float(f(np.array([[x]]))[0])), lo[0], hi[0],
                                epsrel=epsrel, epsabs=0, limit=200, points=brk)
    else:
        def g(*x):
            return math.expm1(t * float(f(np.array([x]))[0]))

        val, _ = integrate.nquad(g, [(lo[k], hi[k]) for k in range(d)],
                                 opts={"epsrel": epsrel, "epsabs": 1e-12, "limit": 100})
    return z * val if log else math.exp(z * val)


@dataclass(frozen=True)
class CountFunctional:
    """f(eta) = M_window(eta); increasing."""

    window: BoxDomain | None = None
    increasing: bool = field(default=True, init=False)

    def __call__(self, conf: PointConfiguration) -> float:
        return float(len(conf) if self.window is None else conf.count_in(self.window))

    def evaluate_batch(self, batch: SampleBatch) -> np.ndarray:
        return batch.counts(self.window).astype(float)


@dataclass(frozen=True)
class LinearFunctional:
    """f(eta) = sum_j u(x_j) for nonnegative u; increasing."""

    u: Callable
    increasing: bool = field(default=True, init=False)

    def __call__(self, conf: PointConfiguration) -> float:
        if len(conf) == 0:
            return 0.0
        return float(np.sum(_as_function(self.u)(conf.points)))

    def evaluate_batch(self, batch: SampleBatch) -> np.ndarray:
        return batch.linear_statistic(_as_function(self.u))


@dataclass(frozen=True)
class DominationReport:
    mean_gibbs: float
    se_gibbs: float
    mean_poisson: float
    se_poisson: float

    @property
    def sigma(self) -> float:
        return math.hypot(self.se_gibbs, self.se_poisson)

    @property
    def holds(self) -> bool:
        return self.mean_gibbs <= self.mean_poisson + 3 * self.sigma

    @property
    def margin(self) -> float:
        return self.mean_poisson + 3 * self.sigma - self.mean_gibbs


def _evaluate(f, batch: SampleBatch) -> np.ndarray:
    if hasattr(f, "evaluate_batch"):
        return np.asarray(f.evaluate_batch(batch), float)
    return np.array([f(c) for c in batch], float)


def check_domination(samples_gibbs: SampleBatch, samples_poisson: SampleBatch, f,
                     increasing: bool | None = None, ess_gibbs: float | None = None,
                     rng=0) -> DominationReport:
    """Compare E_gibbs[f] with E_poisson[f] for an increasing functional ``f``.

    ``f`` must be declared increasing (argument or ``f.increasing``); the
    declaration is spot-checked by deleting points from a few samples.
    """
    declared = increasing if increasing is not None else getattr(f, "increasing", None)
    if not declared:
        raise ValueError("f must be declared increasing")
    rng = as_rng(rng)
    for batch in (samples_gibbs, samples_poisson):
        nonempty = np.nonzero(batch.sizes > 0)[0]
        for i in rng.choice(nonempty, size=min(10, len(nonempty)), replace=False) if len(nonempty) else []:
            conf = batch[i]
            smaller = conf.remove(int(rng.integers(len(conf))))
            if f(smaller) > f(conf) + 1e-12:
                raise ValueError("f is not increasing: deleting a point increased its value")
    g = _evaluate(f, samples_gibbs)
    p = _evaluate(f, samples_poisson)
    n_g = len(g) if ess_gibbs is None else min(ess_gibbs, len(g))
    return DominationReport(float(g.mean()), float(g.std(ddof=1) / math.sqrt(n_g)),
                            float(p.mean()), float(p.std(ddof=1) / math.sqrt(len(p))))


def partition_bounds(window: BoxDomain | float, a: float) -> tuple[float, float]:
    """Bounds e^{-|L|} <= Z_L(gamma) <= exp(|L| (e^{-a} - 1)) for local energy >= a."""
    vol = window.volume if isinstance(window, BoxDomain) else float(window)
    if not vol > 0:
        raise ValueError("window must have positive volume")
    upper = math.exp(vol * math.expm1(-a)) if a < math.inf else math.exp(-vol)
    return math.exp(-vol), upper


def null_target(window: BoxDomain) -> GibbsTarget:
    """Gibbs target with U = 0 (unit Poisson)."""
    return GibbsTarget(Pairwise(NoInteraction()), window)
