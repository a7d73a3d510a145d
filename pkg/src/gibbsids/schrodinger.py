"""Dirichlet finite-difference discretization of -Laplacian + V and eigenvalue
counting by inertia.

The count of eigenvalues <= lambda equals the number of negative pivots in a
symmetric factorization of ``H - lambda`` (Sylvester's law of inertia). In one
dimension the operator is tridiagonal and the pivots form a Sturm sequence;
in higher dimensions the operator is block tridiagonal along the last axis and
the inertia is accumulated over the Schur complements of the blocks, each
factorized with Bunch-Kaufman.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _kernels
from .pointproc import BoxDomain, PointConfiguration, SingleSitePotential, potential_field
from .sampler import GibbsTarget, PoissonTarget, sample_gibbs, sample_poisson_batch, SampleBatch


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid of interior nodes of a box with spacing ``h``."""

    domain: BoxDomain
    spacing: float

    def __post_init__(self):
        h = self.spacing
        if not h > 0:
            raise ValueError("grid spacing must be positive")
        for s in self.domain.side_lengths:
            k = round(s / h)
            if k < 2 or abs(s / h - k) > 1e-12 * max(1.0, s / h) + 1e-12:
                raise ValueError(f"spacing {h} does not divide side length {s}")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(round(s / self.spacing) - 1 for s in self.domain.side_lengths)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[np.ndarray]:
        lo = self.domain.lower
        return [lo[k] + self.spacing * np.arange(1, n + 1) for k, n in enumerate(self.shape)]

    def nodes(self) -> np.ndarray:
        """Node coordinates, C order (last axis fastest), shape ``(size, d)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class DiscreteOperator:
    """H = -Laplacian_h + V on a grid; diagonal 2d/h^2 + V, couplings -1/h^2."""

    grid: Grid
    potential: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.potential, float).reshape(self.grid.shape)
        v.setflags(write=False)
        object.__setattr__(self, "potential", v)

    @property
    def coupling(self) -> float:
        return 1.0 / self.grid.spacing**2

    @property
    def diagonal(self) -> np.ndarray:
        return 2 * self.grid.dim * self.coupling + self.potential

    @property
    def scale(self) -> float:
        """Upper bound of the operator norm."""
        return float(np.max(np.abs(self.diagonal)) + 2 * self.grid.dim * self.coupling)

    def to_sparse(self) -> sp.csr_matrix:
        shape = self.grid.shape
        c = self.coupling
        mats = []
        for k, n in enumerate(shape):
            t = sp.diags([-c * np.ones(n - 1), 2 * c * np.ones(n), -c * np.ones(n - 1)], [-1, 0, 1])
            left = sp.identity(int(np.prod(shape[:k])))
            right = sp.identity(int(np.prod(shape[k + 1:])))
            mats.append(sp.kron(sp.kron(left, t), right))
        lap = mats[0]
        for m in mats[1:]:
            lap = lap + m
        return (lap + sp.diags(self.potential.ravel())).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def shifted(self, c: float) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, self.potential + c)

    def dump_triplets(self, path) -> None:
        """Write the nonzeros as ``i j value`` lines."""
        coo = self.to_sparse().tocoo()
        with open(path, "w", newline="\n") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def discretize(config: PointConfiguration | np.ndarray, u0: SingleSitePotential, grid: Grid) -> DiscreteOperator:
    return DiscreteOperator(grid, potential_field(grid.nodes(), config, u0))


def free_operator(grid: Grid) -> DiscreteOperator:
    return DiscreteOperator(grid, np.zeros(grid.shape))


def dirichlet_laplacian_spectrum(grid: Grid) -> np.ndarray:
    """Sorted eigenvalues of the discrete Dirichlet Laplacian (closed form)."""
    h = grid.spacing
    per_axis = [4 / h**2 * np.sin(np.arange(1, n + 1) * np.pi / (2 * (n + 1))) ** 2 for n in grid.shape]
    total = per_axis[0]
    for ev in per_axis[1:]:
        total = np.add.outer(total, ev).ravel()
    return np.sort(total)


def _bk_negatives(a: np.ndarray) -> tuple[int, float]:
    """(negative eigenvalue count, smallest pivot magnitude) from a Bunch-Kaufman LDL^T."""
    _, dmat, _ = scipy.linalg.ldl(a, lower=True, hermitian=True, check_finite=False)
    n = dmat.shape[0]
    neg = 0
    small = math.inf
    i = 0
    while i < n:
        if i + 1 < n and dmat[i + 1, i] != 0.0:
            p, q, r = dmat[i, i], dmat[i + 1, i], dmat[i + 1, i + 1]
            det = p * r - q * q
            if det < 0:
                neg += 1
            elif p + r < 0:
                neg += 2
            small = min(small, abs(det) / max(abs(p), abs(r), abs(q)))
            i += 2
        else:
            if dmat[i, i] < 0:
                neg += 1
            small = min(small, abs(dmat[i, i]))
            i += 1
    return neg, small


def _block_counts(op: DiscreteOperator, lams: np.ndarray, tiny: float) -> tuple[np.ndarray, np.ndarray]:
    shape = op.grid.shape
    m = int(np.prod(shape[:-1]))
    nb = shape[-1]
    c = op.coupling
    # slab k holds the nodes with last index k; inside a slab the operator is the
    # (d-1)-dimensional stencil, slabs couple through -c * I
    diag = np.moveaxis(op.diagonal, -1, 0).reshape(nb, m)
    sub_shape = shape[:-1]
    inner = np.zeros((m, m))
    idx = np.arange(m).reshape(sub_shape)
    for k in range(len(sub_shape)):
        a = np.take(idx, np.arange(sub_shape[k] - 1), axis=k).ravel()
        b = np.take(idx, np.arange(1, sub_shape[k]), axis=k).ravel()
        inner[a, b] = -c
        inner[b, a] = -c
    counts = np.zeros(len(lams), np.int64)
    flagged = np.zeros(len(lams), bool)
    eye = np.eye(m)
    for i, lam in enumerate(lams):
        schur = inner + np.diag(diag[0] - lam)
        for k in range(nb):
            if k:
                schur = inner + np.diag(diag[k] - lam) - c * c * prev_inv
            neg, small = _bk_negatives(schur)
            counts[i] += neg
            if small < tiny:
                flagged[i] = True
                break
            if k + 1 < nb:
                prev_inv = scipy.linalg.solve(schur, eye, assume_a="sym", check_finite=False)
    return counts, flagged


def _raw_counts(op: DiscreteOperator, lams: np.ndarray, tiny: float):
    if op.grid.dim == 1:
        off2 = np.full(op.grid.size - 1, op.coupling**2)
        return _kernels.sturm_counts(np.ascontiguousarray(op.diagonal.ravel()), off2, lams, tiny)
    return _block_counts(op, lams, tiny)


def count_eigenvalues_leq(op: DiscreteOperator, lam, max_retries: int = 3):
    """Number of eigenvalues of ``op`` that are <= ``lam`` (scalar or array).

    A near-zero pivot means lambda sits (numerically) on an eigenvalue of a
    leading block; the count is then taken at ``lambda + 1e-9 * scale`` so an
    eigenvalue at lambda is included, retrying up to ``max_retries`` times.
    """
    scalar = np.ndim(lam) == 0
    lams = np.atleast_1d(np.asarray(lam, float))
    scale = op.scale
    tiny = 1e-13 * scale
    counts, flagged = _raw_counts(op, lams, tiny)
    counts = np.asarray(counts, np.int64)
    for attempt in range(1, max_retries + 1):
        if not np.any(flagged):
            break
        redo = np.nonzero(flagged)[0]
        c2, f2 = _raw_counts(op, lams[redo] + attempt * 1e-9 * scale, tiny)
        counts[redo] = c2
        flagged[redo] = f2
    else:
        if np.any(flagged):
            raise FactorizationError(f"zero pivot persists at lambda={lams[flagged]}")
    return int(counts[0]) if scalar else counts


# ---------------------------------------------------------------------------
# IDS estimation
# ---------------------------------------------------------------------------


@dataclass
class IdsEstimate:
    lambdas: np.ndarray
    n_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    L: float
    h: float
    replicas: int
    model_id: str = ""
    seed: object = None
    counts: np.ndarray | None = field(default=None, repr=False)
    volume: float = math.nan
    nodes: int = 0

    def rows(self):
        for i in range(len(self.lambdas)):
            yield (float(self.lambdas[i]), float(self.n_hat[i]), float(self.ci_low[i]), float(self.ci_high[i]),
                   self.L, self.h, self.replicas, self.model_id, self.seed)


def _summarize(counts: np.ndarray, vol: float, z: float = 1.959963984540054):
    """Mean normalized counts with a normal CI; for all-zero columns the
    rule-of-three style bound 3/replicas is used as the upper end."""
    r = counts.shape[0]
    dens = counts / vol
    mean = dens.mean(axis=0)
    se = dens.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.full(dens.shape[1], np.inf)
    lo = np.maximum(mean - z * se, 0.0)
    hi = mean + z * se
    zero = mean == 0
    hi[zero] = 3.0 / (r * vol)
    return mean, lo, hi


def _count_batch(args):
    coords, sizes, domain, u0, grid, lams = args
    batch = SampleBatch(coords, sizes, domain)
    out = np.empty((len(batch), len(lams)), np.int64)
    for i, conf in enumerate(batch):
        out[i] = count_eigenvalues_leq(discretize(conf, u0, grid), lams)
    return out


def sample_configurations(target, u0: SingleSitePotential, L: float, replicas: int, seed,
                          thinning: int = 200, chains: int = 4, burn_in: int | None = None) -> SampleBatch:
    """Configurations on Lambda_L padded by the u0 support and interaction range."""
    d = u0.dim
    pad = u0.support_radius + (target.model.range if isinstance(target, GibbsTarget) else 0.0)
    box = BoxDomain.centered(L + 2 * pad, d)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if isinstance(target, PoissonTarget):
        return sample_poisson_batch(box, target.intensity, replicas, np.random.default_rng(seq))
    padded = GibbsTarget(target.model, box, target.boundary, target.move_radius)
    return sample_gibbs(padded, replicas, seq, thinning=thinning, burn_in=burn_in, chains=chains).samples


def estimate_ids(target, u0: SingleSitePotential, lambdas, L: float, h: float, replicas: int, seed=0,
                 jobs: int = 1, thinning: int = 200, chains: int = 4, model_id: str = "",
                 samples: SampleBatch | None = None) -> IdsEstimate:
    """N_hat(lambda) = E #{eig <= lambda of H^D on Lambda_L} / |Lambda_L| over replicas.

    ``target`` is a :class:`PoissonTarget` or :class:`GibbsTarget` (its window
    is ignored; sampling happens on Lambda_L padded by the ranges). Counts do
    not depend on ``jobs``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if not L > 2 * u0.support_radius:
        raise ValueError("L must exceed twice the support radius of u0")
    lams = np.sort(np.asarray(lambdas, float))
    grid = Grid(BoxDomain.centered(L, u0.dim), h)
    if samples is None:
        samples = sample_configurations(target, u0, L, replicas, seed, thinning=thinning, chains=chains)
    counts = _count_all(samples, u0, grid, lams, jobs)
    vol = grid.domain.volume
    mean, lo, hi = _summarize(counts, vol)
    return IdsEstimate(lams, mean, lo, hi, L, h, len(samples), model_id,
                       seed if not isinstance(seed, np.random.SeedSequence) else seed.entropy, counts, vol, grid.size)


def _count_all(samples: SampleBatch, u0, grid: Grid, lams: np.ndarray, jobs: int) -> np.ndarray:
    n = len(samples)
    if jobs <= 1 or n < 2 * jobs:
        return _count_batch((samples.coords, samples.sizes, samples.domain, u0, grid, lams))
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    tasks = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        lo, hi = samples.offsets[a], samples.offsets[b]
        tasks.append((samples.coords[lo:hi], samples.sizes[a:b], samples.domain, u0, grid, lams))
    with ProcessPoolExecutor(jobs) as ex:
        parts = list(ex.map(_count_batch, tasks))
    return np.concatenate(parts)


def refinement_gap(target, u0, lambdas, L, h, replicas, seed=0, **kw) -> dict:
    """Run the same samples on spacings h and h/2 and report the largest N_hat gap."""
    samples = sample_configurations(target, u0, L, replicas, seed)
    a = estimate_ids(target, u0, lambdas, L, h, replicas, seed, samples=samples, **kw)
    b = estimate_ids(target, u0, lambdas, L, h / 2, replicas, seed, samples=samples, **kw)
    gap = np.abs(a.n_hat - b.n_hat)
    return {"coarse": a, "fine": b, "max_gap": float(gap.max()), "gap": gap}
