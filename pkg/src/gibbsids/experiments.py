"""Named experiments driven by an :class:`ExperimentConfig`.

Each runner returns an :class:`ExperimentOutput`: CSV tables, optional plain
text artifacts, and a list of PASS/FAIL checks with their margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds, packing, sampler, schrodinger
from .config import ConfigError, ExperimentConfig
from .io import ESTIMATOR_HEADER, IDS_HEADER, NORM_HEADER, format_points
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
    potential_field,
)


@dataclass
class Table:
    name: str
    header: tuple
    rows: list


@dataclass
class Check:
    name: str
    passed: bool
    margin: float = math.nan
    threshold: float = math.nan
    detail: str = ""

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: margin={self.margin:.6g} threshold={self.threshold:.6g} {self.detail}".rstrip()


@dataclass
class ExperimentOutput:
    tables: list[Table] = field(default_factory=list)
    texts: dict[str, str] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_model(cfg: ExperimentConfig):
    kind = cfg["model.phi"]
    a, R, p = cfg["model.a"], cfg["model.R"], cfg["model.p"]
    if kind == "none":
        return Pairwise(NoInteraction())
    if kind == "strauss":
        return Pairwise(Strauss(a, R))
    if kind == "hardcore":
        return Pairwise(Hardcore(R))
    if kind == "softshell":
        return Pairwise(SoftShell(p, R))
    if kind == "tabulated":
        k = np.asarray(cfg["model.knots"], float).reshape(-1, 2)
        return Pairwise(Tabulated(tuple(k[:, 0]), tuple(k[:, 1])))
    if kind == "area":
        return AreaEnergy(R)
    raise ConfigError(f"model.phi: {kind}")


def build_potential(cfg: ExperimentConfig) -> SingleSitePotential:
    d = cfg["geometry.d"]
    shape = cfg["potential.shape"]
    if shape == "triangular":
        return SingleSitePotential.triangular(cfg["potential.depth"], cfg["potential.radius"], d)
    if shape == "cosine":
        return SingleSitePotential.cosine(cfg["potential.depth"], cfg["potential.radius"], d)
    k = np.asarray(cfg["potential.knots"], float).reshape(-1, 2)
    return SingleSitePotential.radial(k[:, 0], k[:, 1], d)


def build_window(cfg: ExperimentConfig, radius: float | None = None) -> packing.InteractionWindow:
    d = cfg["geometry.d"]
    r = radius if radius is not None else cfg["packing.radius"][0]
    if cfg["packing.S"] == "ball":
        return packing.Ball(r, d)
    hw = cfg["packing.radius"]
    return packing.Box(tuple(hw if len(hw) == d else [hw[0]] * d))


def _seed(cfg: ExperimentConfig) -> np.random.SeedSequence:
    return np.random.SeedSequence(cfg.seed)


def _ids_table(est: schrodinger.IdsEstimate) -> Table:
    return Table("ids", IDS_HEADER, list(est.rows()))


def _fit_table(fit: bounds.SlopeFit) -> Table:
    inwin = np.zeros(len(fit.lambdas), bool)
    inwin[fit.window] = True
    rows = [(float(fit.lambdas[i]), float(fit.ordinates[i]), float(fit.ordinate_low[i]),
             float(fit.ordinate_high[i]), bool(fit.valid[i]), bool(inwin[i])) for i in range(len(fit.lambdas))]
    rows.append(("plateau", fit.plateau, fit.plateau_ci[0], fit.plateau_ci[1], True, True))
    rows.append(("target", fit.target, fit.target, fit.target, True, True))
    return Table(f"{fit.kind}_fit", ("lambda", "ordinate", "ordinate_low", "ordinate_high", "valid", "in_window"),
                 rows)


def _fit_window(cfg):
    w = cfg["fit.window"]
    return None if w is None else (min(w), max(w))


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def run_poisson_ids(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    u0 = build_potential(cfg)
    d, L = cfg["geometry.d"], cfg["geometry.L"]
    target = sampler.PoissonTarget(BoxDomain.centered(L, d), cfg["model.z"])
    est = schrodinger.estimate_ids(target, u0, cfg.lambdas(), L, cfg["geometry.h"], cfg["sampler.replicas"],
                                   _seed(cfg), jobs=jobs, model_id="poisson")
    fit = bounds.pastur_slope_fit(est, u0, _fit_window(cfg), cfg["fit.max_rel_ci"])
    f = cfg["fit.tolerance_factor"]
    ratio = fit.plateau / fit.target
    check = Check("pastur ordinate within factor of -1/u0(0)", 1 / f <= ratio <= f,
                  margin=min(ratio - 1 / f, f - ratio), threshold=f, detail=f"plateau={fit.plateau:.6g}")
    return ExperimentOutput([_ids_table(est), _fit_table(fit)], {}, [check])


def run_strauss_ids(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    u0 = build_potential(cfg)
    d, L = cfg["geometry.d"], cfg["geometry.L"]
    model = build_model(cfg)
    target = sampler.GibbsTarget(model, BoxDomain.centered(L, d))
    est = schrodinger.estimate_ids(target, u0, cfg.lambdas(), L, cfg["geometry.h"], cfg["sampler.replicas"],
                                   _seed(cfg), jobs=jobs, thinning=cfg["sampler.thinning"],
                                   chains=cfg["sampler.chains"], model_id="strauss")
    res = (cfg["packing.resolution"] or [1e-2])[0]
    norm = packing.norm_u_S(u0, packing.Ball(cfg["model.R"], d), res)
    fit = bounds.quadratic_slope_fit(est, cfg["model.a"], norm.value, _fit_window(cfg), cfg["fit.max_rel_ci"])
    checks = [
        Check("quadratic ordinate negative", fit.plateau < 0, margin=-fit.plateau, threshold=0.0),
        Check("quadratic ordinate stabilizing", fit.relative_spread < cfg["fit.max_spread"],
              margin=cfg["fit.max_spread"] - fit.relative_spread, threshold=cfg["fit.max_spread"]),
    ]
    return ExperimentOutput([_ids_table(est), _fit_table(fit)], {}, checks)


def run_hardcore_floor(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    u0 = build_potential(cfg)
    d, L, h, R = cfg["geometry.d"], cfg["geometry.L"], cfg["geometry.h"], cfg["model.R"]
    beta = packing.hardcore_floor(u0, R, cfg["packing.floor_cells"])
    target = sampler.GibbsTarget(build_model(cfg), BoxDomain.centered(L, d))
    samples = schrodinger.sample_configurations(target, u0, L, cfg["sampler.replicas"], _seed(cfg),
                                                thinning=cfg["sampler.thinning"], chains=cfg["sampler.chains"])
    grid = schrodinger.Grid(BoxDomain.centered(L, d), h)
    nodes = grid.nodes()
    vmins = np.array([potential_field(nodes, c, u0).min() for c in samples])
    est = schrodinger.estimate_ids(target, u0, cfg.lambdas(), L, h, len(samples), _seed(cfg), jobs=jobs,
                                   model_id="hardcore", samples=samples)
    below = est.lambdas < beta
    worst_count = int(est.counts[:, below].max()) if np.any(below) else 0
    rows = [(i, float(v), beta) for i, v in enumerate(vmins)]
    checks = [
        Check("sampled V above packing floor", bool(np.all(vmins >= beta - 1e-12)),
              margin=float(vmins.min() - beta), threshold=beta),
        Check("no eigenvalue below floor", worst_count == 0, margin=-float(worst_count), threshold=beta,
              detail=f"lambdas_below={int(below.sum())}"),
    ]
    return ExperimentOutput([_ids_table(est), Table("floor", ("replica", "min_V", "floor"), rows)], {}, checks)


def run_tail_sandwich(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    model = build_model(cfg)
    win = BoxDomain.from_bounds(cfg["window.lower"], cfg["window.upper"])
    R = model.range
    box = win.padded(R)
    target = sampler.GibbsTarget(model, box)
    res = sampler.sample_gibbs(target, cfg["sampler.samples"], _seed(cfg), thinning=cfg["sampler.thinning"],
                               burn_in=cfg["sampler.burn_in"], chains=cfg["sampler.chains"])
    counts = res.samples.counts(win)
    tau = sampler.integrated_autocorr_time(counts)
    pmf = sampler.estimate_count_pmf(res.samples, win, effective_samples=len(counts) / tau)
    strauss = isinstance(model, Pairwise) and isinstance(model.phi, Strauss)
    rows, checks = [], []
    for n in range(cfg["window.n_max"] + 1):
        idx = np.nonzero(pmf.n == n)[0]
        hits = int(pmf.hits[idx[0]]) if len(idx) else 0
        p = float(pmf.probability[idx[0]]) if len(idx) else 0.0
        lo_ci = float(pmf.ci_low[idx[0]]) if len(idx) else 0.0
        hi_ci = float(pmf.ci_high[idx[0]]) if len(idx) else 0.0
        lower = bounds.tail_lower_bound(win, n, model)
        upper = bounds.tail_upper_bound([win], [n], model.phi.a) if strauss else math.nan
        with np.errstate(divide="ignore"):
            lp, llo, lhi = (math.log(x) if x > 0 else -math.inf for x in (p, lo_ci, hi_ci))
        ok = lower <= lhi and (not strauss or llo <= upper)
        rows.append((n, hits, lower, lp, llo, lhi, upper, ok if hits >= cfg["window.min_hits"] else ""))
        if hits >= cfg["window.min_hits"]:
            margin = min(lhi - lower, (upper - llo) if strauss else math.inf)
            checks.append(Check(f"tail sandwich n={n}", ok, margin=margin, threshold=0.0))
    if not checks:
        checks.append(Check("tail sandwich", False, detail="no count reached the hit threshold"))
    header = ("n", "hits", "log_lower", "log_empirical", "log_ci_low", "log_ci_high", "log_upper", "checked_ok")
    est_rows = list(pmf.rows(cfg.seed))
    return ExperimentOutput([Table("sandwich", header, rows), Table("count_pmf", ESTIMATOR_HEADER, est_rows)],
                            {}, checks)


def _cells(cfg: ExperimentConfig) -> list[BoxDomain]:
    d = cfg["geometry.d"]
    flat = np.asarray(cfg["window.cells"], float)
    if len(flat) % (2 * d):
        raise ConfigError("window.cells needs 2*d numbers per cell (lower corner then upper corner)")
    return [BoxDomain.from_bounds(c[:d], c[d:]) for c in flat.reshape(-1, 2 * d)]


def run_laplace_bound(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    d = cfg["geometry.d"]
    cells = _cells(cfg)
    v = np.asarray(cfg["window.v"], float)
    a, R, eps = cfg["model.a"], cfg["model.R"], cfg["schedule.eps"]
    S = packing.Ball(R, d)
    coef = bounds.upper_lap_bound(cells, v, S, a)
    lo = np.min([c.lower for c in cells], axis=0)
    hi = np.max([c.upper for c in cells], axis=0)
    box = BoxDomain.from_bounds(lo, hi).padded(R + cfg["geometry.padding"])
    res = sampler.sample_gibbs(sampler.GibbsTarget(build_model(cfg), box), cfg["sampler.samples"], _seed(cfg),
                               thinning=cfg["sampler.thinning"], burn_in=cfg["sampler.burn_in"],
                               chains=cfg["sampler.chains"])

    def vfun(x):
        out = np.zeros(len(x))
        for c, w in zip(cells, v):
            out += w * c.contains(x, closed=False)
        return out

    rows, checks, est_rows = [], [], []
    for t in cfg["schedule.t"]:
        est = sampler.laplace_functional_mc(res.samples, vfun, t, effective_samples=res.ess)
        est_rows.append(est.row(cfg.seed))
        ratio_low = est.log_ci_low / t**2
        bound = (1 + eps) * coef
        ok = ratio_low <= bound
        rows.append((t, est.log_mean / t**2, ratio_low, est.log_ci_high / t**2, coef, bound, ok))
        checks.append(Check(f"laplace bound t={t:g}", ok, margin=bound - ratio_low, threshold=bound))
    header = ("t", "log_laplace_over_t2", "ci_low_over_t2", "ci_high_over_t2", "coefficient", "bound", "holds")
    return ExperimentOutput([Table("laplace", header, rows), Table("laplace_mc", ESTIMATOR_HEADER, est_rows)],
                            {}, checks)


def _edge_list(text: str):
    edges = []
    for tok in text.split():
        i, j = tok.split("-")
        edges.append((int(i), int(j)))
    return edges


def run_intlem_scan(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    c, v = cfg["intlem.c"], cfg["intlem.v"]
    I = _edge_list(cfg["intlem.edges"])
    grid = np.geomspace(cfg["intlem.t_min"], cfg["intlem.t_max"], cfg["intlem.t_num"])
    rows, checks = [], []
    for eps in cfg["intlem.eps"]:
        rep = bounds.find_validity_threshold(c, v, I, eps, grid)
        for t, g, b in zip(rep.grid, rep.lattice_sum, rep.bound):
            rows.append((eps, "scan", t, g, b, bool(g <= b)))
        ok = rep.finite
        margin = math.nan
        if ok:
            T = rep.threshold
            ver = np.geomspace(T, 10 * T, cfg["intlem.verify_points"] + 1)[1:]
            gaps = []
            for t in ver:
                g = bounds.gaussian_lattice_sum(c, v, I, t)
                b = bounds.int_lem_bound(c, v, I, t, eps)
                rows.append((eps, "verify", t, g, b, bool(g <= b)))
                gaps.append(b - g)
            margin = float(min(gaps))
            ok = margin >= 0
        checks.append(Check(f"lattice-sum bound beyond threshold (eps={eps:g})", ok, margin=margin,
                            threshold=rep.threshold, detail=f"violations_below={len(rep.violations)}"))
    header = ("eps", "phase", "t", "log_sum", "log_bound", "holds")
    return ExperimentOutput([Table("intlem", header, rows)], {}, checks)


def run_norm_S(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    u0 = build_potential(cfg)
    S = build_window(cfg)
    s_id = f"{cfg['packing.S']}{cfg['packing.radius'][0]:g}"
    rows, wits, checks = [], [], []
    for res in sorted(cfg["packing.resolution"], reverse=True):
        r = packing.norm_u_S(u0, S, res)
        rows.append(r.row(u0.name, s_id))
        wits.append(r.witness)
        checks.append(Check(f"witness feasible (resolution={res:g})", r.witness.is_feasible()
                            and len(r.witness) <= r.cap, margin=r.cap - len(r.witness), threshold=r.cap))
        checks.append(Check(f"singleton floor (resolution={res:g})", r.value >= u0.at_origin**2 - 1e-12,
                            margin=r.value - u0.at_origin**2, threshold=u0.at_origin**2))
    text = "".join(format_points(w.points, 12) + "\n" for w in wits)
    return ExperimentOutput([Table("norm", NORM_HEADER, rows)], {"packings.txt": text}, checks)


def run_upper2_scan(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    u0 = build_potential(cfg)
    S = build_window(cfg)
    res = (cfg["packing.resolution"] or [1e-3])[0]
    rows = packing.upper2_convergence(u0, S, cfg["packing.b"], cfg["packing.n"], target_resolution=res)
    table = [(r.n, r.eps, r.lower, r.upper, r.target, r.gap) for r in rows]
    worst = min(r.lower - r.target for r in rows)
    checks = [Check("staircase norms dominate the continuum norm", worst >= -1e-12, margin=worst, threshold=0.0)]
    return ExperimentOutput([Table("upper2", ("n", "eps", "lower", "upper", "target", "gap"), table)], {}, checks)


def run_weak_budget(cfg: ExperimentConfig, jobs: int) -> ExperimentOutput:
    model = build_model(cfg)
    rows = []
    for x in cfg["weak.x"]:
        n = int(math.ceil(cfg["weak.n_factor"] * x))
        b = bounds.weak_condition_budget(model, n, x, cfg["weak.d"])
        rows.append((b.x, b.n, b.budget, b.ratio))
    ratios = np.array([r[3] for r in sorted(rows)])
    steps = np.diff(ratios)
    ok = bool(np.all(steps < 0))
    checks = [Check("budget ratio decays along x", ok, margin=float(-steps.max()) if len(steps) else math.nan,
                    threshold=0.0)]
    return ExperimentOutput([Table("weak", ("x", "n", "budget", "ratio"), rows)], {}, checks)


RUNNERS = {
    "poisson-ids": run_poisson_ids,
    "strauss-ids": run_strauss_ids,
    "hardcore-floor": run_hardcore_floor,
    "tail-sandwich": run_tail_sandwich,
    "laplace-bound": run_laplace_bound,
    "intlem-scan": run_intlem_scan,
    "norm-S": run_norm_S,
    "upper2-scan": run_upper2_scan,
    "weak-budget": run_weak_budget,
}


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentOutput:
    return RUNNERS[cfg.kind](cfg, jobs)
