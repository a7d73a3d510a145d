import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from gibbsids.pointproc import (
    AreaEnergy,
    BoxDomain,
    Hardcore,
    NoInteraction,
    Pairwise,
    PointConfiguration,
    SingleSitePotential,
    SoftShell,
    Strauss,
    Tabulated,
)
from gibbsids.sampler import (
    CountFunctional,
    GibbsTarget,
    HeavyTailWarning,
    LinearFunctional,
    SampleBatch,
    birth_acceptance,
    check_domination,
    death_acceptance,
    estimate_count_pmf,
    integrated_autocorr_time,
    laplace_functional_mc,
    mcmc_step,
    ChainState,
    move_acceptance,
    null_target,
    partition_bounds,
    poisson_laplace_closed_form,
    run_chain,
    sample_gibbs,
    sample_poisson,
    sample_poisson_batch,
    target_density,
)

UNIT = BoxDomain.from_bounds([0.0], [1.0])
TRI = SingleSitePotential.triangular(1.0, 1.0)


def chi2_vs_poisson(counts, mean, tau=1.0):
    """Pearson statistic against Poisson(mean), cells with expected >= 5, scaled by tau."""
    n = len(counts)
    kmax = 0
    while n * stats.poisson.pmf(kmax + 1, mean) >= 5:
        kmax += 1
    obs = np.array([np.sum(counts == k) for k in range(kmax)] + [np.sum(counts >= kmax)], float)
    exp = n * np.append(stats.poisson.pmf(np.arange(kmax), mean), stats.poisson.sf(kmax - 1, mean))
    stat = np.sum((obs - exp) ** 2 / exp) / tau
    return stats.chi2.sf(stat, len(obs) - 1)


# --- Poisson sampling ------------------------------------------------------------------


def test_sample_poisson_single_draw():
    c = sample_poisson(BoxDomain.centered(2.0, 2), 3.0, 5)
    assert c.dim == 2
    assert np.all(c.domain.contains(c.points))
    with pytest.raises(ValueError):
        sample_poisson(UNIT, 0.0, 1)


def test_poisson_batch_mean_and_pmf():
    b = sample_poisson_batch(UNIT, 1.0, 100_000, 11)
    assert abs(b.sizes.mean() - 1.0) <= 3 * math.sqrt(1.0 / 100_000)
    assert chi2_vs_poisson(b.sizes, 1.0) > 0.01
    pmf = estimate_count_pmf(b)
    i = 1
    assert pmf.ci_low[i] <= math.exp(-1) <= pmf.ci_high[i]
    b2 = sample_poisson_batch(BoxDomain.from_bounds([0, 0], [1, 1]), 2.0, 50_000, 3)
    assert abs(b2.sizes.mean() - 2.0) <= 3 * math.sqrt(2.0 / 50_000)


# --- acceptance ratios and detailed balance ------------------------------------------------

MODELS = [
    Pairwise(Strauss(1.0, 0.4)),
    Pairwise(Strauss(0.3, 2.0)),
    Pairwise(SoftShell(1.0, 0.5)),
    Pairwise(Tabulated((0.0, 0.3, 0.6), (2.0, 1.0, 0.0))),
    Pairwise(Hardcore(0.2)),
    AreaEnergy(0.3),
]

pts_strategy = st.lists(st.floats(0.0, 1.0), min_size=0, max_size=4, unique=True)


def spread(xs):
    xs = sorted(xs)
    return all(b - a > 1e-6 for a, b in zip(xs, xs[1:]))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: type(getattr(m, "phi", m)).__name__)
@settings(max_examples=40, deadline=None)
@given(xs=pts_strategy, x=st.floats(0.0, 1.0), boundary=st.booleans())
def test_birth_death_detailed_balance(model, xs, x, boundary):
    if not spread(xs + [x]):
        return
    gamma = PointConfiguration(np.array([[1.15]]), BoxDomain.centered(4.0, 1)) if boundary else None
    target = GibbsTarget(model, UNIT, gamma)
    eta = np.array(xs).reshape(-1, 1)
    eta_x = np.vstack([eta, [[x]]])
    f0 = target_density(eta, target)
    f1 = target_density(eta_x, target)
    if f0 == 0:
        return  # infeasible states are never visited
    # flow eta -> eta + x (birth density 1/|Lambda|) equals the reverse death flow (pick 1/(n+1))
    forward = f0 / UNIT.volume * birth_acceptance([x], eta, target)
    backward = f1 / len(eta_x) * death_acceptance(len(eta_x) - 1, eta_x, target)
    assert forward == pytest.approx(backward, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("model", MODELS[:4] + MODELS[5:], ids=str)
@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=4, unique=True), y=st.floats(0.0, 1.0))
def test_move_detailed_balance(model, xs, y):
    if not spread(xs + [y]):
        return
    target = GibbsTarget(model, UNIT)
    eta = np.array(xs).reshape(-1, 1)
    moved = eta.copy()
    moved[0, 0] = y
    forward = target_density(eta, target) * move_acceptance(0, [y], eta, target)
    backward = target_density(moved, target) * move_acceptance(0, eta[0], moved, target)
    assert forward == pytest.approx(backward, rel=1e-12)


def test_hardcore_acceptances_are_zero_into_infeasible_states():
    target = GibbsTarget(Pairwise(Hardcore(0.5)), UNIT)
    eta = np.array([[0.2]])
    assert birth_acceptance([0.4], eta, target) == 0.0
    assert move_acceptance(0, [0.5], np.array([[0.2], [0.9]]), target) == 0.0
    assert move_acceptance(0, [1.5], eta, target) == 0.0  # outside the window


def test_boundary_must_lie_outside_window():
    with pytest.raises(ValueError):
        GibbsTarget(Pairwise(Strauss(1.0, 1.0)), UNIT, PointConfiguration(np.array([[0.5]]), UNIT))


# --- chains --------------------------------------------------------------------------------


def test_null_interaction_chain_is_poisson():
    r = sample_gibbs(null_target(UNIT), 50_000, 7, thinning=20, chains=4)
    assert chi2_vs_poisson(r.samples.sizes, 1.0, r.tau) > 0.01


def test_null_interaction_chain_2d_window():
    r = sample_gibbs(null_target(BoxDomain.from_bounds([0, 0], [2, 1])), 20_000, 8, thinning=20, chains=2)
    assert chi2_vs_poisson(r.samples.sizes, 2.0, r.tau) > 0.01


def strauss_oracle(a, R, nmax=3):
    """Z_n = (1/n!) * integral over [0,1]^n of exp(-U), by nested quadrature with breakpoints."""

    def w(x, y):
        return math.exp(-a) if abs(x - y) <= R else 1.0

    def pts(*ys):
        return [p for y in ys for p in (y - R, y + R) if 0 < p < 1] or None

    z = [1.0, 1.0]
    z2, _ = integrate.quad(lambda y: integrate.quad(lambda x: w(x, y), 0, 1, points=pts(y))[0], 0, 1,
                           points=[R, 1 - R], epsabs=1e-12)
    z.append(z2 / 2)
    if nmax >= 3:
        def seg(y):
            return max(0.0, y - R), min(1.0, y + R)

        def inner(y, v):
            # exact x-integral: the integrand is constant on the pieces cut by the two neighbourhoods
            (a0, a1), (b0, b1) = seg(y), seg(v)
            both = max(0.0, min(a1, b1) - max(a0, b0))
            one = (a1 - a0) + (b1 - b0) - 2 * both
            return (both * math.exp(-2 * a) + one * math.exp(-a) + (1 - one - both)) * w(y, v)

        z3, _ = integrate.dblquad(lambda y, v: inner(y, v), 0, 1, 0, 1, epsabs=1e-11)
        z.append(z3 / 6)
    return np.array(z)


def test_strauss_oracle_sanity():
    # R >= 1: every pair interacts, so Z_n = e^{-a C(n,2)} / n!
    np.testing.assert_allclose(strauss_oracle(1.0, 1.0), [1, 1, math.exp(-1) / 2, math.exp(-3) / 6], rtol=1e-9)
    # n = 2 with R = 0.5: P(|x - y| <= 1/2) = 3/4
    assert strauss_oracle(1.0, 0.5, 2)[2] == pytest.approx((0.75 * math.exp(-1) + 0.25) / 2, rel=1e-10)


@pytest.mark.parametrize("R", [1.0, 0.5])
def test_strauss_chain_matches_quadrature(R):
    z = strauss_oracle(1.0, R)
    p = z / z.sum()  # law of M conditioned on M <= 3
    r = sample_gibbs(GibbsTarget(Pairwise(Strauss(1.0, R)), UNIT), 200_000, 21, thinning=20, chains=4)
    m = r.samples.sizes
    keep = m <= 3
    n = keep.sum()
    obs = np.bincount(m[keep], minlength=4)
    stat = np.sum((obs - n * p) ** 2 / (n * p)) / r.tau
    assert stats.chi2.sf(stat, 3) > 0.01
    np.testing.assert_allclose(obs / n, p, rtol=0, atol=float(np.max(4 * np.sqrt(p * (1 - p) * r.tau / n))))


def test_hardcore_chain_never_violates_exclusion():
    target = GibbsTarget(Pairwise(Hardcore(0.3)), BoxDomain.from_bounds([0, 0], [3, 3]))
    r = run_chain(target, 200_000, 1000, 10, 3)
    assert r.samples.min_pair_distance() > 0.3
    assert max(r.samples.sizes) > 5


def test_hardcore_feasibility_absorbing_from_feasible_start():
    target = GibbsTarget(Pairwise(Hardcore(0.5)), BoxDomain.from_bounds([0], [4]))
    init = PointConfiguration(np.array([[0.2], [1.0], [2.5]]), target.window)
    r = run_chain(target, 20_000, 0, 1, 4, initial=init)
    assert r.samples.min_pair_distance() > 0.5


def test_run_chain_contract():
    target = GibbsTarget(Pairwise(Strauss(1.0, 0.3)), UNIT)
    r = run_chain(target, 500, 0, 1, 9)
    assert len(r.samples) == 500
    assert run_chain(target, 1000, 100, 10, 9).samples.sizes.shape == (90,)
    a = run_chain(target, 5000, 100, 7, 123)
    b = run_chain(target, 5000, 100, 7, 123)
    np.testing.assert_array_equal(a.samples.coords, b.samples.coords)
    np.testing.assert_array_equal(a.samples.sizes, b.samples.sizes)
    assert a.ess > 0 and a.tau >= 1
    with pytest.raises(ValueError):
        run_chain(target, 100, 100, 1, 0)


@pytest.mark.parametrize("model", [Pairwise(Strauss(1.0, 0.3)), Pairwise(Hardcore(0.1)),
                                   Pairwise(Tabulated((0.0, 0.2), (1.0, 0.0))), Pairwise(SoftShell(2.0, 0.4))],
                         ids=str)
def test_compiled_and_reference_paths_agree(model):
    target = GibbsTarget(model, BoxDomain.from_bounds([0], [2]),
                         PointConfiguration(np.array([[2.1]]), BoxDomain.centered(6.0, 1)))
    a = run_chain(target, 3000, 100, 3, 42)
    b = run_chain(target, 3000, 100, 3, 42, force_python=True)
    np.testing.assert_array_equal(a.samples.sizes, b.samples.sizes)
    np.testing.assert_allclose(a.samples.coords, b.samples.coords, rtol=0, atol=0)


def test_area_energy_chain_runs_on_reference_path():
    target = GibbsTarget(AreaEnergy(0.2), UNIT)
    r = run_chain(target, 3000, 500, 5, 1)
    assert len(r.samples) == 500
    assert np.all(r.samples.sizes >= 0)


def test_mcmc_step_advances_state():
    target = GibbsTarget(Pairwise(Strauss(1.0, 0.3)), UNIT)
    s = ChainState(PointConfiguration.empty(UNIT))
    for _ in range(50):
        s = mcmc_step(s, target, np.random.default_rng(len(s.configuration) + s.step))
    assert s.step == 50


def test_autocorrelation_time_of_white_noise_is_about_one():
    x = np.random.default_rng(0).standard_normal(20000)
    assert integrated_autocorr_time(x) == pytest.approx(1.0, abs=0.1)
    ar = np.zeros(20000)
    e = np.random.default_rng(1).standard_normal(20000)
    for i in range(1, len(ar)):
        ar[i] = 0.9 * ar[i - 1] + e[i]
    assert integrated_autocorr_time(ar) == pytest.approx(19.0, rel=0.25)  # (1 + 0.9) / (1 - 0.9)


# --- estimators ----------------------------------------------------------------------------------


def test_count_pmf_degenerate_stream():
    b = SampleBatch(np.empty((0, 1)), np.zeros(50, int), UNIT)
    pmf = estimate_count_pmf(b)
    assert pmf.prob(0) == 1.0
    assert pmf.prob(3) == 0.0
    with pytest.raises(ValueError):
        estimate_count_pmf(SampleBatch(np.empty((0, 1)), np.zeros(0, int), UNIT))


def test_count_pmf_probabilities_sum_to_one():
    pmf = estimate_count_pmf(sample_poisson_batch(UNIT, 2.0, 5000, 1))
    assert pmf.probability.sum() == pytest.approx(1.0)
    assert np.all(pmf.ci_low <= pmf.probability) and np.all(pmf.probability <= pmf.ci_high)


def test_laplace_t_zero_and_closed_form_examples():
    b = sample_poisson_batch(UNIT, 1.0, 10, 0)
    assert laplace_functional_mc(b, TRI, 0.0).mean == 1.0
    assert poisson_laplace_closed_form(TRI, 0.0, 1.0, UNIT) == 1.0
    one = lambda x: np.ones(len(x))  # noqa: E731
    assert poisson_laplace_closed_form(one, 1.0, 1.0, UNIT) == pytest.approx(math.exp(math.e - 1), rel=1e-10)


def test_closed_form_triangle_analytic():
    # integral over (-2, 2) of exp(t(1 - |x|)) - 1 on |x| <= 1 is 2 (e^t - 1 - t) / t
    t = 2.0
    expected = math.exp(2 * (math.exp(t) - 1 - t) / t)
    assert poisson_laplace_closed_form(TRI, t, 1.0, BoxDomain.centered(4.0, 1)) == pytest.approx(expected, rel=1e-8)


def test_closed_form_2d_against_polar_integral():
    u0 = SingleSitePotential.triangular(1.0, 1.0, dim=2)
    t = 1.0
    val, _ = integrate.quad(lambda r: 2 * math.pi * r * math.expm1(t * (1 - r)), 0, 1)
    got = poisson_laplace_closed_form(u0, t, 1.0, BoxDomain.centered(3.0, 2), log=True)
    assert got == pytest.approx(val, rel=1e-6)


def test_laplace_mc_agrees_with_closed_form():
    win = BoxDomain.centered(4.0, 1)
    b = sample_poisson_batch(win, 1.0, 100_000, 5)
    for t in (0.5, 2.0):
        est = laplace_functional_mc(b, TRI, t)
        exact = poisson_laplace_closed_form(TRI, t, 1.0, win, log=True)
        assert abs(est.log_mean - exact) <= 3 * est.log_se


def test_laplace_heavy_tail_warning():
    b = SampleBatch(np.array([[0.0]]), np.array([1] + [0] * 99), BoxDomain.centered(4.0, 1))
    with pytest.warns(HeavyTailWarning):
        est = laplace_functional_mc(b, TRI, 30.0)
    assert est.unstable


def test_domination_examples():
    win = BoxDomain.from_bounds([0], [2])
    g = sample_gibbs(GibbsTarget(Pairwise(Strauss(1.0, 0.5)), win), 20_000, 1, thinning=20, chains=2)
    p = sample_poisson_batch(win, 1.0, 20_000, 2)
    rep = check_domination(g.samples, p, CountFunctional(), ess_gibbs=g.ess)
    assert rep.holds and rep.mean_gibbs < rep.mean_poisson
    lin = check_domination(g.samples, p, LinearFunctional(TRI), ess_gibbs=g.ess)
    assert lin.holds
    const = check_domination(g.samples, p, lambda c: 3.0, increasing=True)
    assert const.mean_gibbs == const.mean_poisson == 3.0
    null = sample_gibbs(null_target(win), 20_000, 3, thinning=20, chains=2)
    rep0 = check_domination(null.samples, p, CountFunctional(), ess_gibbs=null.ess)
    assert abs(rep0.mean_gibbs - rep0.mean_poisson) <= 3 * rep0.sigma


def test_domination_rejects_undeclared_or_decreasing_functionals():
    p = sample_poisson_batch(UNIT, 3.0, 200, 2)
    with pytest.raises(ValueError):
        check_domination(p, p, lambda c: -len(c))
    with pytest.raises(ValueError):
        check_domination(p, p, lambda c: -float(len(c)), increasing=True)


def test_partition_bounds_examples():
    lo, hi = partition_bounds(UNIT, 0.0)
    assert (lo, hi) == pytest.approx((0.367879, 1.0), abs=1e-6)
    assert partition_bounds(UNIT, 1.0)[1] == pytest.approx(0.531, abs=1e-3)
    lo, hi = partition_bounds(2.0, math.inf)
    assert hi == lo == math.exp(-2)
    assert partition_bounds(2.0, 40.0)[1] == pytest.approx(math.exp(-2), rel=1e-15)


def test_partition_bounds_bracket_exact_strauss_partition_function():
    # R >= diameter: Z = e^{-1} * sum_n e^{-a C(n,2)} / n!, local energy >= 0
    z = math.exp(-1) * sum(math.exp(-n * (n - 1) / 2) / math.factorial(n) for n in range(30))
    lo, hi = partition_bounds(UNIT, 0.0)
    assert lo <= z <= hi
