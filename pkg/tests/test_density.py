import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from wavediv.density import (
    SampleSet,
    eval_density,
    fit_density,
    kernel_density,
    read_samples,
    resolution_level,
    sigma_hn,
    sup_distance,
    sup_grid,
    wavelet_empirical_process,
    write_density,
    write_samples,
)
from wavediv.oracles import parse_distribution, sample
from wavediv.quadrature import QuadratureRule
from wavediv.wavelets import project


def test_sample_set_invariants():
    with pytest.raises(ValueError):
        SampleSet([])
    with pytest.raises(ValueError):
        SampleSet([0.1, math.inf])
    s = SampleSet([3, 1, 2], "x")
    assert list(s.values) == [3.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        s.values[0] = 5.0


@pytest.mark.parametrize("n, j", [(16, 1), (256, 2), (1, 0), (500, 2), (4000, 3), (8000, 3), (2**16, 4)])
def test_resolution_level(n, j):
    assert resolution_level(n) == j


def test_resolution_level_is_nondecreasing():
    levels = [resolution_level(n) for n in range(1, 20000)]
    assert all(a <= b for a, b in zip(levels, levels[1:]))
    with pytest.raises(ValueError):
        resolution_level(0)


def test_single_haar_sample(haar):
    est = fit_density(SampleSet([0.0]), haar, level=0)
    assert np.allclose(est(np.array([0.0, 0.3, 0.999])), 1.0, atol=1e-12)
    assert est(1.5) == 0.0 and est(-0.5) == 0.0


def test_haar_half_mass(haar):
    est = fit_density(SampleSet([0.5, 1.5]), haar, level=0)
    assert eval_density(est, 0.25) == pytest.approx(0.5, abs=1e-12)


def test_far_outside_is_zero(d4, beta_pair):
    est = fit_density(sample(beta_pair[0], 300, 4), d4)
    assert est(50.0) == 0.0 and est(-50.0) == 0.0


def test_mass_of_a_beta_fit(d4, beta_pair):
    est = fit_density(sample(beta_pair[0], 2000, 11), d4)
    assert abs(est.mass() - 1) <= 1e-3


@pytest.mark.parametrize("family", ["daubechies-4", "daubechies-6", "symmlet-8"])
def test_coefficient_form_matches_kernel_sum(tables, beta_pair, family):
    t = tables[family]
    s = sample(beta_pair[0], 400, 5)
    est = fit_density(s, t)
    x = np.random.default_rng(0).uniform(-0.3, 1.3, 100)
    assert np.max(np.abs(est(x) - kernel_density(t, est.level, s, x))) <= 1e-10


def test_coefficients_only_where_samples_reach(d4):
    s = SampleSet([0.2, 0.3, 0.35])
    est = fit_density(s, d4, level=2)
    ks = est.coefficient_map()
    # phi_{2,k} touches [0.2, 0.35] only when k/4 < 0.35 and (k+3)/4 > 0.2
    assert set(ks) <= set(range(-2, 2))
    assert est.support[0] >= -2 / 4 and est.support[1] <= (1 + 3) / 4


def test_fit_is_deterministic(d4, beta_pair):
    s = sample(beta_pair[1], 1000, 3)
    a, b = fit_density(s, d4), fit_density(s, d4)
    assert a.coefficients.tobytes() == b.coefficients.tobytes() and a.k_min == b.k_min


def test_estimate_may_be_negative(d4):
    est = fit_density(SampleSet([0.0]), d4, level=0)
    assert np.min(est(np.linspace(0, 3, 301))) < 0


def test_quantile_and_cdf(d4, beta_pair):
    est = fit_density(sample(beta_pair[0], 8000, 2), d4)
    q = est.quantile([0.01, 0.5, 0.99])
    assert np.all(np.diff(q) > 0)
    assert np.allclose(est.cdf(q), [0.01, 0.5, 0.99], atol=1e-6)
    assert abs(q[1] - beta_pair[0].quantile(0.5)) < 0.02


def test_sup_distance_examples(d4, beta_pair):
    est = fit_density(sample(beta_pair[0], 500, 1), d4)
    grid = sup_grid(est)
    assert sup_distance(est, est, grid) == 0.0
    assert sup_distance(est, lambda x: np.zeros_like(x), grid) == pytest.approx(np.max(np.abs(est(grid))))
    with pytest.raises(ValueError):
        sup_distance(est, est, [])


def _sup_medians(d4, f):
    from wavediv.functionals import trim_domain

    grid = np.linspace(*trim_domain(f, parse_distribution("beta(3,3)"), 0.02).interval, 2001)
    return {
        n: np.median([sup_distance(fit_density(sample(f, n, 100 * n + r), d4), f.pdf, grid) for r in range(20)])
        for n in (500, 2000, 8000)
    }


def test_sup_distance_consistency(d4, beta_pair):
    med = _sup_medians(d4, beta_pair[0])
    assert med[2000] < med[500]
    assert med[8000] < med[500]


@pytest.mark.xfail(strict=False, reason="n=2000 and n=8000 share level j=3; the sup error is bias-dominated there")
def test_sup_distance_nonincreasing_over_shared_level(d4, beta_pair):
    med = _sup_medians(d4, beta_pair[0])
    assert med[2000] >= med[8000]


def test_empirical_process_trivial_cases(d4, beta_pair):
    s = sample(beta_pair[0], 1000, 9)
    assert wavelet_empirical_process(d4, 2, lambda y: np.zeros_like(y), s, 0.0) == 0.0
    g = wavelet_empirical_process(d4, 2, lambda y: np.ones_like(y), s, 1.0, interval=(-3, 4))
    assert abs(g) < 1e-8


def test_empirical_process_is_asymptotically_normal(d4, beta_pair):
    f, n = beta_pair[0], 4000
    j = resolution_level(n)
    h = lambda x: 4 * x * (1 - x)
    x, w = QuadratureRule(points=8192).nodes_weights(0, 1)
    expected = float(np.dot(w, f.pdf(x) * h(x)))
    proj = project(d4, j, h, (-1, 2))
    s2 = sigma_hn(d4, j, h, f.pdf, (0, 1), projection=proj)
    z = [wavelet_empirical_process(d4, j, h, sample(f, n, r), expected, projection=proj) / math.sqrt(s2) for r in range(500)]
    assert stats.kstest(z, "norm").statistic <= 0.08


def test_sigma_hn_examples(d4, beta_pair):
    one = lambda y: np.ones_like(y)
    assert sigma_hn(d4, 3, one, beta_pair[0].pdf, (0, 1), projection=project(d4, 3, one, (-3, 4))) <= 1e-10
    unif = lambda y: np.ones_like(y)
    v = sigma_hn(d4, 8, lambda y: y, unif, (0, 1), projection=project(d4, 8, lambda y: y, (-1, 2)))
    assert abs(v - 1 / 12) <= 1e-3


def test_sigma_hn_converges_to_variance(d4, beta_pair):
    f = beta_pair[0]
    h = lambda y: np.sin(3 * y)
    x, w = QuadratureRule(points=8192).nodes_weights(0, 1)
    var = np.dot(w, f.pdf(x) * h(x) ** 2) - np.dot(w, f.pdf(x) * h(x)) ** 2
    gaps = [abs(sigma_hn(d4, j, h, f.pdf, (0, 1), projection=project(d4, j, h, (-1, 2))) - var) for j in (1, 3, 5, 7)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


@pytest.mark.parametrize("family", ["haar", "daubechies-4", "daubechies-6", "daubechies-8", "symmlet-8"])
@pytest.mark.parametrize("dist", ["beta(2,5)", "gaussian(0,1)"])
def test_mass_invariant_across_families(tables, family, dist):
    for n in (500, 8000):
        est = fit_density(sample(parse_distribution(dist), n, n), tables[family])
        assert abs(est.mass() - 1) <= 1e-3


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50), st.integers(0, 4))
def test_mass_property(values, j):
    from wavediv.wavelets import build_scaling_table, get_filter

    est = fit_density(SampleSet(values), _D6, level=j)
    assert abs(est.mass() - 1) <= 1e-3


from wavediv.wavelets import build_scaling_table, get_filter  # noqa: E402

_D6 = build_scaling_table(get_filter("daubechies-6"), 10)


def test_csv_round_trip(tmp_path, d4):
    s = SampleSet([0.25, 1e-3, 7.5], "x")
    p = tmp_path / "s.csv"
    write_samples(s, p)
    back = read_samples(p)
    assert back.values.tobytes() == s.values.tobytes()
    raw = tmp_path / "raw.csv"
    raw.write_text("1.5\n2.5\n\n")
    assert list(read_samples(raw).values) == [1.5, 2.5]
    bad = tmp_path / "bad.csv"
    bad.write_text("value\n1\nabc\n")
    with pytest.raises(ValueError):
        read_samples(bad)
    est = fit_density(back, d4, level=1)
    out = tmp_path / "dens.csv"
    write_density(est, [0.0, 0.5], out)
    lines = out.read_text().splitlines()
    assert lines[0] == "x,fn" and len(lines) == 3
