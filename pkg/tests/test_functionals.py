import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavediv.density import fit_density
from wavediv.errors import EmptyDomainError, QuadratureError
from wavediv.functionals import (
    Domain,
    besov_seminorm,
    divergence,
    finalize,
    parse_kind,
    phi_integral,
    phi_functional,
    symmetrized_divergence,
    trim_domain,
)
from wavediv.oracles import beta_I_alpha, parse_distribution, sample
from wavediv.quadrature import QuadratureRule

KINDS = ["renyi(0.5)", "renyi(2)", "tsallis(2)", "tsallis(0.5)", "kl", "l2"]


@pytest.mark.parametrize("text, expected", [
    ("kl", ("kl", None)),
    ("L2", ("l2", None)),
    ("renyi(0.5)", ("renyi", 0.5)),
    ("tsallis:2", ("tsallis", 2.0)),
    (" Renyi ( 3 ) ", ("renyi", 3.0)),
])
def test_parse_kind(text, expected):
    assert parse_kind(text) == expected


@pytest.mark.parametrize("text", ["renyi", "renyi(1)", "tsallis(0)", "tsallis(-2)", "hellinger", "kl(("])
def test_parse_kind_refusals(text):
    with pytest.raises(ValueError):
        parse_kind(text)


def test_phi_examples():
    assert phi_functional("kl").phi(2.0, 2.0) == 0.0
    t = phi_functional("tsallis(2)")
    assert t.d1(3.0, 1.5) == pytest.approx(2 * 3.0 / 1.5)
    l2 = phi_functional("l2")
    assert l2.phi(3.0, 1.0) == 4.0 and l2.d12(0.3, 0.7) == -2.0
    assert phi_functional("renyi(0.5)").name == "renyi(0.5)"


def test_custom_functional():
    hell = phi_functional(
        "custom",
        phi=lambda x, y: (np.sqrt(x) - np.sqrt(y)) ** 2,
        d1=lambda x, y: 1 - np.sqrt(y / x),
        d2=lambda x, y: 1 - np.sqrt(x / y),
        d11=lambda x, y: 0.5 * np.sqrt(y) * x**-1.5,
        d22=lambda x, y: 0.5 * np.sqrt(x) * y**-1.5,
        d12=lambda x, y: -0.5 / np.sqrt(x * y),
    )
    assert hell.kind == "custom"
    with pytest.raises(ValueError):
        phi_functional("custom", phi=lambda x, y: x)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), st.floats(0.05, 5), st.floats(0.05, 5))
def test_derivatives_match_finite_differences(kind, x, y):
    p = phi_functional(kind)
    e = 1e-6
    checks = [
        (p.d1(x, y), (p.phi(x + e, y) - p.phi(x - e, y)) / (2 * e)),
        (p.d2(x, y), (p.phi(x, y + e) - p.phi(x, y - e)) / (2 * e)),
        (p.d11(x, y), (p.d1(x + e, y) - p.d1(x - e, y)) / (2 * e)),
        (p.d22(x, y), (p.d2(x, y + e) - p.d2(x, y - e)) / (2 * e)),
        (p.d12(x, y), (p.d1(x, y + e) - p.d1(x, y - e)) / (2 * e)),
    ]
    for exact, approx in checks:
        assert exact == pytest.approx(approx, rel=1e-5, abs=1e-5)


def test_finalize_identities():
    I = 0.8311688311688352
    assert finalize("renyi", 0.5, I) == math.log(I) / (0.5 - 1)
    assert finalize("tsallis", 2.0, I) == (I - 1) / (2.0 - 1)
    assert finalize("kl", None, I) == I
    with pytest.raises(QuadratureError):
        finalize("renyi", 2.0, 0.0)


def test_domain_validation():
    Domain((0, 1), 0.02, 0.1, 2.0)
    with pytest.raises(EmptyDomainError):
        Domain((1, 1), 0.02, 0.1, 2.0)
    for bad in [dict(epsilon=0.2), dict(kappa_floor=0.0), dict(kappa_floor=3.0), dict(kappa_cap=math.inf)]:
        args = dict(interval=(0, 1), epsilon=0.02, kappa_floor=0.1, kappa_cap=2.0) | bad
        with pytest.raises(ValueError):
            Domain(**args)


def test_trim_uniform():
    u = parse_distribution("uniform(0,1)")
    d = trim_domain(u, u, 0.02)
    assert d.interval == pytest.approx((0.01, 0.99), abs=1e-12)
    assert d.kappa_floor == pytest.approx(1.0) and d.kappa_cap == pytest.approx(1.0)


def test_trim_disjoint_supports():
    with pytest.raises(EmptyDomainError):
        trim_domain(parse_distribution("gaussian(0,1)"), parse_distribution("uniform(10,11)"), 0.02)


@pytest.mark.parametrize("construction", ["union", "intersection"])
def test_trim_beta_pair(beta_pair, construction):
    f, g = beta_pair
    d = trim_domain(f, g, 0.02, construction=construction)
    lo, hi = d.interval
    assert 0 < lo < hi < 1
    x, w = QuadratureRule(points=8192).nodes_weights(lo, hi)
    fx, gx = f.pdf(x), g.pdf(x)
    assert d.kappa_floor <= min(fx.min(), gx.min()) + 1e-12
    assert d.kappa_cap >= max(fx.max(), gx.max()) - 1e-12
    if construction == "union":
        for law in (f, g):
            assert law.cdf(lo) <= 0.02 and 1 - law.cdf(hi) <= 0.02
            assert float(np.dot(w, law.pdf(x))) >= 1 - 0.02


def test_intersection_can_violate_the_mass_condition(beta_pair):
    f, g = beta_pair
    lo, hi = trim_domain(f, g, 0.02, construction="intersection").interval
    assert f.cdf(hi) - f.cdf(lo) < 0.98


def test_trim_refuses_bad_epsilon(beta_pair):
    for eps in (0.0, 0.5):
        with pytest.raises(ValueError):
            trim_domain(*beta_pair, eps)


def test_trimming_is_monotone(beta_pair):
    intervals = [trim_domain(*beta_pair, e).interval for e in (0.1, 0.05, 0.02, 0.01, 0.001)]
    for (a, b), (c, d) in zip(intervals, intervals[1:]):
        assert c <= a and d >= b


def test_trim_from_estimates(d4, beta_pair):
    fn = fit_density(sample(beta_pair[0], 2000, 1), d4)
    gn = fit_density(sample(beta_pair[1], 2000, 2), d4)
    d = trim_domain(fn, gn, 0.05)
    assert d.kappa_floor > 0 and d.interval[0] < d.interval[1]


@pytest.mark.parametrize("kind", ["renyi(0.5)", "renyi(2)", "tsallis(2)", "kl", "l2"])
@pytest.mark.parametrize("dist", ["uniform(0,1)", "gaussian(0,1)", "beta(2,5)"])
def test_self_divergence(kind, dist):
    p = parse_distribution(dist)
    d = trim_domain(p, p, 0.02)
    assert abs(divergence(kind, p.pdf, p.pdf, d)) <= 1e-10


def test_self_divergence_of_an_estimate(d4, beta_pair):
    fn = fit_density(sample(beta_pair[0], 500, 3), d4)
    d = trim_domain(fn, fn, 0.02)
    for kind in KINDS:
        assert abs(divergence(kind, fn, fn, d)) <= 1e-10


def test_gaussian_kl():
    f, g = parse_distribution("gaussian(0,1)"), parse_distribution("gaussian(1,1)")
    d = trim_domain(f, g, 1e-4)
    assert divergence("kl", f.pdf, g.pdf, d) == pytest.approx(0.5, abs=2e-3)
    assert symmetrized_divergence("kl", f.pdf, g.pdf, d) == pytest.approx(0.5, abs=2e-3)


def test_renyi_half_matches_gamma_formula(beta_pair):
    f, g = beta_pair
    d = trim_domain(f, g, 1e-6)
    expected = math.log(beta_I_alpha(2, 5, 3, 3, 0.5)) / (0.5 - 1)
    assert divergence("renyi(0.5)", f.pdf, g.pdf, d) == pytest.approx(expected, abs=1e-4)


def test_coherence_of_renyi_tsallis_and_integral(beta_pair):
    f, g = beta_pair
    d = trim_domain(f, g, 0.02)
    for a in (0.5, 2.0, 3.0):
        I = phi_integral(phi_functional("renyi", a), f.pdf, g.pdf, d)
        assert divergence("renyi", f.pdf, g.pdf, d, alpha=a) == math.log(I) / (a - 1)
        assert divergence("tsallis", f.pdf, g.pdf, d, alpha=a) == (I - 1) / (a - 1)


@pytest.mark.parametrize("kind", KINDS)
def test_quadrature_doubling(beta_pair, kind):
    f, g = beta_pair
    d = trim_domain(f, g, 0.02)
    a = divergence(kind, f.pdf, g.pdf, d, QuadratureRule(points=2048))
    b = divergence(kind, f.pdf, g.pdf, d, QuadratureRule(points=4096))
    assert abs(a - b) <= 1e-6
    m = divergence(kind, f.pdf, g.pdf, d, QuadratureRule("composite-midpoint", 4096))
    assert abs(m - b) <= 1e-5


def test_symmetrized_examples(beta_pair):
    f, g = beta_pair
    d = trim_domain(f, g, 0.02)
    for kind in KINDS:
        assert symmetrized_divergence(kind, f.pdf, g.pdf, d) == symmetrized_divergence(kind, g.pdf, f.pdf, d)
        assert abs(symmetrized_divergence(kind, f.pdf, f.pdf, d)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-1, 1), st.floats(0.3, 2), st.floats(-1, 1), st.floats(0.3, 2), st.floats(0.005, 0.1),
)
def test_kl_and_l2_nonnegative(m1, s1, m2, s2, eps):
    f = parse_distribution(f"gaussian({m1},{s1})")
    g = parse_distribution(f"gaussian({m2},{s2})")
    d = trim_domain(f, g, eps)
    assert divergence("l2", f.pdf, g.pdf, d) >= -1e-10
    assert divergence("kl", f.pdf, g.pdf, d) >= -1e-10


def test_non_finite_integrand_names_the_region():
    d = Domain((0.0, 1.0), 0.0, 1e-8, 10.0)
    bad = phi_functional(
        "custom",
        phi=lambda x, y: 1 / (x - y),
        d1=lambda x, y: x, d2=lambda x, y: x, d11=lambda x, y: x, d22=lambda x, y: x, d12=lambda x, y: x,
    )
    with pytest.raises(QuadratureError, match=r"\[0"):
        divergence(bad, lambda x: np.ones_like(x), lambda x: np.ones_like(x), d)


def test_besov_examples(beta_pair):
    grid = np.linspace(0, 1, 101)
    assert besov_seminorm(lambda x: 2 * x + 1, 0.5, grid, [0.01, 0.1]) == pytest.approx(3.0, abs=1e-9)
    kink = besov_seminorm(np.abs, 1 - 1e-6, np.linspace(-1, 1, 201), [0.005, 0.01])
    smooth = besov_seminorm(lambda x: x * x, 1 - 1e-6, np.linspace(-1, 1, 201), [0.005, 0.01])
    assert math.isfinite(kink) and kink - 1 > 20 * (smooth - 1)
    lo, hi = trim_domain(*beta_pair, 0.02).interval
    vals = [besov_seminorm(beta_pair[0].pdf, 0.5, np.linspace(lo, hi, n), [0.001, 0.01, 0.05]) for n in (201, 401, 801)]
    assert max(vals) / min(vals) - 1 <= 0.05
