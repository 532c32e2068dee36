"""Reference values: parametric distributions, closed-form divergences, an
independent high-resolution quadrature, and seeded samplers.

Distribution strings follow a small grammar::

    uniform(a,b)  gaussian(mu,sigma)  beta(a,b)  gamma(k,theta)
    mixture(0.5*gaussian(0,1)+0.5*gaussian(3,1))
"""

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .errors import InfiniteDivergenceError, QuadratureError, UnsupportedPairError
from .functionals import finalize, parse_kind, phi_functional

_TAIL = 1e-15


@dataclass(frozen=True)
class Distribution:
    """A univariate law with analytic pdf, cdf, quantile and sampler.

    ``family`` is one of ``uniform``, ``gaussian``, ``beta``, ``gamma`` or
    ``mixture``. For mixtures ``params`` holds the weights and ``components``
    the component laws.
    """

    family: str
    params: tuple
    components: tuple = ()

    def __post_init__(self):
        fam = self.family
        p = self.params
        if fam == "uniform":
            if not p[0] < p[1]:
                raise ValueError(f"uniform({p[0]},{p[1]}) needs a < b")
        elif fam in ("gaussian", "beta", "gamma"):
            positive = p[1:] if fam == "gaussian" else p
            if any(v <= 0 for v in positive):
                raise ValueError(f"{fam}{p} needs positive shape/scale parameters")
        elif fam == "mixture":
            if len(p) != len(self.components) or not p:
                raise ValueError("mixture weights and components differ in length")
            if any(w <= 0 for w in p) or abs(sum(p) - 1.0) > 1e-9:
                raise ValueError(f"mixture weights {p} must be positive and sum to 1")
        else:
            raise ValueError(f"unknown distribution family {fam!r}")

    def __str__(self):
        if self.family == "mixture":
            inner = "+".join(f"{w:g}*{c}" for w, c in zip(self.params, self.components))
            return f"mixture({inner})"
        return f"{self.family}({','.join(f'{v:g}' for v in self.params)})"

    @property
    def _frozen(self):
        p = self.params
        if self.family == "uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if self.family == "gaussian":
            return stats.norm(loc=p[0], scale=p[1])
        if self.family == "beta":
            return stats.beta(p[0], p[1])
        if self.family == "gamma":
            return stats.gamma(p[0], scale=p[1])
        raise AttributeError("mixtures have no single frozen law")

    @property
    def support(self):
        if self.family == "uniform":
            return float(self.params[0]), float(self.params[1])
        if self.family == "beta":
            return 0.0, 1.0
        if self.family == "gamma":
            return 0.0, math.inf
        if self.family == "gaussian":
            return -math.inf, math.inf
        los, his = zip(*(c.support for c in self.components))
        return min(los), max(his)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "mixture":
            return sum(w * c.pdf(x) for w, c in zip(self.params, self.components))
        if self.family == "uniform":
            a, b = self.params
            return np.where((x >= a) & (x <= b), 1.0 / (b - a), 0.0)
        return self._frozen.pdf(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "mixture":
            return sum(w * c.cdf(x) for w, c in zip(self.params, self.components))
        return self._frozen.cdf(x)

    def quantile(self, q):
        if self.family != "mixture":
            return self._frozen.ppf(q)
        qs = np.atleast_1d(np.asarray(q, dtype=float))
        lo = min(c.quantile(_TAIL) for c in self.components)
        hi = max(c.quantile(1 - _TAIL) for c in self.components)
        out = np.array([optimize.brentq(lambda x: float(self.cdf(x)) - qq, lo, hi, xtol=1e-14) for qq in qs])
        return float(out[0]) if np.ndim(q) == 0 else out

    def effective_support(self, tail=_TAIL):
        """Support clipped to the ``tail`` and ``1 - tail`` quantiles when unbounded."""
        lo, hi = self.support
        if not math.isfinite(lo):
            lo = float(self.quantile(tail))
        if not math.isfinite(hi):
            hi = float(self.quantile(1 - tail))
        return lo, hi

    def breakpoints(self):
        """Finite points where the density may fail to be smooth."""
        if self.family == "mixture":
            return sorted({b for c in self.components for b in c.breakpoints()})
        return [b for b in self.support if math.isfinite(b)]

    def draw(self, n, rng):
        """Draw ``n`` values with the numpy generator ``rng``.

        Uniform and Gaussian use numpy's direct samplers, Beta the ratio of
        gamma variates (numpy's ``beta``), Gamma Marsaglia-Tsang (numpy's
        ``gamma``). Mixtures first draw component labels, then each component.
        """
        p = self.params
        if self.family == "uniform":
            return rng.uniform(p[0], p[1], size=n)
        if self.family == "gaussian":
            return rng.normal(p[0], p[1], size=n)
        if self.family == "beta":
            return rng.beta(p[0], p[1], size=n)
        if self.family == "gamma":
            return rng.gamma(p[0], p[1], size=n)
        labels = rng.choice(len(self.components), size=n, p=np.asarray(p))
        out = np.empty(n)
        for i, comp in enumerate(self.components):
            sel = labels == i
            out[sel] = comp.draw(int(sel.sum()), rng)
        return out


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_SIMPLE = re.compile(rf"^\s*(uniform|gaussian|normal|beta|gamma)\s*\(\s*({_NUM})\s*,\s*({_NUM})\s*\)\s*$", re.I)
_TERM = re.compile(rf"^\s*({_NUM})\s*\*\s*(.+)$")


def _split_terms(body):
    depth, start, parts = 0, 0, []
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "+" and depth == 0 and i > start and body[i - 1] not in "eE*":
            parts.append(body[start:i])
            start = i + 1
    parts.append(body[start:])
    return parts


def parse_distribution(text):
    """Parse a distribution string such as ``"beta(2,5)"``."""
    if isinstance(text, Distribution):
        return text
    s = text.strip()
    m = _SIMPLE.match(s)
    if m:
        fam = m.group(1).lower()
        fam = "gaussian" if fam == "normal" else fam
        return Distribution(fam, (float(m.group(2)), float(m.group(3))))
    low = s.lower()
    if low.startswith("mixture(") and low.endswith(")"):
        weights, comps = [], []
        for term in _split_terms(s[len("mixture(") : -1]):
            tm = _TERM.match(term)
            if not tm:
                raise ValueError(f"mixture term {term!r} must look like 'w*family(p,q)'")
            weights.append(float(tm.group(1)))
            comps.append(parse_distribution(tm.group(2)))
        return Distribution("mixture", tuple(weights), tuple(comps))
    raise ValueError(f"cannot parse distribution {text!r}")


def _log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_I_alpha(a, b, c, d, alpha):
    """``int f^alpha g^(1-alpha)`` for ``f = Beta(a, b)`` and ``g = Beta(c, d)`` in closed form.

    Raises
    ------
    InfiniteDivergenceError
        If ``alpha*a + (1-alpha)*c <= 0`` or ``alpha*b + (1-alpha)*d <= 0``;
        equality already makes the integral diverge.
    """
    p = alpha * a + (1 - alpha) * c
    q = alpha * b + (1 - alpha) * d
    if p <= 0 or q <= 0:
        raise InfiniteDivergenceError(
            f"I_alpha diverges: alpha*a+(1-alpha)*c = {p:g}, alpha*b+(1-alpha)*d = {q:g} (both must be > 0)"
        )
    log_i = _log_beta(p, q) - alpha * _log_beta(a, b) - (1 - alpha) * _log_beta(c, d)
    return math.exp(log_i)


def _gaussian_I(m1, s1, m2, s2, alpha):
    var_a = alpha * s2**2 + (1 - alpha) * s1**2
    if var_a <= 0:
        raise InfiniteDivergenceError(f"Gaussian I_alpha diverges for alpha={alpha} (mixed variance {var_a:g})")
    log_i = (
        -alpha * (1 - alpha) * (m1 - m2) ** 2 / (2 * var_a)
        + 0.5 * math.log(s1 ** (2 * (1 - alpha)) * s2 ** (2 * alpha) / var_a)
    )
    return math.exp(log_i)


def _closed_form_I(f, g, alpha):
    if f.family == g.family == "beta":
        return beta_I_alpha(*f.params, *g.params, alpha)
    if f.family == g.family == "gaussian":
        return _gaussian_I(*f.params, *g.params, alpha)
    if f.family == g.family == "uniform":
        (a, b), (c, d) = f.params, g.params
        if alpha < 1 and (b <= c or d <= a):
            return 0.0
        if alpha < 1:
            overlap = min(b, d) - max(a, c)
            return overlap * (b - a) ** -alpha * (d - c) ** (alpha - 1)
        if not (c <= a and b <= d):
            raise InfiniteDivergenceError("uniform support of f escapes that of g")
        return ((d - c) / (b - a)) ** (alpha - 1)
    raise UnsupportedPairError(f"no closed form for ({f}, {g})")


def _closed_form_kl(f, g):
    if f.family == g.family == "gaussian":
        m1, s1 = f.params
        m2, s2 = g.params
        return math.log(s2 / s1) + (s1**2 + (m1 - m2) ** 2) / (2 * s2**2) - 0.5
    if f.family == g.family == "beta":
        a, b = f.params
        c, d = g.params
        dg = special.digamma
        return (
            _log_beta(c, d) - _log_beta(a, b)
            + (a - c) * dg(a) + (b - d) * dg(b) + (c - a + d - b) * dg(a + b)
        )
    if f.family == g.family == "uniform":
        (a, b), (c, d) = f.params, g.params
        if not (c <= a and b <= d):
            raise InfiniteDivergenceError("uniform support of f escapes that of g")
        return math.log((d - c) / (b - a))
    raise UnsupportedPairError(f"no closed form KL for ({f}, {g})")


def _closed_form_l2(f, g):
    if f.family == g.family == "gaussian":
        m1, s1 = f.params
        m2, s2 = g.params
        cross = math.exp(-((m1 - m2) ** 2) / (2 * (s1**2 + s2**2))) / math.sqrt(2 * math.pi * (s1**2 + s2**2))
        return 1 / (2 * math.sqrt(math.pi) * s1) + 1 / (2 * math.sqrt(math.pi) * s2) - 2 * cross
    if f.family == g.family == "beta":
        (a, b), (c, d) = f.params, g.params

        def inner(p, q, r, s):
            if p + r - 1 <= 0 or q + s - 1 <= 0:
                raise InfiniteDivergenceError("Beta L2 product integral diverges")
            return math.exp(_log_beta(p + r - 1, q + s - 1) - _log_beta(p, q) - _log_beta(r, s))

        return inner(a, b, a, b) + inner(c, d, c, d) - 2 * inner(a, b, c, d)
    if f.family == g.family == "uniform":
        (a, b), (c, d) = f.params, g.params
        overlap = max(0.0, min(b, d) - max(a, c))
        return 1 / (b - a) + 1 / (d - c) - 2 * overlap / ((b - a) * (d - c))
    raise UnsupportedPairError(f"no closed form L2 for ({f}, {g})")


def closed_form_divergence(f, g, kind, alpha=None):
    """Analytic divergence of ``f`` from ``g`` on the untrimmed support.

    Supported: Gaussian-Gaussian, Beta-Beta and Uniform-Uniform pairs for
    every kind. Anything else raises :class:`UnsupportedPairError`.
    """
    f, g = parse_distribution(f), parse_distribution(g)
    name, alpha = parse_kind(kind, alpha)
    if name == "kl":
        return float(_closed_form_kl(f, g))
    if name == "l2":
        return float(_closed_form_l2(f, g))
    return finalize(name, alpha, _closed_form_I(f, g, alpha))


def _piecewise_panels(cuts, panels):
    # panels spread over the pieces in proportion to length; density kinks sit on piece edges
    lengths = np.diff(cuts)
    counts = np.maximum(1, np.round(panels * lengths / lengths.sum()).astype(int))
    parts = [_gauss_legendre_panels(a, b, c) for a, b, c in zip(cuts[:-1], cuts[1:], counts)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _gauss_legendre_panels(lo, hi, panels, order=8):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def quadrature_oracle(f_pdf, g_pdf, kind, domain=None, M=2**16, alpha=None, tol=1e-9, interval=None, raw=False):
    """Brute-force reference value of a divergence by composite Gauss-Legendre quadrature.

    This path shares no integration code with :func:`wavediv.functionals.divergence`:
    it uses 8-point Gauss-Legendre panels (``M // 8`` of them, ``M >= 2**16``
    nodes in total) and estimates its own error by comparison with half as
    many panels.

    Parameters
    ----------
    f_pdf, g_pdf : callable or Distribution
    kind : str or PhiFunctional
    domain : Domain, optional
        When given, densities are clipped to ``[kappa_floor, kappa_cap]`` and
        renormalised over ``domain.interval`` (the trimmed measure). When
        omitted the raw densities are integrated over ``interval`` or, for
        distributions, over their common effective support.
    M : int
        Total quadrature nodes.
    raw : bool
        Return the integral ``int phi(f, g)`` instead of the finalised value.

    Raises
    ------
    QuadratureError
        If the error estimate exceeds ``tol`` (relative to ``max(1, |I|)``)
        or the integrand is not finite.
    """
    if M < 2**16:
        raise ValueError(f"quadrature oracle needs M >= 2**16 nodes, got {M}")
    name, alpha = parse_kind(kind, alpha)
    phi = phi_functional(name, alpha)
    fd = f_pdf if callable(f_pdf) and not isinstance(f_pdf, Distribution) else parse_distribution(f_pdf).pdf
    gd = g_pdf if callable(g_pdf) and not isinstance(g_pdf, Distribution) else parse_distribution(g_pdf).pdf
    if domain is not None:
        lo, hi = domain.interval
    elif interval is not None:
        lo, hi = interval
    else:
        fl, fh = parse_distribution(f_pdf).effective_support()
        gl, gh = parse_distribution(g_pdf).effective_support()
        lo, hi = min(fl, gl), max(fh, gh)
    cuts = [lo, hi]
    for ref in (f_pdf, g_pdf):
        if isinstance(ref, (str, Distribution)):
            cuts += [c for c in parse_distribution(ref).breakpoints() if lo < c < hi]
    cuts = np.unique(cuts)
    panels = M // 8

    def integral(p):
        x, w = _piecewise_panels(cuts, p)
        fx, gx = np.asarray(fd(x), dtype=float), np.asarray(gd(x), dtype=float)
        if domain is not None:
            fx = np.clip(fx, domain.kappa_floor, domain.kappa_cap)
            gx = np.clip(gx, domain.kappa_floor, domain.kappa_cap)
            fx = fx / np.dot(w, fx)
            gx = gx / np.dot(w, gx)
        with np.errstate(all="ignore"):
            vals = phi.phi(fx, gx)
        if name in ("kl",):
            vals = np.where(fx == 0, 0.0, vals)
        if not np.all(np.isfinite(vals)):
            bad = x[~np.isfinite(vals)]
            raise QuadratureError(f"oracle integrand not finite on [{bad.min():.6g}, {bad.max():.6g}]")
        return float(np.dot(w, vals))

    fine = integral(panels)
    coarse = integral(panels // 2)
    err = abs(fine - coarse)
    if err > tol * max(1.0, abs(fine)):
        raise QuadratureError(f"oracle error estimate {err:.3g} exceeds tolerance {tol:g}")
    return fine if raw else finalize(name, alpha, fine)


def sample(dist, n, seed, label=None):
    """Draw a deterministic :class:`~wavediv.density.SampleSet` of size ``n``.

    The stream is numpy's PCG64 seeded with ``seed``; identical
    ``(dist, n, seed)`` give identical bytes.
    """
    from .density import SampleSet

    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    dist = parse_distribution(dist)
    rng = np.random.Generator(np.random.PCG64(int(seed) % 2**64))
    values = dist.draw(int(n), rng)
    return SampleSet(values, label or str(dist), {"generator": "PCG64", "seed": int(seed), "distribution": str(dist)})
