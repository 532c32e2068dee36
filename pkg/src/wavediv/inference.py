"""Asymptotic variances, rate constants, standardized statistics and confidence intervals.

Every divergence here is the trimmed one: densities are clamped and
renormalised on a :class:`~wavediv.functionals.Domain` ``D``. For a sample
``X`` from ``f`` the first-order expansion of ``J(f_n, g) - J(f, g)`` is
``(1/n) sum_i psi(X_i)`` with

    psi(x) = 1_D(x) * (h(x) - E[h(X) | X in D]) / P(X in D),

so the asymptotic variance is ``Var(h(X) | X in D) / P(X in D)``. When the
law lives on ``D`` this is ``Var h(X)``. Both the plug-in and the
closed-form paths carry the ``1 / P(X in D)`` factor so that they agree.

Sides
-----
``first``
    ``f`` estimated from ``X``, ``g`` known. Influence ``h1``.
``second``
    ``g`` estimated from ``Y``, ``f`` known. Influence ``h2``.
``two-sample``
    both estimated; variances add as ``V1/n + V2/m``.
``symmetrized-*``
    the same for ``(J(f, g) + J(g, f)) / 2``, with influences
    ``(h1 + h4) / 2`` on ``X`` and ``(h2 + h3) / 2`` on ``Y``.

Renyi and Tsallis influences carry the derivative of the finalisation:
``1 / ((alpha - 1) I)`` and ``1 / (alpha - 1)`` respectively. For the
symmetrized Renyi divergence each direction uses its own ``I``.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .density import SampleSet
from .errors import DegenerateVarianceError, QuadratureError
from .functionals import clipped_densities, finalize, parse_kind, phi_functional
from .quadrature import DEFAULT_RULE

SIDES = (
    "first",
    "second",
    "two-sample",
    "symmetrized-first",
    "symmetrized-second",
    "symmetrized-two-sample",
)
METHODS = ("plug-in-empirical", "closed-form-quadrature")


@dataclass(frozen=True)
class VarianceEstimate:
    """Asymptotic variance of a divergence estimate.

    For one-sample sides ``value`` is ``V`` with ``Var(J_hat) ~ V / n``.
    For two-sample sides ``components`` holds ``V1`` and ``V2`` and
    ``value = (m V1 + n V2) / (n + m)``, so that ``scaled`` is
    ``V1 / n + V2 / m`` in every case.
    """

    value: float
    side: str
    method: str
    n: int
    m: int | None = None
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}; expected one of {SIDES}")
        if self.method not in METHODS:
            raise ValueError(f"unknown variance method {self.method!r}")
        if not self.value >= 0:
            raise ValueError(f"variance must be non-negative, got {self.value}")
        if _two_sample(self.side) and self.m is None:
            raise ValueError("two-sample variances need both n and m")

    @property
    def scaled(self):
        """Variance of the estimate itself."""
        if _two_sample(self.side):
            return self.components["V1"] / self.n + self.components["V2"] / self.m
        return self.value / self.n


def _two_sample(side):
    return side.endswith("two-sample")


def _uses_x(side):
    return side not in ("second", "symmetrized-second")


def _uses_y(side):
    return side not in ("first", "symmetrized-first")


def h_functions(phi, f_eval, g_eval):
    """``(h1, h2, h3, h4)``: first partials of ``phi`` at ``(f, g)`` and at ``(g, f)``.

    ``f_eval`` and ``g_eval`` should already be clipped to a domain.
    """
    phi = phi_functional(phi)

    def h1(x):
        return phi.d1(f_eval(x), g_eval(x))

    def h2(x):
        return phi.d2(f_eval(x), g_eval(x))

    def h3(x):
        return phi.d1(g_eval(x), f_eval(x))

    def h4(x):
        return phi.d2(g_eval(x), f_eval(x))

    return h1, h2, h3, h4


class _Trimmed:
    """Clamped density renormalised to unit mass on the domain by ``quad``."""

    def __init__(self, density, domain, quad):
        x, w = quad.nodes_weights(*domain.interval)
        self.density = density
        self.domain = domain
        self.norm = float(np.dot(w, domain.clip(np.asarray(density(x), dtype=float))))

    def __call__(self, x):
        return self.domain.clip(np.asarray(self.density(x), dtype=float)) / self.norm


def _integrals(phi, ft, gt, domain, quad):
    x, w = quad.nodes_weights(*domain.interval)
    fx, gx = ft(x), gt(x)
    return float(np.dot(w, phi.phi(fx, gx))), float(np.dot(w, phi.phi(gx, fx)))


def _factors(name, alpha, i_fg, i_gf):
    """Finalisation derivatives for the forward and backward directions."""
    if name == "tsallis":
        return 1 / (alpha - 1), 1 / (alpha - 1)
    if name == "renyi":
        if not (i_fg > 0 and i_gf > 0):
            raise QuadratureError("Renyi integral must be positive")
        return 1 / ((alpha - 1) * i_fg), 1 / ((alpha - 1) * i_gf)
    return 1.0, 1.0


def influence_functions(kind, f_eval, g_eval, domain, quad=DEFAULT_RULE, alpha=None):
    """Influence functions of the trimmed divergence, before centring.

    Returns ``(psi_x, psi_y, psi_sx, psi_sy)``: forward influence of the
    ``f`` sample and the ``g`` sample, then the symmetrized ones. Each maps
    points in ``D`` to reals.
    """
    phi = phi_functional(kind, alpha)
    ft, gt = _Trimmed(f_eval, domain, quad), _Trimmed(g_eval, domain, quad)
    i_fg, i_gf = _integrals(phi, ft, gt, domain, quad)
    c_fwd, c_bwd = _factors(phi.kind, phi.alpha, i_fg, i_gf)
    h1, h2, h3, h4 = h_functions(phi, ft, gt)

    def psi_x(x):
        return c_fwd * h1(x)

    def psi_y(y):
        return c_fwd * h2(y)

    def psi_sx(x):
        return (c_fwd * h1(x) + c_bwd * h4(x)) / 2

    def psi_sy(y):
        return (c_fwd * h2(y) + c_bwd * h3(y)) / 2

    return psi_x, psi_y, psi_sx, psi_sy


def _sample_variance(psi, samples, domain):
    v = samples.values
    inside = v[domain.contains(v)]
    if inside.size < 2:
        raise ValueError(f"need at least 2 samples inside the domain, got {inside.size} of {v.size}")
    with np.errstate(all="ignore"):
        h = np.asarray(psi(inside), dtype=float)
    if not np.all(np.isfinite(h)):
        raise QuadratureError("influence function is not finite at some sample points")
    # exact zero for constant influence, rather than rounding noise
    var = 0.0 if np.ptp(h) == 0 else float(np.var(h))
    return var * v.size / inside.size


def _combine(side, method, v1, v2, n, m):
    if _two_sample(side):
        value = (m * v1 + n * v2) / (n + m)
        return VarianceEstimate(value, side, method, n, m, {"V1": v1, "V2": v2})
    if _uses_x(side):
        return VarianceEstimate(v1, side, method, n, m, {"V1": v1})
    return VarianceEstimate(v2, side, method, n, m, {"V2": v2})


def _pick(side, psis):
    psi_x, psi_y, psi_sx, psi_sy = psis
    if side.startswith("symmetrized"):
        return psi_sx, psi_sy
    return psi_x, psi_y


def plug_in_variance(kind, side, samples_x, samples_y, f_est, g_est, domain, quad=DEFAULT_RULE, alpha=None):
    """Empirical variance of the estimated influence function over in-domain samples.

    The influence is built from the plug-in densities ``f_est`` and ``g_est``
    (either may be a true pdf for one-sample sides). The variance of
    ``psi(X_i)`` over samples inside ``D`` is divided by the in-domain
    fraction, estimating ``Var(h | D) / P(D)``.

    Raises
    ------
    ValueError
        With fewer than two in-domain samples, or samples missing for the side.
    """
    if side not in SIDES:
        raise ValueError(f"unknown side {side!r}; expected one of {SIDES}")
    for needed, s, what in ((_uses_x(side), samples_x, "samples_x"), (_uses_y(side), samples_y, "samples_y")):
        if needed and s is None:
            raise ValueError(f"side {side!r} needs {what}")
    sx = samples_x if samples_x is None or isinstance(samples_x, SampleSet) else SampleSet(samples_x)
    sy = samples_y if samples_y is None or isinstance(samples_y, SampleSet) else SampleSet(samples_y)
    px, py = _pick(side, influence_functions(kind, f_est, g_est, domain, quad, alpha))
    v1 = _sample_variance(px, sx, domain) if _uses_x(side) else 0.0
    v2 = _sample_variance(py, sy, domain) if _uses_y(side) else 0.0
    # one-sample sides report their own sample size as n
    n = len(sx) if _uses_x(side) else len(sy)
    m = len(sy) if _two_sample(side) else None
    return _combine(side, "plug-in-empirical", v1, v2, n, m)


def _law_mass(pdf, domain, quad):
    x, w = quad.nodes_weights(*domain.interval)
    return float(np.dot(w, np.asarray(pdf(x), dtype=float)))


def closed_form_variance(kind, side, f_pdf, g_pdf, domain, quad=None, alpha=None, trimmed_mass=True):
    """Asymptotic variance from the true densities by quadrature.

    One-sample sides evaluate the explicit moment formulas: for the power
    core ``I = int f^a g^(1-a)``,

    * ``sigma1^2 = a^2 (int g (f/g)^(2a-1) - I^2)``,
    * ``sigma2^2 = (a-1)^2 (int g (f/g)^(2a) - I^2)``,

    divided by ``(a-1)^2`` for Tsallis and ``(a-1)^2 I^2`` for Renyi; for KL
    ``int f (1 + log f/g)^2 - (int f (1 + log f/g))^2`` and
    ``int f^2/g - 1``. Symmetrized sides use the variance of the halved
    combined influence under the relevant law. All integrals run over ``D``
    on the clamped, renormalised densities.

    With ``trimmed_mass`` the result is divided by the raw law mass of ``D``
    (see the module notes); set it to ``False`` for the bare formulas.

    Returns a float for one-sample sides and the pair ``(V1, V2)`` for
    two-sample sides.
    """
    if side not in SIDES:
        raise ValueError(f"unknown side {side!r}; expected one of {SIDES}")
    quad = quad or DEFAULT_RULE.refined(4)
    name, alpha = parse_kind(kind, alpha)
    phi = phi_functional(name, alpha)
    x, w = quad.nodes_weights(*domain.interval)
    fx, gx = clipped_densities(f_pdf, g_pdf, domain, x, w)
    with np.errstate(all="ignore"):
        if side.startswith("symmetrized"):
            psx, psy = _pick(side, influence_functions(name, f_pdf, g_pdf, domain, quad, alpha))
            hx, hy = psx(x), psy(x)
            v1 = float(np.dot(w, fx * hx * hx) - np.dot(w, fx * hx) ** 2)
            v2 = float(np.dot(w, gx * hy * hy) - np.dot(w, gx * hy) ** 2)
        else:
            v1, v2 = _moment_formulas(name, alpha, fx, gx, w)
    for v in (v1, v2):
        if not math.isfinite(v):
            raise QuadratureError(f"closed-form variance integrand for {phi.name} is not finite")
    v1, v2 = max(v1, 0.0), max(v2, 0.0)
    if trimmed_mass:
        v1 /= domain.masses[0] if domain.masses else _law_mass(f_pdf, domain, quad)
        v2 /= domain.masses[1] if domain.masses else _law_mass(g_pdf, domain, quad)
    if _two_sample(side):
        return v1, v2
    return v1 if _uses_x(side) else v2


def _moment_formulas(name, alpha, fx, gx, w):
    if name in ("renyi", "tsallis"):
        a = alpha
        r = fx / gx
        i = float(np.dot(w, gx * r**a))
        s1 = a**2 * (float(np.dot(w, gx * r ** (2 * a - 1))) - i * i)
        s2 = (a - 1) ** 2 * (float(np.dot(w, gx * r ** (2 * a))) - i * i)
        scale = (a - 1) ** 2 if name == "tsallis" else (a - 1) ** 2 * i * i
        return s1 / scale, s2 / scale
    if name == "kl":
        t = 1 + np.log(fx / gx)
        s1 = float(np.dot(w, fx * t * t)) - float(np.dot(w, fx * t)) ** 2
        s2 = float(np.dot(w, fx * fx / gx)) - 1.0
        return s1, s2
    if name == "l2":
        d = fx - gx
        s1 = 4 * (float(np.dot(w, fx * d * d)) - float(np.dot(w, fx * d)) ** 2)
        s2 = 4 * (float(np.dot(w, gx * d * d)) - float(np.dot(w, gx * d)) ** 2)
        return s1, s2
    raise ValueError(f"no closed-form variance for kind {name!r}")


def delta_method(name, alpha, sigma2, integral=None):
    """Map a variance of the raw power integral to the Tsallis or Renyi scale."""
    if name == "tsallis":
        return sigma2 / (alpha - 1) ** 2
    if name == "renyi":
        return sigma2 / ((alpha - 1) ** 2 * integral**2)
    return sigma2


def rate_bound_constants(kind, f_pdf, g_pdf, domain, quad=None, alpha=None):
    """Constants ``A_i = int_D |h_i|`` of the almost-sure bounds.

    Renyi and Tsallis values include the finalisation factor
    (``1/|a-1|``, and ``1/I`` for Renyi with each direction's own ``I``).
    ``core`` holds the bare power-core constants for those kinds.
    ``A14`` and ``A23`` are the symmetrized combinations ``(A1 + A4)/2`` and
    ``(A2 + A3)/2``.
    """
    quad = quad or DEFAULT_RULE.refined(4)
    name, alpha = parse_kind(kind, alpha)
    phi = phi_functional(name, alpha)
    ft, gt = _Trimmed(f_pdf, domain, quad), _Trimmed(g_pdf, domain, quad)
    x, w = quad.nodes_weights(*domain.interval)
    with np.errstate(all="ignore"):
        core = [float(np.dot(w, np.abs(h(x)))) for h in h_functions(phi, ft, gt)]
        i_fg, i_gf = _integrals(phi, ft, gt, domain, quad)
    if not all(math.isfinite(a) for a in core):
        raise QuadratureError(f"rate constant integrand for {phi.name} is not finite")
    c_fwd, c_bwd = (abs(c) for c in _factors(name, alpha, i_fg, i_gf))
    a = [core[0] * c_fwd, core[1] * c_fwd, core[2] * c_bwd, core[3] * c_bwd]
    out = {"A1": a[0], "A2": a[1], "A3": a[2], "A4": a[3], "A14": (a[0] + a[3]) / 2, "A23": (a[1] + a[2]) / 2}
    if name in ("renyi", "tsallis"):
        out["core"] = {"A1": core[0], "A2": core[1], "A3": core[2], "A4": core[3]}
    return out


def standardized_statistic(point, reference, var):
    """``(point - reference) / sqrt(var.scaled)``.

    For one-sample sides this is ``sqrt(n) (point - reference) / sqrt(V)``;
    for two-sample sides ``sqrt(nm / (m V1 + n V2)) (point - reference)``.

    Raises
    ------
    DegenerateVarianceError
        If the variance is zero, as under the exact null ``f = g`` for KL.
    """
    if not var.value > 0 or not var.scaled > 0:
        raise DegenerateVarianceError(
            f"asymptotic variance is {var.value!r} for side {var.side!r}: the normal "
            "approximation is degenerate, so no standardized statistic or p-value exists; "
            "use the confidence interval to test 'divergence <= threshold' instead"
        )
    return (point - reference) / math.sqrt(var.scaled)


def z_quantile(level):
    return float(norm.ppf((1 + level) / 2))


def confidence_interval(point, var, level=0.95):
    """Two-sided normal interval ``point -/+ z sqrt(var.scaled)``; zero width for zero variance."""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    half = z_quantile(level) * math.sqrt(var.scaled) if var.value > 0 else 0.0
    return point - half, point + half


def p_value(z):
    return float(2 * norm.sf(abs(z)))


@dataclass
class EstimateReport:
    kind: str
    point: float
    variance: VarianceEstimate
    standardized: float | None
    ci: tuple
    epsilon: float
    rate_bound: dict | None = None
    provenance: dict = field(default_factory=dict)
    p_value: float | None = None
    error: dict | None = None

    def __post_init__(self):
        lo, hi, level = self.ci
        if not 0 < level < 1:
            raise ValueError(f"confidence level must lie in (0, 1), got {level}")
        if not lo <= self.point <= hi:
            raise ValueError(f"interval [{lo}, {hi}] does not contain the point {self.point}")

    def to_dict(self):
        d = asdict(self)
        d["ci"] = {"lo": self.ci[0], "hi": self.ci[1], "level": self.ci[2]}
        d["variance"]["scaled"] = self.variance.scaled
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def estimate_divergence(kind, f_est, g_est, domain, samples_x=None, samples_y=None, side=None, quad=DEFAULT_RULE,
                        alpha=None, level=0.95, reference=None, symmetrized=False, provenance=None):
    """Point estimate, plug-in variance, interval and (optionally) a standardized statistic.

    A zero variance does not raise: the report carries the degenerate-variance
    error and no standardized statistic or p-value.
    """
    from .functionals import divergence, symmetrized_divergence

    name, alpha = parse_kind(kind, alpha)
    if side is None:
        base = "two-sample" if samples_x is not None and samples_y is not None else ("first" if samples_x is not None else "second")
        side = f"symmetrized-{base}" if symmetrized else base
    fn = symmetrized_divergence if side.startswith("symmetrized") else divergence
    point = fn(name, f_est, g_est, domain, quad, alpha)
    var = plug_in_variance(name, side, samples_x, samples_y, f_est, g_est, domain, quad, alpha)
    lo, hi = confidence_interval(point, var, level)
    z = pv = err = None
    try:
        z = standardized_statistic(point, 0.0 if reference is None else reference, var)
        pv = p_value(z)
    except DegenerateVarianceError as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
    kind_name = phi_functional(name, alpha).name
    return EstimateReport(kind_name, point, var, z, (lo, hi, level), domain.epsilon, None, provenance or {}, pv, err)
