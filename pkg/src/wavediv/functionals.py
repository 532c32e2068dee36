"""phi-functionals ``J(f, g) = int_D phi(f, g)`` and the named divergences built on them.

Densities enter every integral trimmed to a compact interval ``D``, clamped
to ``[kappa_floor, kappa_cap]`` and renormalised to unit mass on ``D``. The
values returned are therefore the divergences of the modified densities
``f 1_D / int_D f`` and ``g 1_D / int_D g``; the trimming level ``epsilon`` is
carried on the :class:`Domain`.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDomainError, QuadratureError
from .quadrature import DEFAULT_RULE

KINDS = ("renyi", "tsallis", "kl", "l2", "custom")
DEFAULT_KAPPA_MIN = 1e-8


@dataclass(frozen=True)
class PhiFunctional:
    """``phi(x, y)`` with its first and second partial derivatives.

    ``d1 = dphi/dx``, ``d2 = dphi/dy``, ``d11``, ``d22`` the pure second
    derivatives and ``d12`` the mixed one. All are vectorised callables.
    """

    kind: str
    phi: object
    d1: object
    d2: object
    d11: object
    d22: object
    d12: object
    alpha: float | None = None

    @property
    def name(self):
        return self.kind if self.alpha is None else f"{self.kind}({self.alpha:g})"


_KIND_RE = re.compile(r"^\s*([a-z0-9_-]+)\s*(?:[(:]\s*([-+.\deE]+)\s*\)?)?\s*$")
_ALIASES = {"kullback-leibler": "kl", "kullback_leibler": "kl", "l22": "l2", "rényi": "renyi"}


def parse_kind(kind, alpha=None):
    """Normalise a kind to ``(name, alpha)``.

    Accepts ``"kl"``, ``"l2"``, ``"renyi(0.5)"``, ``"tsallis:2"`` or a name
    plus a separate ``alpha``.
    """
    if isinstance(kind, PhiFunctional):
        return kind.kind, kind.alpha
    m = _KIND_RE.match(str(kind).lower())
    if not m:
        raise ValueError(f"cannot parse divergence kind {kind!r}")
    name = _ALIASES.get(m.group(1), m.group(1))
    if name not in KINDS:
        raise ValueError(f"unknown divergence kind {kind!r}; expected one of {KINDS}")
    if m.group(2) is not None:
        alpha = float(m.group(2))
    if name in ("renyi", "tsallis"):
        if alpha is None:
            raise ValueError(f"{name} needs an order alpha")
        alpha = float(alpha)
        if not alpha > 0 or alpha == 1:
            raise ValueError(f"{name} order must satisfy alpha > 0 and alpha != 1, got {alpha}")
    else:
        alpha = None
    return name, alpha


def _power_core(alpha):
    a = alpha
    return dict(
        phi=lambda x, y: x**a * y ** (1 - a),
        d1=lambda x, y: a * x ** (a - 1) * y ** (1 - a),
        d2=lambda x, y: (1 - a) * x**a * y ** (-a),
        d11=lambda x, y: a * (a - 1) * x ** (a - 2) * y ** (1 - a),
        d22=lambda x, y: -a * (1 - a) * x**a * y ** (-a - 1),
        d12=lambda x, y: a * (1 - a) * x ** (a - 1) * y ** (-a),
    )


_KL = dict(
    phi=lambda x, y: x * np.log(x / y),
    d1=lambda x, y: 1.0 + np.log(x / y),
    d2=lambda x, y: -x / y,
    d11=lambda x, y: 1.0 / x,
    d22=lambda x, y: x / y**2,
    d12=lambda x, y: -1.0 / y,
)

_L2 = dict(
    phi=lambda x, y: (x - y) ** 2,
    d1=lambda x, y: 2.0 * (x - y),
    d2=lambda x, y: -2.0 * (x - y),
    d11=lambda x, y: 2.0 + 0.0 * x,
    d22=lambda x, y: 2.0 + 0.0 * x,
    d12=lambda x, y: -2.0 + 0.0 * x,
)


def phi_functional(kind, alpha=None, **custom):
    """Build the :class:`PhiFunctional` for a kind.

    Renyi and Tsallis share the core ``x**alpha * y**(1 - alpha)``; they
    differ only in :func:`finalize`. For ``kind="custom"`` pass ``phi``,
    ``d1``, ``d2``, ``d11``, ``d22`` and ``d12`` as keyword callables.
    """
    if isinstance(kind, PhiFunctional):
        return kind
    name, alpha = parse_kind(kind, alpha)
    if name in ("renyi", "tsallis"):
        parts = _power_core(alpha)
    elif name == "kl":
        parts = _KL
    elif name == "l2":
        parts = _L2
    else:
        missing = {"phi", "d1", "d2", "d11", "d22", "d12"} - set(custom)
        if missing:
            raise ValueError(f"custom phi-functional is missing {sorted(missing)}")
        parts = custom
    return PhiFunctional(name, alpha=alpha, **{k: parts[k] for k in ("phi", "d1", "d2", "d11", "d22", "d12")})


def finalize(kind, alpha, integral):
    """Map the raw integral ``I = int phi(f, g)`` to the divergence value."""
    name, alpha = parse_kind(kind, alpha)
    if name == "renyi":
        if not integral > 0:
            raise QuadratureError(f"Renyi integral must be positive, got {integral!r}")
        return math.log(integral) / (alpha - 1)
    if name == "tsallis":
        return (integral - 1) / (alpha - 1)
    return float(integral)


@dataclass(frozen=True)
class Domain:
    """Compact interval on which densities are compared.

    ``masses`` records ``(int_D f, int_D g)`` for the references the domain
    was built from, when known.
    """

    interval: tuple
    epsilon: float
    kappa_floor: float
    kappa_cap: float
    masses: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = self.interval
        if not hi > lo:
            raise EmptyDomainError(f"empty domain interval [{lo}, {hi}]")
        if not 0 <= self.epsilon <= 0.1:
            raise ValueError(f"epsilon must lie in [0, 0.1], got {self.epsilon}")
        if not 0 < self.kappa_floor <= self.kappa_cap < math.inf:
            raise ValueError(f"need 0 < kappa_floor <= kappa_cap < inf, got {self.kappa_floor}, {self.kappa_cap}")

    @property
    def length(self):
        lo, hi = self.interval
        return hi - lo

    def contains(self, x):
        lo, hi = self.interval
        x = np.asarray(x)
        return (x >= lo) & (x <= hi)

    def clip(self, values):
        return np.clip(values, self.kappa_floor, self.kappa_cap)


def _reference(ref):
    """Return ``(pdf, cdf, quantile, support)`` for a Distribution or density estimate."""
    pdf = getattr(ref, "pdf", None) or ref
    return pdf, ref.cdf, ref.quantile, ref.support


def trim_domain(f_ref, g_ref, epsilon, kappa_min=DEFAULT_KAPPA_MIN, construction="union", grid_points=4097):
    """Find a compact ``D_eps`` carrying mass at least ``1 - epsilon`` under both references.

    Parameters
    ----------
    f_ref, g_ref : Distribution or WaveletDensityEstimate
        Anything exposing ``pdf``/``__call__``, ``cdf``, ``quantile`` and
        ``support``. Distributions use analytic quantiles, estimates the
        quantiles of their own (positive part) distribution function.
    epsilon : float
        Trimming level in ``(0, 0.1]``.
    kappa_min : float
        Lower bound applied to the density floor.
    construction : {"union", "intersection"}
        ``"union"`` spans the outermost of the two ``(eps/2, 1 - eps/2)``
        quantile ranges, which guarantees the mass condition. ``"intersection"``
        keeps only their overlap; it gives larger density floors but may
        leave more than ``epsilon`` of either law outside.
    grid_points : int
        Size of the grid used to find the density floor and cap.

    Raises
    ------
    EmptyDomainError
        When the references effectively live on disjoint sets, so that no
        interval inside the common support carries the required mass.
    """
    if not 0 < epsilon <= 0.1:
        raise ValueError(f"epsilon must lie in (0, 0.1], got {epsilon}")
    f_pdf, f_cdf, f_q, f_supp = _reference(f_ref)
    g_pdf, g_cdf, g_q, g_supp = _reference(g_ref)
    flo, fhi = float(f_q(epsilon / 2)), float(f_q(1 - epsilon / 2))
    glo, ghi = float(g_q(epsilon / 2)), float(g_q(1 - epsilon / 2))
    if construction == "union":
        lo, hi = min(flo, glo), max(fhi, ghi)
    elif construction == "intersection":
        lo, hi = max(flo, glo), min(fhi, ghi)
    else:
        raise ValueError(f"unknown domain construction {construction!r}")
    lo = max(lo, f_supp[0], g_supp[0])
    hi = min(hi, f_supp[1], g_supp[1])
    if not hi > lo:
        raise EmptyDomainError(
            f"effective supports do not overlap: f on [{flo:.6g}, {fhi:.6g}], g on [{glo:.6g}, {ghi:.6g}]"
        )
    mf = float(f_cdf(hi) - f_cdf(lo))
    mg = float(g_cdf(hi) - g_cdf(lo))
    if construction == "union" and min(mf, mg) < 1 - epsilon - 1e-9:
        raise EmptyDomainError(
            f"no interval in the common support carries mass >= {1 - epsilon:g} "
            f"under both laws (got {mf:.4g} and {mg:.4g} on [{lo:.6g}, {hi:.6g}])"
        )
    x = np.linspace(lo, hi, grid_points)
    fx = np.asarray(f_pdf(x), dtype=float)
    gx = np.asarray(g_pdf(x), dtype=float)
    floor = max(float(min(fx.min(), gx.min())), kappa_min)
    cap = max(float(max(fx.max(), gx.max())), floor)
    return Domain((lo, hi), float(epsilon), floor, cap, (mf, mg))


def clipped_densities(f_eval, g_eval, domain, x, w):
    """Clamp both densities on the nodes ``x`` and renormalise them with weights ``w``."""
    fx = domain.clip(np.asarray(f_eval(x), dtype=float))
    gx = domain.clip(np.asarray(g_eval(x), dtype=float))
    return fx / np.dot(w, fx), gx / np.dot(w, gx)


def _checked(vals, x, what):
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)]
        raise QuadratureError(f"{what} is not finite on [{bad.min():.6g}, {bad.max():.6g}]")
    return vals


def phi_integral(phi, f_eval, g_eval, domain, quad=DEFAULT_RULE):
    """Raw ``int_D phi(f~, g~)`` over the clipped, renormalised densities."""
    x, w = quad.nodes_weights(*domain.interval)
    fx, gx = clipped_densities(f_eval, g_eval, domain, x, w)
    with np.errstate(all="ignore"):
        vals = phi.phi(fx, gx)
    return float(np.dot(w, _checked(vals, x, f"{phi.name} integrand")))


def divergence(kind, f_eval, g_eval, domain, quad=DEFAULT_RULE, alpha=None):
    """Divergence of ``f`` from ``g`` on ``domain``.

    Parameters
    ----------
    kind : str or PhiFunctional
        ``"kl"``, ``"l2"``, ``"renyi(a)"``, ``"tsallis(a)"`` or a custom functional.
    f_eval, g_eval : callable
        Vectorised density evaluators (true pdfs or wavelet estimates).
    domain : Domain
    quad : QuadratureRule

    Returns
    -------
    float
        Renyi ``log(I)/(alpha-1)``, Tsallis ``(I-1)/(alpha-1)``, KL and L2 the
        integral itself.
    """
    phi = phi_functional(kind, alpha)
    return finalize(phi.kind, phi.alpha, phi_integral(phi, f_eval, g_eval, domain, quad))


def symmetrized_divergence(kind, f_eval, g_eval, domain, quad=DEFAULT_RULE, alpha=None):
    """``(D(f, g) + D(g, f)) / 2``."""
    forward = divergence(kind, f_eval, g_eval, domain, quad, alpha)
    backward = divergence(kind, g_eval, f_eval, domain, quad, alpha)
    # sorted addition keeps the result bit-identical under argument swap
    lo, hi = sorted((forward, backward))
    return (lo + hi) / 2


def besov_seminorm(f, t, grid, h_set):
    """Second-difference smoothness diagnostic.

    Returns ``sup |f| + sup_{x, h} |f(x+h) - 2 f(x) + f(x-h)| / |h|**t`` over
    ``grid`` and the step sizes ``h_set``; finite values are consistent with
    membership of ``B^t_{inf,inf}`` for ``0 < t < 1``.
    """
    if not 0 < t < 1:
        raise ValueError(f"smoothness t must lie in (0, 1), got {t}")
    x = np.asarray(grid, dtype=float)
    fx = np.asarray(f(x), dtype=float)
    worst = 0.0
    for h in np.atleast_1d(np.asarray(h_set, dtype=float)):
        if h == 0:
            continue
        second = np.asarray(f(x + h), dtype=float) - 2 * fx + np.asarray(f(x - h), dtype=float)
        worst = max(worst, float(np.max(np.abs(second))) / abs(h) ** t)
    return float(np.max(np.abs(fx))) + worst
