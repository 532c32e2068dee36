"""Compactly supported scaling functions and their projection kernels.

The father wavelet is tabulated on the dyadic grid ``k / 2**depth`` by the
cascade construction: its values at the integers are the eigenvector of the
refinement matrix for eigenvalue 1, and each finer level follows from
``phi(x) = sqrt(2) * sum_k h_k * phi(2x - k)``. Between grid points the table
is linearly interpolated.

Grid values are used on the half-open support ``[B1, B2)``, which keeps the
interpolated shifts an exact partition of unity (the Haar indicator included).
"""

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MalformedFilterError, QuadratureResolutionWarning

_SQRT2 = math.sqrt(2.0)

# Low-pass reconstruction taps, normalised so that sum(h) == sqrt(2).
# Names count taps: daubechies-4 has 4 taps, support [0, 3], 2 vanishing moments.
DAUBECHIES_2 = (0.7071067811865476, 0.7071067811865476)
DAUBECHIES_4 = (
    0.48296291314453416,
    0.8365163037378079,
    0.2241438680420134,
    -0.12940952255126037,
)
DAUBECHIES_6 = (
    0.33267055295008263,
    0.8068915093110925,
    0.45987750211849154,
    -0.13501102001025458,
    -0.08544127388202666,
    0.03522629188570953,
)
DAUBECHIES_8 = (
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
)
SYMMLET_8 = (
    0.0322231006040427,
    -0.012603967262037833,
    -0.09921954357684722,
    0.29785779560527736,
    0.8037387518059161,
    0.49761866763201545,
    -0.02963552764599851,
    -0.07576571478927333,
)

_BUILTIN = {
    "haar": (DAUBECHIES_2, 1),
    "daubechies-2": (DAUBECHIES_2, 1),
    "daubechies-4": (DAUBECHIES_4, 2),
    "daubechies-6": (DAUBECHIES_6, 3),
    "daubechies-8": (DAUBECHIES_8, 4),
    "symmlet-8": (SYMMLET_8, 4),
}

FAMILIES = tuple(_BUILTIN)
DEFAULT_FAMILY = "daubechies-4"
DEFAULT_DEPTH = 12

_TAP_TOL = 1e-12


@dataclass(frozen=True)
class ScalingFilter:
    """Orthonormal low-pass filter ``h_0 .. h_{L-1}``.

    ``vanishing_moments`` is metadata only (the number of vanishing moments of
    the associated mother wavelet); it is not enforced.
    """

    family_id: str
    coefficients: tuple
    vanishing_moments: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        self.validate()

    @property
    def support(self):
        return 0, len(self.coefficients) - 1

    def validate(self):
        h = np.asarray(self.coefficients)
        if h.size < 2 or h.size % 2:
            raise MalformedFilterError(f"{self.family_id}: need an even number (>= 2) of taps, got {h.size}")
        if not np.all(np.isfinite(h)):
            raise MalformedFilterError(f"{self.family_id}: non-finite taps")
        if abs(h.sum() - _SQRT2) > _TAP_TOL:
            raise MalformedFilterError(f"{self.family_id}: taps sum to {h.sum()!r}, not sqrt(2)")
        for m in range(h.size // 2):
            inner = float(np.dot(h[: h.size - 2 * m], h[2 * m :]))
            target = 1.0 if m == 0 else 0.0
            if abs(inner - target) > _TAP_TOL:
                raise MalformedFilterError(
                    f"{self.family_id}: shift-{2 * m} autocorrelation {inner!r} should be {target}"
                )


def get_filter(family_id):
    """Return a built-in :class:`ScalingFilter` by name (e.g. ``"daubechies-4"``)."""
    try:
        taps, moments = _BUILTIN[family_id.lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet family {family_id!r}; built-ins are {FAMILIES}") from None
    return ScalingFilter(family_id.lower(), taps, moments)


def load_filter(path, family_id=None):
    """Read a custom filter from a text file holding one tap per line.

    Blank lines and lines starting with ``#`` are ignored.
    """
    path = Path(path)
    taps = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            taps.append(float(line))
    return ScalingFilter(family_id or path.stem, taps)


@dataclass(frozen=True, eq=False)
class ScalingFunctionTable:
    """Father wavelet tabulated at ``B1 + i / 2**depth`` for ``i = 0 .. W * 2**depth``."""

    filter: ScalingFilter
    depth: int
    values: np.ndarray = field(repr=False)
    majorant_bound: float

    @property
    def support(self):
        return self.filter.support

    @property
    def width(self):
        lo, hi = self.support
        return hi - lo

    @property
    def grid(self):
        lo, _ = self.support
        return lo + np.arange(self.values.size) / 2.0**self.depth

    def __call__(self, x):
        return eval_scaling(self, x)


def _integer_values(h):
    """Solve phi(n) = sqrt(2) sum_k h_k phi(2n - k) at the integers, sum phi(n) = 1."""
    size = h.size
    n = size - 1
    mat = np.zeros((n + 1, n + 1))
    for row in range(n + 1):
        for col in range(n + 1):
            k = 2 * row - col
            if 0 <= k < size:
                mat[row, col] = _SQRT2 * h[k]
    # phi(B2) = 0 on the half-open support; drop that unknown.
    a = np.vstack([(mat - np.eye(n + 1))[:, :n], np.ones((1, n))])
    rhs = np.zeros(n + 2)
    rhs[-1] = 1.0
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    residual = np.max(np.abs(a @ sol - rhs))
    if residual > 1e-9:
        raise MalformedFilterError(
            f"refinement matrix has no eigenvalue-1 eigenvector (residual {residual:.3g})"
        )
    return np.append(sol, 0.0)


def build_scaling_table(filter, depth=DEFAULT_DEPTH):
    """Tabulate the scaling function of ``filter`` on the dyadic grid of ``depth``.

    Parameters
    ----------
    filter : ScalingFilter
    depth : int
        Grid resolution r; values are stored at spacing ``2**-r``. Must lie in
        ``[4, 20]``.

    Returns
    -------
    ScalingFunctionTable

    Raises
    ------
    MalformedFilterError
        If the integer-point eigenproblem has no solution.
    """
    if int(depth) != depth or not 4 <= depth <= 20:
        raise ValueError(f"depth must be an integer in [4, 20], got {depth}")
    filter.validate()
    h = np.asarray(filter.coefficients)
    width = h.size - 1
    values = _integer_values(h)
    for level in range(1, depth + 1):
        prev_step = 2 ** (level - 1)
        nxt = np.zeros(width * 2**level + 1)
        idx = np.arange(nxt.size)
        for k, hk in enumerate(h):
            src = idx - k * prev_step
            ok = (src >= 0) & (src < values.size)
            nxt[ok] += _SQRT2 * hk * values[src[ok]]
        # even points are unchanged by refinement; copy to avoid rounding drift
        nxt[::2] = values
        values = nxt
    values.setflags(write=False)
    overlapping = math.ceil(width)
    majorant = float(np.max(np.abs(values)) ** 2 * overlapping)
    return ScalingFunctionTable(filter, int(depth), values, majorant)


def eval_scaling(table, x):
    """Evaluate the tabulated scaling function at ``x`` (scalar or array).

    Zero outside ``[B1, B2)``; linear interpolation between grid values inside.
    """
    lo, hi = table.support
    xa = np.asarray(x, dtype=float)
    scale = 2.0**table.depth
    t = (xa - lo) * scale
    inside = (xa >= lo) & (xa < hi)
    t = np.where(inside, t, 0.0)
    i = np.minimum(np.floor(t).astype(np.int64), table.values.size - 2)
    frac = t - i
    vals = table.values
    out = np.where(inside, vals[i] * (1.0 - frac) + vals[i + 1] * frac, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def kernel(table, x, y):
    """``K(x, y) = sum_k phi(x - k) phi(y - k)``, summed over the shifts where both factors live.

    The shift range depends only on ``min(x, y)`` and ``max(x, y)``, so the
    result is exactly symmetric.
    """
    lo, hi = table.support
    xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    big = np.maximum(xa, ya)
    small = np.minimum(xa, ya)
    k_lo = np.floor(big - hi) + 1.0
    k_hi = np.floor(small - lo)
    out = np.zeros(xa.shape)
    for offset in range(math.ceil(table.width)):
        k = k_lo + offset
        active = k <= k_hi
        if not np.any(active):
            break
        term = eval_scaling(table, xa - k) * eval_scaling(table, ya - k)
        out += np.where(active, term, 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_at_level(table, j, x, y):
    """``K_j(x, y) = 2**j * K(2**j x, 2**j y)``."""
    if j < 0:
        raise ValueError(f"resolution level must be >= 0, got {j}")
    s = 2.0**j
    return s * kernel(table, s * np.asarray(x, dtype=float), s * np.asarray(y, dtype=float))


def shift_range(table, j, a, b):
    """Integer shifts k for which ``phi(2**j x - k)`` is nonzero somewhere in ``[a, b]``."""
    lo, hi = table.support
    s = 2.0**j
    return int(math.floor(s * a - hi)) + 1, int(math.floor(s * b - lo))


def scaled_basis(table, j, x):
    """Evaluate all active ``phi_{j,k}(x) = 2**(j/2) phi(2**j x - k)``.

    Returns ``(k, values)``, arrays of shape ``(W, len(x))``: for each point the
    ``W`` shifts whose support contains it (some values may be zero).
    """
    lo, _ = table.support
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    u = 2.0**j * xa
    base = np.floor(u - lo).astype(np.int64)
    offsets = np.arange(math.ceil(table.width))[:, None]
    k = base[None, :] - offsets
    vals = 2.0 ** (j / 2.0) * eval_scaling(table, u[None, :] - k)
    return k, vals


class Projection:
    """``x -> (K_j h)(x) = sum_k c_k phi_{j,k}(x)`` with precomputed coefficients ``c_k``."""

    def __init__(self, table, j, k_min, coefficients):
        self.table = table
        self.level = j
        self.k_min = k_min
        self.coefficients = np.asarray(coefficients, dtype=float)

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        k, basis = scaled_basis(self.table, self.level, xa.ravel())
        idx = k - self.k_min
        ok = (idx >= 0) & (idx < self.coefficients.size)
        coef = np.where(ok, self.coefficients[np.clip(idx, 0, self.coefficients.size - 1)], 0.0)
        out = np.sum(coef * basis, axis=0).reshape(xa.shape)
        return float(out) if out.ndim == 0 else out


def project(table, j, h, interval, quadrature=None):
    """Project ``h`` (supported on ``interval``) onto the scaling space at level ``j``.

    Parameters
    ----------
    table : ScalingFunctionTable
    j : int
        Resolution level.
    h : callable
        Vectorised function, treated as zero outside ``interval``.
    interval : tuple of float
        ``(a, b)`` carrying ``h``.
    quadrature : QuadratureRule, optional
        By default every coefficient ``<h, phi_{j,k}>`` is computed on the
        table's own dyadic grid (spacing ``2**-(j + depth)``). When a rule is
        given it is applied on ``interval`` instead, and a
        :class:`QuadratureResolutionWarning` is issued if its spacing exceeds
        ``2**-j``.

    Returns
    -------
    Projection
        Callable evaluating ``K_j h``.
    """
    a, b = map(float, interval)
    k_min, k_max = shift_range(table, j, a, b)
    ks = np.arange(k_min, k_max + 1)
    s = 2.0**j
    if quadrature is None:
        t = table.grid[:-1]
        w = table.values[:-1] / 2.0**table.depth
        y = (ks[:, None] + t[None, :]) / s
        hy = np.where((y >= a) & (y <= b), h(np.clip(y, a, b)), 0.0)
        coef = (hy @ w) / math.sqrt(s)
    else:
        if quadrature.spacing(a, b) > 1.0 / s:
            warnings.warn(
                f"quadrature spacing {quadrature.spacing(a, b):.3g} exceeds the wavelet scale 2^-{j}",
                QuadratureResolutionWarning,
                stacklevel=2,
            )
        y, w = quadrature.nodes_weights(a, b)
        basis = math.sqrt(s) * eval_scaling(table, s * y[None, :] - ks[:, None])
        coef = basis @ (w * h(y))
    return Projection(table, j, k_min, coef)
