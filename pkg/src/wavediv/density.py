"""Linear wavelet density estimator, sup-norm errors and the wavelet empirical process."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import DEFAULT_RULE
from .wavelets import kernel_at_level, project, scaled_basis


@dataclass(frozen=True)
class SampleSet:
    """An i.i.d. sample. ``seed_provenance`` records how it was generated, if known."""

    values: np.ndarray
    label: str = "sample"
    seed_provenance: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError(f"sample set {self.label!r} is empty")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"sample set {self.label!r} contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def read_samples(path, label=None):
    """Read one numeric column from a CSV file. A non-numeric first row is taken as a header."""
    values = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if i == 0:
                    continue
                raise ValueError(f"{path}: line {i + 1}: not a number: {row[0]!r}") from None
    return SampleSet(np.array(values), label or str(path), {"source": str(path)})


def write_samples(samples, path):
    with open(path, "w", newline="") as fh:
        fh.write("value\n")
        for v in samples.values:
            fh.write(f"{float(v)!r}\n")


def resolution_level(n):
    """Level ``j_n`` with ``2**j_n`` the integer power of two nearest ``n**(1/4)`` in log scale."""
    if n < 1:
        raise ValueError(f"resolution level needs n >= 1, got {n}")
    return max(0, math.floor(math.log2(n) / 4 + 0.5))


class WaveletDensityEstimate:
    """``f_n(x) = sum_k alpha_k 2**(j/2) phi(2**j x - k)``.

    Coefficients are stored densely for ``k_min <= k < k_min + len(coefficients)``.
    The estimate may be negative; it is a linear estimator and is not corrected.
    """

    def __init__(self, table, level, k_min, coefficients, n, smoothness_assumed=1.0):
        self.table = table
        self.level = int(level)
        self.k_min = int(k_min)
        c = np.array(coefficients, dtype=float)
        c.setflags(write=False)
        self.coefficients = c
        self.n = int(n)
        self.smoothness_assumed = float(smoothness_assumed)
        self._cdf_grid = None

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        k, basis = scaled_basis(self.table, self.level, xa.ravel())
        idx = k - self.k_min
        ok = (idx >= 0) & (idx < self.coefficients.size)
        coef = np.where(ok, self.coefficients[np.clip(idx, 0, self.coefficients.size - 1)], 0.0)
        out = np.sum(coef * basis, axis=0).reshape(xa.shape)
        return float(out) if out.ndim == 0 else out

    pdf = __call__

    def coefficient_map(self):
        return {self.k_min + i: float(c) for i, c in enumerate(self.coefficients) if c != 0.0}

    @property
    def support(self):
        lo, hi = self.table.support
        s = 2.0**-self.level
        return ((self.k_min + lo) * s, (self.k_min + self.coefficients.size - 1 + hi) * s)

    def grid(self):
        """Dyadic grid of spacing ``2**-(j + depth)`` covering the support; resolves every table cell."""
        a, b = self.support
        step = 2.0 ** -(self.level + self.table.depth)
        count = int(round((b - a) / step))
        return a + step * np.arange(count + 1)

    def _cumulative(self):
        if self._cdf_grid is None:
            x = self.grid()
            fx = self(x)
            step = x[1] - x[0]
            cum = np.concatenate([[0.0], np.cumsum((fx[1:] + fx[:-1]) * (step / 2))])
            pos = np.maximum(fx, 0.0)
            cum_pos = np.concatenate([[0.0], np.cumsum((pos[1:] + pos[:-1]) * (step / 2))])
            self._cdf_grid = (x, cum, cum_pos / cum_pos[-1])
        return self._cdf_grid

    def mass(self):
        """``int f_n`` by the trapezoid rule on :meth:`grid`."""
        return float(self._cumulative()[1][-1])

    def cdf(self, x):
        """Distribution function of the positive part of ``f_n``, normalised to one."""
        g, _, c = self._cumulative()
        return np.interp(x, g, c)

    def quantile(self, q):
        g, _, c = self._cumulative()
        qa = np.asarray(q, dtype=float)
        # first grid point where the cdf reaches q; flat stretches resolve to their left end
        idx = np.clip(np.searchsorted(c, qa, side="left"), 1, c.size - 1)
        c0, c1 = c[idx - 1], c[idx]
        t = np.where(c1 > c0, (qa - c0) / np.where(c1 > c0, c1 - c0, 1.0), 1.0)
        out = g[idx - 1] + t * (g[idx] - g[idx - 1])
        return float(out) if out.ndim == 0 else out

    def rate(self):
        """Nominal sup-norm rate ``sqrt(2**j j / n) + 2**(-j t)`` for the assumed smoothness."""
        j = max(self.level, 1)
        return math.sqrt(2.0**j * j / self.n) + 2.0 ** (-j * self.smoothness_assumed)


def fit_density(samples, table, level=None, smoothness_assumed=1.0):
    """Fit the linear wavelet estimator.

    ``alpha_k = (1/n) sum_i 2**(j/2) phi(2**j X_i - k)``; the level defaults to
    :func:`resolution_level` of the sample size.
    """
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples)
    n = len(samples)
    j = resolution_level(n) if level is None else int(level)
    if j < 0:
        raise ValueError(f"resolution level must be >= 0, got {j}")
    k, vals = scaled_basis(table, j, samples.values)
    k_min = int(k.min())
    size = int(k.max()) - k_min + 1
    coef = np.bincount((k - k_min).ravel(), weights=vals.ravel(), minlength=size) / n
    # trim shifts no sample touched
    nz = np.flatnonzero(coef)
    if nz.size:
        coef = coef[nz[0] : nz[-1] + 1]
        k_min += int(nz[0])
    return WaveletDensityEstimate(table, j, k_min, coef, n, smoothness_assumed)


def eval_density(estimate, x):
    return estimate(x)


def kernel_density(table, j, samples, x):
    """Direct kernel form ``(1/n) sum_i K_j(x, X_i)``, O(n) per point."""
    v = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([np.mean(kernel_at_level(table, j, xi, v)) for xi in xa])


def sup_grid(estimate, domain=None, points=None):
    """Grid for sup-norm proxies: the estimate's dyadic grid, restricted to ``domain`` if given."""
    if domain is None:
        return estimate.grid()
    lo, hi = domain.interval
    step = 2.0 ** -(estimate.level + estimate.table.depth)
    count = points or max(2, int(math.ceil((hi - lo) / step)) + 1)
    return np.linspace(lo, hi, count)


def sup_distance(estimate, reference, grid):
    """``max |f_n(x) - f(x)|`` over ``grid``: a grid approximation of the sup-norm."""
    g = np.asarray(grid, dtype=float)
    if g.size == 0:
        raise ValueError("sup_distance needs a non-empty grid")
    return float(np.max(np.abs(estimate(g) - np.asarray(reference(g), dtype=float))))


def wavelet_empirical_process(table, j, h, samples, expected_h, interval=None, projection=None):
    """``sqrt(n) * (mean_i K_j(h)(X_i) - expected_h)``.

    ``h`` is projected over ``interval`` (defaults to the sample range padded
    by the wavelet support); pass a precomputed ``projection`` to reuse it
    across replications.
    """
    v = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    if projection is None:
        if interval is None:
            pad = table.width * 2.0**-j
            interval = (float(v.min()) - pad, float(v.max()) + pad)
        projection = project(table, j, h, interval)
    return math.sqrt(v.size) * (float(np.mean(projection(v))) - float(expected_h))


def sigma_hn(table, j, h, f, interval, quad=None, projection=None):
    """``E (K_j h(X))**2 - (E K_j h(X))**2`` for ``X ~ f`` on ``interval``.

    Raises ``ArithmeticError`` on a variance below ``-1e-12``.
    """
    quad = quad or DEFAULT_RULE.refined(8)
    if projection is None:
        projection = project(table, j, h, interval)
    x, w = quad.nodes_weights(*interval)
    fx = np.asarray(f(x), dtype=float)
    kh = projection(x)
    m1 = float(np.dot(w, fx * kh))
    var = float(np.dot(w, fx * kh * kh)) - m1 * m1
    if var < -1e-12:
        raise ArithmeticError(f"negative variance {var:.3g}: quadrature failed")
    return max(var, 0.0)


def write_density(estimate, grid, path):
    x = np.asarray(grid, dtype=float)
    fx = estimate(x)
    with open(path, "w", newline="") as fh:
        fh.write("x,fn\n")
        for a, b in zip(x, fx):
            fh.write(f"{float(a)!r},{float(b)!r}\n")
