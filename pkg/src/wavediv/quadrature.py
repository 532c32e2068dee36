"""Fixed-grid composite quadrature rules."""

from dataclasses import dataclass

import numpy as np

SCHEMES = ("composite-simpson", "composite-midpoint")


@dataclass(frozen=True)
class QuadratureRule:
    """Composite rule with ``points`` subintervals on a bounded interval.

    Parameters
    ----------
    scheme : str
        ``"composite-simpson"`` or ``"composite-midpoint"``.
    points : int
        Number of subintervals M. At least 64; even for Simpson.
    """

    scheme: str = "composite-simpson"
    points: int = 2048

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}; expected one of {SCHEMES}")
        if int(self.points) != self.points or self.points < 64:
            raise ValueError(f"quadrature needs at least 64 subintervals, got {self.points}")
        if self.scheme == "composite-simpson" and self.points % 2:
            raise ValueError(f"Simpson's rule needs an even subinterval count, got {self.points}")

    def spacing(self, a, b):
        return (b - a) / self.points

    def nodes_weights(self, a, b):
        """Return nodes and weights on ``[a, b]``."""
        a, b = float(a), float(b)
        if not b > a:
            raise ValueError(f"empty integration interval [{a}, {b}]")
        m = self.points
        h = (b - a) / m
        if self.scheme == "composite-simpson":
            x = np.linspace(a, b, m + 1)
            w = np.full(m + 1, 2.0)
            w[1::2] = 4.0
            w[0] = w[-1] = 1.0
            return x, w * (h / 3.0)
        x = a + h * (np.arange(m) + 0.5)
        return x, np.full(m, h)

    def integrate(self, func, a, b):
        """Integrate a vectorised ``func`` over ``[a, b]``."""
        x, w = self.nodes_weights(a, b)
        return float(np.dot(w, func(x)))

    def refined(self, factor=2):
        return QuadratureRule(self.scheme, self.points * factor)


DEFAULT_RULE = QuadratureRule()
