"""Study configuration and Monte Carlo execution.

A study is described by a flat ``key = value`` file whose keys are the
:class:`StudyConfig` fields. Every replication ``r`` draws its samples from
a PCG64 stream seeded with :func:`replication_seed` ``(master_seed, r)``,
so results do not depend on execution order or on the number of workers.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache

import numpy as np
from scipy import stats

from . import __version__
from .density import SampleSet, fit_density, read_samples, sup_distance, write_density
from .errors import WaveDivError
from .functionals import divergence, parse_kind, phi_functional, symmetrized_divergence, trim_domain
from .inference import (
    SIDES,
    confidence_interval,
    estimate_divergence,
    plug_in_variance,
    rate_bound_constants,
    standardized_statistic,
)
from .oracles import closed_form_divergence, parse_distribution, quadrature_oracle
from .quadrature import QuadratureRule
from .wavelets import DEFAULT_DEPTH, DEFAULT_FAMILY, build_scaling_table, get_filter, load_filter

MODES = ("estimate", "test", "mc-normality", "mc-coverage", "rate-study", "density-dump", "oracle")
MAX_EXCLUDED_FRACTION = 0.05

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    """The splitmix64 finaliser, a bijection on 64-bit integers."""
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(master_seed, index):
    """Seed of replication ``index``: distinct for all indices below ``2**64``."""
    return splitmix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


class StudyError(WaveDivError, RuntimeError):
    """A study could not run or lost too many replications."""


@dataclass(frozen=True)
class StudyConfig:
    mode: str = "estimate"
    kind: str = "kl"
    alpha: float | None = None
    side: str = "two-sample"
    f: str | None = None
    g: str | None = None
    x_csv: str | None = None
    y_csv: str | None = None
    n: int = 1000
    m: int | None = None
    n_values: tuple = (500, 2000, 8000)
    replications: int = 1
    epsilon: float = 0.02
    domain_construction: str = "union"
    kappa_min: float = 1e-8
    family: str = DEFAULT_FAMILY
    filter_path: str | None = None
    depth: int = DEFAULT_DEPTH
    quadrature_scheme: str = "composite-simpson"
    quadrature_points: int = 2048
    level: int | None = None
    confidence: float = 0.95
    reference: float | None = None
    smoothness: float = 1.0
    grid_points: int = 1025
    master_seed: int = 0
    output: str | None = None
    qq_output: str | None = None
    statistics_output: str | None = None
    density_output: str | None = None

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}; expected one of {SIDES}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        parse_kind(self.kind, self.alpha)
        QuadratureRule(self.quadrature_scheme, self.quadrature_points)
        if not 0 < self.confidence < 1:
            raise ValueError(f"confidence must lie in (0, 1), got {self.confidence}")
        for p in (self.x_csv, self.y_csv, self.filter_path):
            if p is not None and not os.path.isfile(p):
                raise FileNotFoundError(f"input file not found: {p}")
        if self.mode in ("mc-normality", "mc-coverage", "rate-study") and (self.f is None or self.g is None):
            raise ValueError(f"mode {self.mode} needs both f and g distributions")
        if self.mode in ("mc-normality", "mc-coverage", "rate-study", "estimate", "test"):
            sizes = list(self.n_values) if self.mode == "rate-study" else [self.n, self.m or self.n]
            if min(sizes) < 2:
                raise ValueError("inference modes need sample sizes of at least 2")
        if self.mode == "oracle" and (self.f is None or self.g is None):
            raise ValueError("oracle mode needs f and g distributions")
        return self

    @property
    def sample_m(self):
        return self.n if self.m is None else self.m

    def echo(self):
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(StudyConfig)}


def _coerce(key, text):
    if key not in _FIELD_TYPES:
        raise KeyError(f"unknown configuration key {key!r}")
    if text is None:
        return None
    if not isinstance(text, str):
        return tuple(text) if key == "n_values" else text
    text = text.strip()
    kind = str(_FIELD_TYPES[key])
    if text.lower() in ("", "none", "null") and "None" in kind:
        return None
    if key == "n_values":
        return tuple(int(v) for v in text.replace(",", " ").split())
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def load_config(path=None, overrides=None):
    """Read a flat ``key = value`` file (``#`` starts a comment) and apply overrides."""
    values = {}
    if path is not None:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, val = (s.strip() for s in line.split("=", 1))
                values[key] = _coerce(key, val)
    for key, val in (overrides or {}).items():
        values[key] = _coerce(key, val)
    return StudyConfig(**values)


@lru_cache(maxsize=8)
def _table(family, depth, filter_path):
    flt = load_filter(filter_path) if filter_path else get_filter(family)
    return build_scaling_table(flt, depth)


def _setup(cfg):
    return (
        _table(cfg.family, cfg.depth, cfg.filter_path),
        QuadratureRule(cfg.quadrature_scheme, cfg.quadrature_points),
    )


def _uses_x(side):
    return side not in ("second", "symmetrized-second")


def _uses_y(side):
    return side not in ("first", "symmetrized-first")


def _point(cfg, f_eval, g_eval, domain, quad):
    fn = symmetrized_divergence if cfg.side.startswith("symmetrized") else divergence
    return fn(cfg.kind, f_eval, g_eval, domain, quad, cfg.alpha)


def _oracle_reference(cfg, f, g, domain):
    ref_f = quadrature_oracle(f, g, cfg.kind, domain=domain, alpha=cfg.alpha)
    if not cfg.side.startswith("symmetrized"):
        return ref_f
    ref_b = quadrature_oracle(g, f, cfg.kind, domain=domain, alpha=cfg.alpha)
    lo, hi = sorted((ref_f, ref_b))
    return (lo + hi) / 2


def _replicate(cfg, index, domain, reference):
    """One Monte Carlo replication with the true-law domain and oracle reference."""
    table, quad = _setup(cfg)
    f, g = parse_distribution(cfg.f), parse_distribution(cfg.g)
    seed = replication_seed(cfg.master_seed, index)
    rng = np.random.Generator(np.random.PCG64(seed))
    out = {"index": index, "seed": seed}
    try:
        x = SampleSet(f.draw(cfg.n, rng), "x") if _uses_x(cfg.side) else None
        y = SampleSet(g.draw(cfg.sample_m, rng), "y") if _uses_y(cfg.side) else None
        f_est = fit_density(x, table, cfg.level) if x is not None else f.pdf
        g_est = fit_density(y, table, cfg.level) if y is not None else g.pdf
        point = _point(cfg, f_est, g_est, domain, quad)
        var = plug_in_variance(cfg.kind, cfg.side, x, y, f_est, g_est, domain, quad, cfg.alpha)
        z = standardized_statistic(point, reference, var)
        lo, hi = confidence_interval(point, var, cfg.confidence)
        out.update(point=point, variance=var.scaled, statistic=z, ci=[lo, hi], covered=bool(lo <= reference <= hi))
    except (WaveDivError, ValueError, ArithmeticError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def _rate_replicate(cfg, index, n, domain, reference, bound, grid):
    table, quad = _setup(cfg)
    f, g = parse_distribution(cfg.f), parse_distribution(cfg.g)
    seed = replication_seed(cfg.master_seed, index)
    rng = np.random.Generator(np.random.PCG64(seed))
    out = {"index": index, "seed": seed, "n": n}
    try:
        m = n if cfg.m is None else cfg.m
        f_est = fit_density(SampleSet(f.draw(n, rng)), table, cfg.level, cfg.smoothness) if _uses_x(cfg.side) else f.pdf
        g_est = fit_density(SampleSet(g.draw(m, rng)), table, cfg.level, cfg.smoothness) if _uses_y(cfg.side) else g.pdf
        point = _point(cfg, f_est, g_est, domain, quad)
        # c_{n,m}: the larger sup-norm error of the estimated densities
        a_n = max(
            sup_distance(f_est, f.pdf, grid) if _uses_x(cfg.side) else 0.0,
            sup_distance(g_est, g.pdf, grid) if _uses_y(cfg.side) else 0.0,
        )
        err = abs(point - reference)
        out.update(point=point, abs_error=err, a_n_proxy=a_n, within_bound=bool(err <= 1.5 * bound * a_n))
    except (WaveDivError, ValueError, ArithmeticError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def _workers():
    raw = os.environ.get("WAVEDIV_THREADS", "1").strip() or "1"
    count = int(raw)
    if count < 0:
        raise ValueError(f"WAVEDIV_THREADS must be >= 0, got {count}")
    return (os.cpu_count() or 1) if count == 0 else count


def _map(func, arg_lists):
    workers = _workers()
    if workers <= 1 or len(arg_lists) < 2:
        return [func(*a) for a in arg_lists]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, *a) for a in arg_lists]
        return [fut.result() for fut in futures]


def _excluded(reps):
    bad = [r for r in reps if "error" in r]
    if len(bad) > MAX_EXCLUDED_FRACTION * len(reps):
        raise StudyError(
            f"{len(bad)} of {len(reps)} replications failed (limit {MAX_EXCLUDED_FRACTION:.0%}); first: {bad[0]['error']}"
        )
    return len(bad)


def _true_domain(cfg, f, g):
    return trim_domain(f, g, cfg.epsilon, cfg.kappa_min, cfg.domain_construction)


def _domain_record(domain):
    return {
        "interval": list(domain.interval),
        "epsilon": domain.epsilon,
        "kappa_floor": domain.kappa_floor,
        "kappa_cap": domain.kappa_cap,
        "masses": list(domain.masses) if domain.masses else None,
    }


def _normality_summary(reps, confidence):
    ok = [r for r in reps if "error" not in r]
    z = np.array([r["statistic"] for r in ok])
    covered = np.array([r["covered"] for r in ok])
    return {
        "count": len(ok),
        "mean": float(np.mean(z)),
        "sd": float(np.std(z, ddof=1)) if z.size > 1 else 0.0,
        "ks_distance": float(stats.kstest(z, "norm").statistic),
        "coverage": float(np.mean(covered)),
        "confidence": confidence,
    }


def _write_qq(reps, path):
    z = np.sort([r["statistic"] for r in reps if "error" not in r])
    theo = stats.norm.ppf((np.arange(1, z.size + 1) - 0.5) / z.size)
    with open(path, "w") as fh:
        fh.write("theoretical,empirical\n")
        for a, b in zip(theo, z):
            fh.write(f"{float(a)!r},{float(b)!r}\n")


def _write_statistics(reps, path):
    with open(path, "w") as fh:
        fh.write("index,seed,statistic\n")
        for r in reps:
            if "error" not in r:
                fh.write(f"{r['index']},{r['seed']},{r['statistic']!r}\n")


def _run_mc(cfg):
    f, g = parse_distribution(cfg.f), parse_distribution(cfg.g)
    domain = _true_domain(cfg, f, g)
    reference = _oracle_reference(cfg, f, g, domain)
    reps = _map(_replicate, [(cfg, r, domain, reference) for r in range(cfg.replications)])
    excluded = _excluded(reps)
    if cfg.qq_output:
        _write_qq(reps, cfg.qq_output)
    if cfg.statistics_output:
        _write_statistics(reps, cfg.statistics_output)
    return {
        "reference": reference,
        "domain": _domain_record(domain),
        "replications": reps,
        "excluded": excluded,
        "summary": _normality_summary(reps, cfg.confidence),
    }


def _run_rate(cfg):
    f, g = parse_distribution(cfg.f), parse_distribution(cfg.g)
    domain = _true_domain(cfg, f, g)
    reference = _oracle_reference(cfg, f, g, domain)
    consts = rate_bound_constants(cfg.kind, f.pdf, g.pdf, domain, alpha=cfg.alpha)
    sym = cfg.side.startswith("symmetrized")
    bound = (consts["A14"] if _uses_x(cfg.side) else 0.0) + (consts["A23"] if _uses_y(cfg.side) else 0.0) if sym else (
        (consts["A1"] if _uses_x(cfg.side) else 0.0) + (consts["A2"] if _uses_y(cfg.side) else 0.0)
    )
    grid = np.linspace(*domain.interval, cfg.grid_points)
    jobs, index = [], 0
    for n in cfg.n_values:
        for _ in range(cfg.replications):
            jobs.append((cfg, index, n, domain, reference, bound, grid))
            index += 1
    reps = _map(_rate_replicate, jobs)
    excluded = _excluded(reps)
    by_n = {}
    for n in cfg.n_values:
        ok = [r for r in reps if r["n"] == n and "error" not in r]
        by_n[str(n)] = {
            "count": len(ok),
            "median_abs_error": float(np.median([r["abs_error"] for r in ok])),
            "median_a_n_proxy": float(np.median([r["a_n_proxy"] for r in ok])),
            "fraction_within_bound": float(np.mean([r["within_bound"] for r in ok])),
        }
    medians = [by_n[str(n)]["median_abs_error"] for n in cfg.n_values]
    return {
        "reference": reference,
        "domain": _domain_record(domain),
        "rate_bound": {**consts, "bound_constant": bound},
        "replications": reps,
        "excluded": excluded,
        "summary": {"by_n": by_n, "strictly_decreasing": all(a > b for a, b in zip(medians, medians[1:]))},
    }


def _inputs(cfg):
    """Samples for estimate/test/density modes: from CSV files or seeded draws."""
    rng = np.random.Generator(np.random.PCG64(replication_seed(cfg.master_seed, 0)))
    x = y = None
    if cfg.x_csv:
        x = read_samples(cfg.x_csv, "x")
    elif cfg.f:
        x = SampleSet(parse_distribution(cfg.f).draw(cfg.n, rng), "x", {"generator": "PCG64", "seed": cfg.master_seed})
    if cfg.y_csv:
        y = read_samples(cfg.y_csv, "y")
    elif cfg.g:
        y = SampleSet(parse_distribution(cfg.g).draw(cfg.sample_m, rng), "y", {"generator": "PCG64", "seed": cfg.master_seed})
    return x, y


def _run_estimate(cfg):
    table, quad = _setup(cfg)
    x, y = _inputs(cfg)
    if x is None or y is None:
        raise ValueError("estimate needs two samples (x_csv/y_csv or f/g with n/m)")
    f_est = fit_density(x, table, cfg.level, cfg.smoothness)
    g_est = fit_density(y, table, cfg.level, cfg.smoothness)
    domain = trim_domain(f_est, g_est, cfg.epsilon, cfg.kappa_min, cfg.domain_construction)
    side = "symmetrized-two-sample" if cfg.side.startswith("symmetrized") else "two-sample"
    rep = estimate_divergence(
        cfg.kind, f_est, g_est, domain, x, y, side, quad, cfg.alpha, cfg.confidence,
        reference=cfg.reference, provenance={"x": x.seed_provenance, "y": y.seed_provenance},
    )
    out = rep.to_dict()
    out["domain"] = _domain_record(domain)
    out["levels"] = {"x": f_est.level, "y": g_est.level}
    return out


def _run_density(cfg):
    table, _ = _setup(cfg)
    x, _ = _inputs(cfg)
    if x is None:
        raise ValueError("density-dump needs a sample (x_csv or f with n)")
    est = fit_density(x, table, cfg.level, cfg.smoothness)
    lo, hi = est.support
    grid = np.linspace(lo, hi, cfg.grid_points)
    if cfg.density_output:
        write_density(est, grid, cfg.density_output)
    return {
        "level": est.level,
        "n": est.n,
        "support": list(est.support),
        "mass": est.mass(),
        "coefficients": {str(k): v for k, v in est.coefficient_map().items()},
        "grid": {"lo": lo, "hi": hi, "points": cfg.grid_points},
    }


def _run_oracle(cfg):
    f, g = parse_distribution(cfg.f), parse_distribution(cfg.g)
    name = phi_functional(cfg.kind, cfg.alpha).name
    out = {"kind": name, "f": str(f), "g": str(g)}
    if cfg.epsilon > 0:
        domain = _true_domain(cfg, f, g)
        out["domain"] = _domain_record(domain)
        out["quadrature"] = quadrature_oracle(f, g, cfg.kind, domain=domain, alpha=cfg.alpha)
        return out
    out["quadrature"] = quadrature_oracle(f, g, cfg.kind, alpha=cfg.alpha)
    try:
        out["closed_form"] = closed_form_divergence(f, g, cfg.kind, cfg.alpha)
    except WaveDivError as exc:
        out["closed_form"] = None
        out["closed_form_note"] = str(exc)
    return out


_RUNNERS = {
    "estimate": _run_estimate,
    "test": _run_estimate,
    "mc-normality": _run_mc,
    "mc-coverage": _run_mc,
    "rate-study": _run_rate,
    "density-dump": _run_density,
    "oracle": _run_oracle,
}


def run_study(cfg):
    """Run the study described by ``cfg`` and return its report as a dict.

    The report holds ``mode``, ``config``, ``version``, mode-specific results
    and ``wall_clock_seconds``; everything except the last is a deterministic
    function of the configuration.
    """
    cfg.validate()
    start = time.perf_counter()
    body = _RUNNERS[cfg.mode](cfg)
    report = {"mode": cfg.mode, "version": __version__, "config": cfg.echo(), **body}
    report["wall_clock_seconds"] = time.perf_counter() - start
    return _plain(report)


def _plain(obj):
    """Convert numpy scalars and tuples so the report serialises identically every time."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def with_overrides(cfg, **kw):
    return replace(cfg, **{k: _coerce(k, v) for k, v in kw.items()})
