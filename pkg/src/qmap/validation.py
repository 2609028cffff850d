"""Monte Carlo checks of the concentration bounds used in the analysis.

Every estimator is deterministic given its parameters and seed, and reports
the matching theoretical bound so callers can assert estimate <= bound
wherever the bound is informative (< 1).  Bounds that blow up at desk scale
are flagged as vacuous instead of being silently clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .quantize import quantize_vector
from .sources import SourceModel, ktuple_law, quantized_kernel, sample_path

C_TYPES = 1.0 / (2.0 * math.log(2.0))  # constant in the type-deviation bounds
_Z95 = 1.959963984540054


@dataclass
class TailEstimate:
    """A Monte Carlo tail probability next to its theoretical bound."""

    name: str
    trials: int
    hits: int
    estimate: float
    ci_low: float
    ci_high: float
    bound: float
    params: dict = field(default_factory=dict)
    extra_ok: bool = True  # side conditions beyond estimate <= bound

    @property
    def bound_vacuous(self) -> bool:
        return not (self.bound < 1.0)

    @property
    def respects_bound(self) -> bool:
        return (self.bound_vacuous or self.estimate <= self.bound) and self.extra_ok

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "hits": self.hits,
            "estimate": self.estimate,
            "ci95": [self.ci_low, self.ci_high],
            "bound": self.bound if math.isfinite(self.bound) else None,
            "bound_vacuous": self.bound_vacuous,
            "respects_bound": self.respects_bound,
            "params": _jsonable(self.params),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _binomial_estimate(name: str, hits: int, trials: int, bound: float,
                       params: dict) -> TailEstimate:
    p_hat = hits / trials
    # normal approximation with continuity correction; adequate at >= 2000 trials
    half = _Z95 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / trials) + 0.5 / trials
    return TailEstimate(
        name=name,
        trials=trials,
        hits=hits,
        estimate=p_hat,
        ci_low=max(0.0, p_hat - half),
        ci_high=min(1.0, p_hat + half),
        bound=bound,
        params=params,
    )


def type_deviation_bound(n: int, k: int, g: int, epsilon: float,
                         alphabet_size: int) -> tuple[float, float]:
    """(bound, log2 of bound) for the k-type l1 deviation of a mixing chain:

        2^{c eps^2 / 8} (k+g) n^{S^k} 2^{- n c eps^2 / (8 (k+g))}.
    """
    log2 = (
        C_TYPES * epsilon ** 2 / 8.0
        + math.log2(k + g)
        + alphabet_size ** k * math.log2(n)
        - n * C_TYPES * epsilon ** 2 / (8.0 * (k + g))
    )
    return (2.0 ** log2 if log2 < 1023 else math.inf), log2


def markov_type_deviation_bound(n: int, k: int, g: int, epsilon: float,
                                alphabet_size: int) -> tuple[float, float]:
    """Same tail with the 2^{c eps^2 / 4} prefactor that the quantized-Markov
    chain analysis carries."""
    bound, log2 = type_deviation_bound(n, k, g, epsilon, alphabet_size)
    extra = C_TYPES * epsilon ** 2 / 8.0
    log2 += extra
    return (2.0 ** log2 if log2 < 1023 else math.inf), log2


def mc_empirical_deviation(
    model: SourceModel,
    n: int,
    k: int,
    b: int,
    epsilon: float,
    trials: int,
    seed: int,
    g: int = 8,
) -> TailEstimate:
    """Estimate P(||phat_k - mu_k||_1 >= epsilon) for the quantized model.

    Paths are sampled, quantized, and their k-th order types compared to the
    exact k-tuple law of the kernel.  The gap parameter g enters only the
    reported bound (it is not constructive for general mixing sources).
    """
    if n <= k or trials < 1:
        raise ValueError("need n > k and trials >= 1")
    kernel = quantized_kernel(model, b)
    s = kernel.alphabet.size
    law = ktuple_law(kernel, k)
    mu = np.zeros(s ** k)
    for key, prob in law.items():
        code = 0
        for sym in key:
            code = code * s + sym
        mu[code] = prob

    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, min(trials, 2_000_000 // n))
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        paths = np.empty((t, n), dtype=np.int64)
        for row in range(t):
            path = sample_path(model, n, int(rng.integers(0, 2 ** 63 - 1)))
            paths[row] = quantize_vector(path, kernel.alphabet)
        codes = np.zeros((t, n - k + 1), dtype=np.int64)
        for j in range(k):
            codes = codes * s + paths[:, j: n - k + 1 + j]
        flat = (np.arange(t)[:, None] * (s ** k) + codes).ravel()
        counts = np.bincount(flat, minlength=t * s ** k).reshape(t, s ** k)
        emp = counts / (n - k + 1)
        dists = np.abs(emp - mu[None, :]).sum(axis=1)
        hits += int((dists >= epsilon).sum())
        done += t

    bound, log2 = type_deviation_bound(n, k, g, epsilon, s)
    mk_bound, mk_log2 = markov_type_deviation_bound(n, k, g, epsilon, s)
    return _binomial_estimate(
        "empirical_deviation",
        hits,
        trials,
        bound,
        {
            "model": type(model).__name__,
            "n": n, "k": k, "b": b, "epsilon": epsilon, "g": g, "seed": seed,
            "bound_log2": log2,
            "markov_bound": mk_bound, "markov_bound_log2": mk_log2,
        },
    )


def chi_square_upper_bound(m: int, tau: float) -> float:
    return math.exp(-0.5 * m * (tau - math.log1p(tau)))


def chi_square_lower_bound(m: int, tau: float) -> float:
    if tau >= 1.0:
        return 0.0
    return math.exp(0.5 * m * (tau + math.log1p(-tau)))


def chi_square_tail(m: int, tau: float, trials: int, seed: int
                    ) -> tuple[TailEstimate, TailEstimate]:
    """Estimates of P(sum U_i^2 > m(1+tau)) and P(sum U_i^2 < m(1-tau)) for
    standard normal U_i, next to their Chernoff bounds."""
    if m < 1 or tau <= 0 or trials < 1:
        raise ValueError("need m >= 1, tau > 0, trials >= 1")
    rng = np.random.default_rng(seed)
    if m * trials <= 2 ** 24:
        sums = (rng.standard_normal((trials, m)) ** 2).sum(axis=1)
    else:
        # the statistic is exactly chi-square(m); sample it directly at scale
        sums = rng.chisquare(m, trials)
    params = {"m": m, "tau": tau, "seed": seed}
    upper = _binomial_estimate(
        "chi_square_upper",
        int((sums > m * (1.0 + tau)).sum()),
        trials,
        chi_square_upper_bound(m, tau),
        params,
    )
    lower = _binomial_estimate(
        "chi_square_lower",
        int((sums < m * (1.0 - tau)).sum()),
        trials,
        chi_square_lower_bound(m, tau),
        params,
    )
    return upper, lower


def inner_product_bound(alpha: float, tau: float, m: int,
                        s_points: int = 2000) -> float:
    """min over s in (0, 1/(1-alpha)) of the Chernoff exponent bound
    exp(m (alpha - tau) s - (m/2) ln((1 + s alpha)^2 - s^2))."""
    s_hi = 1.0 / (1.0 - alpha)
    s = np.linspace(s_hi / s_points, s_hi * (1.0 - 1.0 / s_points), s_points)
    arg = (1.0 + s * alpha) ** 2 - s ** 2
    ok = arg > 0
    exponent = m * (alpha - tau) * s[ok] - 0.5 * m * np.log(arg[ok])
    return float(np.exp(exponent.min()))


def inner_product_tail(alpha: float, m: int, tau: float, trials: int,
                       seed: int) -> TailEstimate:
    """Estimate P((1/m) <Au, Av> - alpha <= -tau) for unit u, v at angle
    cos^-1(alpha).  The statistic depends on (u, v) only through alpha, so
    correlated normal pairs are sampled directly."""
    if not -1.0 < alpha < 1.0:
        raise ValueError("alpha must be in (-1, 1)")
    if m < 1 or tau <= 0 or trials < 1:
        raise ValueError("need m >= 1, tau > 0, trials >= 1")
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, int(5e6) // m)
    done = 0
    root = math.sqrt(1.0 - alpha ** 2)
    while done < trials:
        t = min(chunk, trials - done)
        xs = rng.standard_normal((t, m))
        zs = rng.standard_normal((t, m))
        ys = alpha * xs + root * zs
        stat = (xs * ys).mean(axis=1)
        hits += int((stat - alpha <= -tau).sum())
        done += t
    return _binomial_estimate(
        "inner_product",
        hits,
        trials,
        inner_product_bound(alpha, tau, m),
        {"alpha": alpha, "m": m, "tau": tau, "seed": seed,
         "flat_bound": 2.0 ** (-0.05 * m) if tau >= 0.45 else None},
    )


def f_exponent(alpha: np.ndarray | float, s: np.ndarray | float) -> np.ndarray:
    """Per-measurement exponent (log2 e) (0.5 ln((1+s a)^2 - s^2) - (a - 0.45) s)."""
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    arg = (1.0 + s * alpha) ** 2 - s ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        val = math.log2(math.e) * (0.5 * np.log(arg) - (alpha - 0.45) * s)
    return np.where(arg > 0, val, -np.inf)


def _max_over_s(alpha: float, s_fracs: np.ndarray) -> float:
    s_hi = 1.0 / (1.0 - alpha)
    s = s_fracs * s_hi
    vals = f_exponent(alpha, s)
    best = int(np.argmax(vals))
    # local refinement around the best grid point at 1e-4 resolution in s
    lo = s[max(0, best - 1)]
    hi = s[min(len(s) - 1, best + 1)]
    fine = np.arange(lo, hi, 1e-4)
    if fine.size:
        vals_fine = f_exponent(alpha, fine)
        return float(max(vals[best], vals_fine.max()))
    return float(vals[best])


def f_minimax(alpha_grid: np.ndarray | None = None,
              s_grid: np.ndarray | None = None) -> float:
    """min over alpha of max over s of the exponent; the flat 2^{-0.05 m}
    tail bound holds when this stays >= 0.05.

    s_grid holds fractions of the per-alpha domain (0, 1/(1-alpha)).
    """
    if alpha_grid is None:
        alpha_grid = np.linspace(-0.999, 0.999, 401)
    if s_grid is None:
        s_grid = np.linspace(1e-4, 1.0 - 1e-4, 1000)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any((alpha_grid <= -1) | (alpha_grid >= 1)):
        raise ValueError("alpha grid must lie inside (-1, 1)")
    if np.any((s_grid <= 0) | (s_grid >= 1)):
        raise ValueError("s grid must hold fractions inside (0, 1)")
    return min(_max_over_s(float(a), s_grid) for a in alpha_grid)


def gaussian_projection_check(n: int, trials: int, seed: int) -> TailEstimate:
    """Check that <U, V> / ||U|| is standard normal and uncorrelated with
    ||U|| for independent standard normal vectors.

    estimate is the Kolmogorov-Smirnov distance to N(0,1) with a 0.02
    acceptance bound; the empirical correlation sits in params.
    """
    if n < 2 or trials < 1:
        raise ValueError("need n >= 2 and trials >= 1")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((trials, n))
    v = rng.standard_normal((trials, n))
    norms = np.linalg.norm(u, axis=1)
    stat = (u * v).sum(axis=1) / norms
    ks = float(stats.kstest(stat, "norm").statistic)
    corr = float(np.corrcoef(stat, norms)[0, 1])
    # Dvoretzky-Kiefer-Wolfowitz 95% band around the empirical KS distance
    half = math.sqrt(math.log(2.0 / 0.05) / (2.0 * trials))
    return TailEstimate(
        name="gaussian_projection",
        trials=trials,
        hits=0,
        estimate=ks,
        ci_low=max(0.0, ks - half),
        ci_high=ks + half,
        bound=0.02,
        params={
            "n": n, "seed": seed,
            "correlation": corr, "correlation_bound": 0.03,
            "mean": float(stat.mean()), "variance": float(stat.var()),
        },
        extra_ok=abs(corr) <= 0.03,
    )
