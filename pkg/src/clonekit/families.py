"""Smooth one-parameter families with exact sufficient-statistic kernels.

Each family exposes density, sampler, score, Fisher information, the running
sufficient statistic ``S = sum_i omega_i``, and an exact conditional
resampler: a draw from the law of the sample given ``S``.  For the three
built-ins the score is affine in the outcome,

    ``score(theta, w) = c(theta) (w - mean(theta))``  with  ``c = fisher``,

so the normalized score sum is a bijective affine function of S and
conditioning on the score equals conditioning on S, which is exactly
samplable (arrangements for Bernoulli, multinomial for Poisson, a mean bridge
for the Gaussian).  Resampling a dataset on its own statistic leaves the
joint law invariant.

Parameter handling near the boundary: estimates and user inputs are clipped
to ``[lo + 1/n, hi - 1/n]`` intersected with the domain so that scores and
inverse Fisher information stay bounded on the working range.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .lawdist import EmpiricalLaw

logger = logging.getLogger(__name__)

_POISSON_TAIL = 1e-11


@dataclass(frozen=True)
class ScoreReport:
    """Fisher information at a point, with its smallest eigenvalue.

    One-parameter families carry scalars; ``min_eigenvalue`` must stay
    positive on the working range.  ``score_value`` is attached when the
    report is produced for a particular outcome.
    """

    fisher: float
    min_eigenvalue: float
    score_value: float | None = None

    def __post_init__(self) -> None:
        if not self.min_eigenvalue > 0:
            raise ValueError("Fisher information must be positive definite")


@dataclass(frozen=True)
class FamilyPoint:
    family: "Family"
    theta: float

    def __post_init__(self) -> None:
        self.family.require_in_domain(self.theta)


class Family:
    """Interface shared by the built-in one-parameter families."""

    name: str = ""
    param_lo: float = -math.inf
    param_hi: float = math.inf
    discrete: bool = False

    # -- parameter domain ------------------------------------------------

    def in_domain(self, theta: float) -> bool:
        return self.param_lo < theta < self.param_hi

    def require_in_domain(self, theta: float) -> None:
        if not self.in_domain(theta):
            raise ValueError(
                f"{self.name}: theta={theta} outside ({self.param_lo}, {self.param_hi})"
            )

    def clip_theta(self, theta: float, n: int) -> float:
        """Clip into the interior margin [lo + 1/n, hi - 1/n] (where finite).

        On bounded domains the margin is capped at a third of the width so
        the interval stays nonempty for tiny n.
        """
        lo, hi = self.param_lo, self.param_hi
        margin = 1.0 / n
        if math.isfinite(lo) and math.isfinite(hi):
            margin = min(margin, (hi - lo) / 3.0)
        if math.isfinite(lo):
            theta = max(theta, lo + margin)
        if math.isfinite(hi):
            theta = min(theta, hi - margin)
        return theta

    # -- single-outcome quantities ----------------------------------------

    def mean(self, theta: float) -> float:
        raise NotImplementedError

    def log_density(self, theta: float, omega):
        raise NotImplementedError

    def density(self, theta: float, omega):
        return np.exp(self.log_density(theta, omega))

    def score(self, theta: float, omega):
        """d/dtheta log density; zero-mean under the family itself."""
        self.require_in_domain(theta)
        out = self.fisher(theta) * (np.asarray(omega, dtype=float) - self.mean(theta))
        return out if out.ndim else float(out)

    def fisher(self, theta: float) -> float:
        raise NotImplementedError

    def fisher_info(self, theta: float, omega=None) -> ScoreReport:
        self.require_in_domain(theta)
        j = self.fisher(theta)
        value = None if omega is None else float(self.score(theta, omega))
        return ScoreReport(fisher=j, min_eigenvalue=j, score_value=value)

    def sample(self, theta: float, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    # -- sufficient statistic ---------------------------------------------

    @staticmethod
    def suff_stat(data: np.ndarray) -> float:
        data = np.asarray(data, dtype=float)
        if data.size == 0:
            raise ValueError("empty sample")
        return float(data.sum())

    def score_from_stat(self, theta: float, n: int, stat: float) -> float:
        """Normalized score sum as an affine function of S."""
        return self.fisher(theta) * (stat - n * self.mean(theta)) / math.sqrt(n)

    def stat_from_score(self, theta: float, n: int, score_sum: float) -> float:
        """Inverse of `score_from_stat`."""
        return n * self.mean(theta) + math.sqrt(n) * score_sum / self.fisher(theta)

    def stat_bounds(self, n: int) -> tuple[float, float]:
        """Achievable range of S for a sample of size n."""
        return (-math.inf, math.inf)

    def stat_pmf(self, theta: float, n: int) -> EmpiricalLaw:
        """Exact law of S under n i.i.d. draws (discrete families only)."""
        raise NotImplementedError(f"{self.name} has no discrete statistic law")

    def conditional_resample(
        self, theta: float, n: int, target_stat: float, rng: np.random.Generator
    ) -> np.ndarray:
        raise NotImplementedError

    # -- helpers -----------------------------------------------------------

    def round_stat(
        self, target: float, n: int, rng: np.random.Generator
    ) -> tuple[int, bool]:
        """Randomized rounding of a real statistic target, then clipping.

        ``floor(s) + Bernoulli(frac(s))`` keeps the expectation, avoiding the
        half-integer bias a deterministic rule would inject into count laws.
        Returns the integer target and whether clipping was applied.
        """
        lo, hi = self.stat_bounds(n)
        # snap floating-point residue so exact-integer targets stay exact
        nearest = round(target)
        if abs(target - nearest) < 1e-9 * max(1.0, abs(target)):
            t = int(nearest)
        else:
            fl = math.floor(target)
            t = int(fl) + (1 if rng.random() < target - fl else 0)
        clipped = False
        if t < lo:
            t, clipped = int(lo), True
        elif t > hi:
            t, clipped = int(hi), True
        if clipped:
            logger.warning(
                "%s: statistic target %.3f clipped into [%s, %s] for n=%d",
                self.name, target, lo, hi, n,
            )
        return t, clipped

    def __repr__(self) -> str:  # pragma: no cover
        return f"{type(self).__name__}()"


class Bernoulli(Family):
    """Coin flips with success probability theta in (0, 1)."""

    name = "bernoulli"
    param_lo = 0.0
    param_hi = 1.0
    discrete = True

    def mean(self, theta: float) -> float:
        return theta

    def fisher(self, theta: float) -> float:
        self.require_in_domain(theta)
        return 1.0 / (theta * (1.0 - theta))

    def log_density(self, theta: float, omega):
        self.require_in_domain(theta)
        w = np.asarray(omega, dtype=float)
        out = np.where(w == 1.0, math.log(theta),
                       np.where(w == 0.0, math.log1p(-theta), -math.inf))
        return out if out.ndim else float(out)

    def sample(self, theta, n, rng):
        self.require_in_domain(theta)
        return (rng.random(n) < theta).astype(np.int64)

    def stat_bounds(self, n):
        return (0, n)

    def stat_pmf(self, theta, n):
        self.require_in_domain(theta)
        k = np.arange(n + 1)
        logp = (
            gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            + k * math.log(theta) + (n - k) * math.log1p(-theta)
        )
        p = np.exp(logp)
        return EmpiricalLaw(k, p / p.sum())

    def conditional_resample(self, theta, n, target_stat, rng):
        t, _ = self.round_stat(target_stat, n, rng)
        out = np.zeros(n, dtype=np.int64)
        out[:t] = 1
        rng.shuffle(out)
        return out


class Poisson(Family):
    """Counts with intensity theta > 0."""

    name = "poisson"
    param_lo = 0.0
    param_hi = math.inf
    discrete = True

    def mean(self, theta: float) -> float:
        return theta

    def fisher(self, theta: float) -> float:
        self.require_in_domain(theta)
        return 1.0 / theta

    def log_density(self, theta: float, omega):
        self.require_in_domain(theta)
        w = np.asarray(omega, dtype=float)
        valid = (w >= 0) & (w == np.floor(w))
        safe = np.where(valid, w, 0.0)
        out = np.where(valid, safe * math.log(theta) - theta - gammaln(safe + 1.0),
                       -math.inf)
        return out if out.ndim else float(out)

    def sample(self, theta, n, rng):
        self.require_in_domain(theta)
        return rng.poisson(theta, n).astype(np.int64)

    def stat_bounds(self, n):
        return (0, math.inf)

    def stat_pmf(self, theta, n):
        self.require_in_domain(theta)
        lam = n * theta
        hi = int(lam + 14.0 * math.sqrt(lam) + 30.0)
        k = np.arange(hi + 1)
        logp = k * math.log(lam) - lam - gammaln(k + 1.0)
        p = np.exp(logp)
        tail = 1.0 - p.sum()
        if tail > _POISSON_TAIL:
            raise RuntimeError(f"statistic law truncation left mass {tail}")
        return EmpiricalLaw(k, p / p.sum())

    def conditional_resample(self, theta, n, target_stat, rng):
        # given the total, the cell counts are uniform-multinomial
        t, _ = self.round_stat(target_stat, n, rng)
        return rng.multinomial(t, np.full(n, 1.0 / n)).astype(np.int64)


class GaussianLocation(Family):
    """Normal with unknown location and known scale sigma."""

    name = "gauss-loc"
    param_lo = -math.inf
    param_hi = math.inf
    discrete = False

    def __init__(self, sigma: float = 1.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def mean(self, theta: float) -> float:
        return theta

    def fisher(self, theta: float) -> float:
        return 1.0 / self.sigma**2

    def log_density(self, theta: float, omega):
        w = np.asarray(omega, dtype=float)
        out = (
            -0.5 * ((w - theta) / self.sigma) ** 2
            - math.log(self.sigma)
            - 0.5 * math.log(2.0 * math.pi)
        )
        return out if out.ndim else float(out)

    def sample(self, theta, n, rng):
        return theta + self.sigma * rng.standard_normal(n)

    def conditional_resample(self, theta, n, target_stat, rng):
        # bridge: fresh noise recentered so the sample mean is pinned
        z = self.sigma * rng.standard_normal(n)
        return target_stat / n + (z - z.mean())

    def __repr__(self) -> str:  # pragma: no cover
        return f"GaussianLocation(sigma={self.sigma})"


_REGISTRY = {
    "bernoulli": Bernoulli,
    "poisson": Poisson,
    "gauss-loc": GaussianLocation,
}


def get_family(family_id: str, **kwargs) -> Family:
    """Family by CLI id: bernoulli, poisson, or gauss-loc."""
    try:
        cls = _REGISTRY[family_id]
    except KeyError:
        raise ValueError(f"unknown family {family_id!r}; "
                         f"choose from {sorted(_REGISTRY)}") from None
    return cls(**kwargs)
