"""Linear-programming oracle for one-sided deficiency of finite experiments.

Given two experiments with a common parameter list, written as row-stochastic
matrices P (p x K_in) and Q (p x K_out), the deficiency is

    ``inf over column-stochastic L of  max over rows  || L P_t - Q_t ||_1``,

realized exactly as a linear program through slack variables bounding the
absolute deviations.  This is the finite, computable form of the
randomization criterion, used as an independent route to the Gaussian
amplifier loss: discretizations of shifted Gaussian pairs are built with
exact CDF cell masses (`discretize_gaussian_pair`), and the LP value is
monotone in the shift bound and converges to the closed-form constant as the
bound grows.

The LP is solved by HiGHS through ``scipy.optimize.linprog`` with sparse
constraints; problem sizes are capped at 40 000 kernel variables, which keeps
instances at desk scale.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import ndtr

MODE_MEAN_SHIFT = "mean-shift"        # source N(h, s2)        -> target N(sqrt(r) h, s2)
MODE_VARIANCE_EXCESS = "variance-excess"  # source N(sqrt(r) h, r s2) -> target N(sqrt(r) h, s2)
MODE_COV_ROOT = "cov-root"            # source N(h, s2)        -> target N(h, sqrt(r) s2)
_MODES = (MODE_MEAN_SHIFT, MODE_VARIANCE_EXCESS, MODE_COV_ROOT)

STATUS_OPTIMAL = "optimal"
STATUS_ITERATION_LIMIT = "iteration_limit"

_KERNEL_VARIABLE_CAP = 40_000
_BOUNDARY_MASS_LIMIT = 1e-5


class ConfigurationError(ValueError):
    """Raised when a requested discretization or LP size is unusable."""


class NumericalError(RuntimeError):
    """Raised when the LP solver fails for numerical reasons."""


@dataclass(frozen=True)
class FiniteExperiment:
    """Parameter-indexed pmf rows over a finite outcome set."""

    params: tuple
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "params", tuple(self.params))
        if probs.shape[0] != len(self.params):
            raise ValueError("one pmf row per parameter required")
        if np.any(probs < -1e-15):
            raise ValueError("negative cell mass")
        rowsums = probs.sum(axis=1)
        if np.abs(rowsums - 1.0).max() > 1e-12:
            raise ValueError("pmf rows must sum to 1 within 1e-12")

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def n_outcomes(self) -> int:
        return self.probs.shape[1]

    def to_text(self) -> str:
        """Plain-text matrix form: header 'p K', then one row per parameter."""
        buf = io.StringIO()
        buf.write(f"{self.n_params} {self.n_outcomes}\n")
        for row in self.probs:
            buf.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, params=None) -> "FiniteExperiment":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        p, k = (int(v) for v in lines[0].split())
        rows = [np.fromstring(ln, sep=" ") for ln in lines[1 : 1 + p]]
        probs = np.vstack(rows)
        if probs.shape != (p, k):
            raise ValueError("matrix body does not match header")
        return cls(params=tuple(params) if params is not None else tuple(range(p)),
                   probs=probs)


@dataclass(frozen=True)
class MarkovKernel:
    """Column-stochastic matrix: each input column is a pmf over outputs."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", matrix)
        if np.any(matrix < -1e-9):
            raise ValueError("negative kernel entry")
        if np.abs(matrix.sum(axis=0) - 1.0).max() > 1e-9:
            raise ValueError("kernel columns must sum to 1 within 1e-9")

    def apply(self, pmf: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(pmf, dtype=float)


@dataclass(frozen=True)
class DeficiencyResult:
    value: float
    kernel: MarkovKernel
    lp_status: str

    def __post_init__(self) -> None:
        if self.value < -1e-9:
            raise ValueError("deficiency must be nonnegative")


def gaussian_cell_masses(mean: float, sd: float, edges: np.ndarray) -> np.ndarray:
    """Exact N(mean, sd^2) masses of the cells between consecutive edges.

    CDF differences, not density-times-width: this removes the quadratic
    discretization bias when cells are compared against closed forms.  Tail
    mass beyond the end edges must be below 1e-5 and is folded into the end
    cells before renormalizing.
    """
    z = (edges - mean) / sd
    cdf = ndtr(z)
    masses = np.diff(cdf)
    outside = cdf[0] + (1.0 - cdf[-1])
    if outside > _BOUNDARY_MASS_LIMIT:
        raise ConfigurationError(
            f"grid too narrow: boundary mass {outside:.2e} for mean={mean}, sd={sd}"
        )
    masses[0] += cdf[0]
    masses[-1] += 1.0 - cdf[-1]
    return masses / masses.sum()


@dataclass(frozen=True)
class GridSpec:
    """Uniform 1-d lattice of cell edges; count is the number of edges."""

    lo: float
    hi: float
    count: int

    def edges(self) -> np.ndarray:
        if self.count < 3 or self.hi <= self.lo:
            raise ConfigurationError("grid needs hi > lo and at least 3 edges")
        return np.linspace(self.lo, self.hi, self.count)


def discretize_gaussian_pair(
    h_list,
    sigma: float,
    r: float,
    grid: GridSpec,
    mode: str = MODE_MEAN_SHIFT,
) -> tuple[FiniteExperiment, FiniteExperiment]:
    """Source/target experiments for the amplification problem on a lattice.

    ``mean-shift`` poses the amplifier task itself: turn N(h, s2) into
    N(sqrt(r) h, s2).  ``variance-excess`` poses the equivalent scaled form
    whose continuum-optimal kernel is the identity: the source already has
    the amplified mean and carries excess covariance r s2.  ``cov-root``
    is the literal bounded-shift variant with target N(h, sqrt(r) s2).
    """
    if mode not in _MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; choose from {_MODES}")
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    if r < 1.0:
        raise ConfigurationError("r must be >= 1")
    hs = [float(h) for h in h_list]
    if not hs:
        raise ConfigurationError("empty shift list")
    edges = grid.edges()
    sq = math.sqrt(r)
    if mode == MODE_MEAN_SHIFT:
        src = [(h, sigma) for h in hs]
        tgt = [(sq * h, sigma) for h in hs]
    elif mode == MODE_VARIANCE_EXCESS:
        src = [(sq * h, sq * sigma) for h in hs]
        tgt = [(sq * h, sigma) for h in hs]
    else:
        src = [(h, sigma) for h in hs]
        tgt = [(h, r**0.25 * sigma) for h in hs]
    source = FiniteExperiment(
        params=tuple(hs),
        probs=np.vstack([gaussian_cell_masses(m, s, edges) for m, s in src]),
    )
    target = FiniteExperiment(
        params=tuple(hs),
        probs=np.vstack([gaussian_cell_masses(m, s, edges) for m, s in tgt]),
    )
    return source, target


def kernel_objective(
    kernel: MarkovKernel, source: FiniteExperiment, target: FiniteExperiment
) -> float:
    """max over parameters of || L P_t - Q_t ||_1 for a given kernel."""
    out = source.probs @ kernel.matrix.T
    return float(np.abs(out - target.probs).sum(axis=1).max())


def identity_objective(source: FiniteExperiment, target: FiniteExperiment) -> float:
    """Objective of the identity kernel (source and target on one lattice)."""
    if source.n_outcomes != target.n_outcomes:
        raise ValueError("identity kernel needs matching outcome counts")
    return float(np.abs(source.probs - target.probs).sum(axis=1).max())


def lp_deficiency(
    source: FiniteExperiment, target: FiniteExperiment
) -> DeficiencyResult:
    """Optimal kernel and value of the one-sided deficiency LP.

    Minimizes t subject to column-stochastic L and, for every parameter,
    slack variables dominating the absolute deviations with row sums at most
    t.  Always feasible (route everything to any fixed target row), so a
    failed solve is a numerical error, not an infeasibility.
    """
    if source.params != target.params:
        raise ValueError("source and target must share the parameter list")
    p = source.n_params
    k_in = source.n_outcomes
    k_out = target.n_outcomes
    if k_in * k_out > _KERNEL_VARIABLE_CAP:
        raise ConfigurationError(
            f"kernel would need {k_in * k_out} variables, cap is {_KERNEL_VARIABLE_CAP}"
        )
    n_l = k_in * k_out        # kernel entries, column-major blocks per input
    n_e = p * k_out           # absolute-deviation slacks
    n_var = n_l + n_e + 1

    # column sums of the kernel are 1
    eq_rows = np.repeat(np.arange(k_in), k_out)
    eq_cols = np.arange(n_l)
    a_eq = sparse.csr_matrix(
        (np.ones(n_l), (eq_rows, eq_cols)), shape=(k_in, n_var)
    )
    b_eq = np.ones(k_in)

    blocks = []
    rhs = []
    eye_out = sparse.eye(k_out, format="csr")
    for t in range(p):
        # (L P_t)_y = sum_j P_t[j] L[y, j]; kron against the row of P_t
        m_t = sparse.kron(sparse.csr_matrix(source.probs[t][None, :]), eye_out)
        e_t = sparse.hstack([
            sparse.csr_matrix((k_out, t * k_out)),
            -eye_out,
            sparse.csr_matrix((k_out, n_e - (t + 1) * k_out)),
        ])
        zero_t = sparse.csr_matrix((k_out, 1))
        blocks.append(sparse.hstack([m_t, e_t, zero_t]))
        rhs.append(target.probs[t])
        blocks.append(sparse.hstack([-m_t, e_t, zero_t]))
        rhs.append(-target.probs[t])
    sum_rows = sparse.hstack([
        sparse.csr_matrix((p, n_l)),
        sparse.kron(sparse.eye(p, format="csr"), np.ones((1, k_out))),
        sparse.csr_matrix(-np.ones((p, 1))),
    ])
    blocks.append(sum_rows)
    rhs.append(np.zeros(p))
    a_ub = sparse.vstack(blocks, format="csr")
    b_ub = np.concatenate(rhs)

    cost = np.zeros(n_var)
    cost[-1] = 1.0
    res = linprog(
        cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
        bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-9,
                 "dual_feasibility_tolerance": 1e-9},
    )
    if res.status == 1:
        status = STATUS_ITERATION_LIMIT
    elif res.status == 0:
        status = STATUS_OPTIMAL
    else:
        raise NumericalError(f"LP solver failed: {res.message}")
    kernel_matrix = np.asarray(res.x[:n_l]).reshape(k_in, k_out).T
    # clean the tiny negative / normalization residue left by the solver
    kernel_matrix = np.maximum(kernel_matrix, 0.0)
    kernel_matrix /= kernel_matrix.sum(axis=0, keepdims=True)
    return DeficiencyResult(
        value=float(res.fun),
        kernel=MarkovKernel(kernel_matrix),
        lp_status=status,
    )
