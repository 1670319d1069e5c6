"""Piecewise-linear fitting of convex multivariate functions.

A convex function sampled at points (x_i, f_i) is approximated by
p(x) = max_k (a_k . x + b_k) over a candidate slope set {a_k}.  Choosing
the intercepts is a max-plus equation in which the design matrix holds
the slope/point inner products; a sparse solve prunes intercepts to
-inf, so the number of affine regions is kept near the minimum needed
for the requested error budget.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .solver import FitProblem, greedy_sparse_solve
from .tropical import ShapeError

__all__ = [
    "Dataset",
    "SlopeSet",
    "PwlModel",
    "Score",
    "build_design_matrix",
    "grid_slopes",
    "gradient_slopes",
    "fit",
    "evaluate",
    "score",
]

DEFAULT_GRID_CAP = 100_000


@dataclass(frozen=True)
class Dataset:
    """Sample points x (m rows, n columns) with target values f (length m)."""

    x: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, np.newaxis]
        f = np.asarray(self.f, dtype=np.float64)
        if x.ndim != 2 or f.ndim != 1 or x.shape[0] != f.shape[0] or x.shape[0] < 1:
            raise ShapeError(f"inconsistent dataset shapes {x.shape} / {f.shape}")
        if not (np.isfinite(x).all() and np.isfinite(f).all()):
            raise ValueError("dataset values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SlopeSet:
    """Candidate slope vectors, one per prospective affine region.

    Duplicate slopes collapse to identical design-matrix columns and only
    waste greedy iterations, so construction deduplicates (first occurrence
    wins, keeping column order stable) and warns when anything is dropped.
    """

    slopes: np.ndarray
    origin: str = "explicit"

    def __post_init__(self):
        s = np.asarray(self.slopes, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, np.newaxis]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ShapeError(f"expected K x n slope array, got shape {s.shape}")
        if not np.isfinite(s).all():
            raise ValueError("slopes must be finite")
        keys = self._dedup_keys(s)
        seen: dict[tuple, int] = {}
        keep = []
        for i, key in enumerate(keys):
            if key not in seen:
                seen[key] = i
                keep.append(i)
        if len(keep) < s.shape[0]:
            warnings.warn(
                f"dropped {s.shape[0] - len(keep)} duplicate slope vector(s)",
                stacklevel=2,
            )
            s = s[keep]
        object.__setattr__(self, "slopes", s)

    def _dedup_keys(self, s: np.ndarray) -> list[tuple]:
        if self.origin == "gradients":
            # near-duplicates from neighboring local fits: 10 significant
            # digits ~ relative tolerance 1e-9
            return [tuple(f"{v:.10e}" for v in row) for row in s]
        return [tuple(row) for row in s]

    @property
    def size(self) -> int:
        return self.slopes.shape[0]

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]


@dataclass(frozen=True)
class PwlModel:
    """Max-of-affine model: p(x) = max over finite-intercept k of a_k.x + b_k."""

    slopes: np.ndarray
    intercepts: np.ndarray
    p: float
    theta: float
    estimator: str
    seed: int | None = None
    rms: float | None = None
    max_abs: float | None = None

    def __post_init__(self):
        s = np.asarray(self.slopes, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, np.newaxis]
        c = np.asarray(self.intercepts, dtype=np.float64)
        if s.ndim != 2 or c.ndim != 1 or s.shape[0] != c.shape[0]:
            raise ShapeError(f"inconsistent model shapes {s.shape} / {c.shape}")
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "intercepts", c)

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @property
    def support_size(self) -> int:
        return int((~np.isneginf(self.intercepts)).sum())


@dataclass(frozen=True)
class Score:
    rms: float
    max_abs: float
    support: int


def build_design_matrix(data: Dataset, slopes: SlopeSet) -> np.ndarray:
    """Design matrix with entry (i, k) = a_k . x_i; right-hand side is data.f."""
    if slopes.dim != data.dim:
        raise ShapeError(f"slope dimension {slopes.dim} != data dimension {data.dim}")
    return data.x @ slopes.slopes.T


def grid_slopes(lo, hi, step: float, cap: int = DEFAULT_GRID_CAP) -> SlopeSet:
    """Cartesian grid of slopes: per-dimension arithmetic progressions.

    Refuses grids larger than ``cap``: the grid count grows as
    ((hi-lo)/step + 1)^n, so beyond a few dimensions candidate slopes
    should come from gradient_slopes instead.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ShapeError("lo and hi must be 1-D with the same length")
    if np.any(hi < lo):
        raise ValueError("hi must be >= lo in every dimension")
    if not step > 0:
        raise ValueError("step must be positive")
    counts = np.floor((hi - lo) / step + 1e-9).astype(int) + 1
    total = int(np.prod(counts))
    if total > cap:
        raise ValueError(
            f"slope grid of {total} candidates exceeds cap {cap}; "
            "use gradient_slopes to stay tractable in higher dimensions"
        )
    axes = [lo[d] + step * np.arange(counts[d]) for d in range(lo.size)]
    grid = np.array(list(itertools.product(*axes)), dtype=np.float64)
    return SlopeSet(grid, origin="grid")


def gradient_slopes(data: Dataset, k_neighbors: int | None = None) -> SlopeSet:
    """Candidate slopes from local least-squares gradient estimates.

    For each sample, an affine function is fit to its k nearest points
    (k defaults to 2n+1, an overdetermined fit with minimal smoothing) and
    the fitted gradient becomes a candidate slope.  Rank-deficient
    neighborhoods are skipped with a warning.  Near-duplicate gradients are
    merged by the SlopeSet constructor.
    """
    n = data.dim
    m = len(data)
    if k_neighbors is None:
        k_neighbors = 2 * n + 1
    if k_neighbors < n + 1:
        raise ValueError(f"need at least {n + 1} neighbors to fit an affine function")
    if m <= n:
        raise ValueError("need more samples than dimensions")
    k = min(k_neighbors, m)
    tree = cKDTree(data.x)
    _, idx = tree.query(data.x, k=k)
    slopes = []
    skipped = 0
    design = np.empty((k, n + 1))
    design[:, n] = 1.0
    for i in range(m):
        nb = idx[i]
        design[:, :n] = data.x[nb]
        if np.linalg.matrix_rank(design) < n + 1:
            skipped += 1
            continue
        coef, *_ = np.linalg.lstsq(design, data.f[nb], rcond=None)
        slopes.append(coef[:n])
    if skipped:
        warnings.warn(f"skipped {skipped} rank-deficient neighborhood(s)", stacklevel=2)
    if not slopes:
        raise ValueError("no usable gradient estimates (all neighborhoods degenerate)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # duplicate gradients are expected
        return SlopeSet(np.array(slopes), origin="gradients")


def fit(data: Dataset, slopes: SlopeSet, problem: FitProblem, seed: int | None = None) -> PwlModel:
    """Fit intercepts by sparse max-plus solving; Infeasible propagates.

    A budget loose enough to be met by the empty support yields a model with
    every region pruned; its error fields stay None since there is nothing
    to evaluate.
    """
    A = build_design_matrix(data, slopes)
    solution = greedy_sparse_solve(problem.with_data(A, data.f))
    model = PwlModel(
        slopes=slopes.slopes,
        intercepts=solution.x,
        p=problem.p,
        theta=problem.budget,
        estimator=solution.estimator,
        seed=seed,
    )
    if not solution.support:
        return model
    s = score(model, data)
    return replace(model, rms=s.rms, max_abs=s.max_abs)


def evaluate(model: PwlModel, x) -> np.ndarray | float:
    """Model value max_k (a_k . x + b_k) over finite-intercept regions only."""
    finite = ~np.isneginf(model.intercepts)
    if not finite.any():
        raise ValueError("model has no active region (all intercepts pruned)")
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != model.dim:
        raise ShapeError(f"points of dimension {pts.shape[1]} for a {model.dim}-D model")
    vals = (pts @ model.slopes[finite].T + model.intercepts[finite]).max(axis=1)
    return float(vals[0]) if single else vals


def score(model: PwlModel, data: Dataset) -> Score:
    """Root-mean-squared and max-absolute residuals plus active region count."""
    residual = data.f - evaluate(model, data.x)
    return Score(
        rms=float(np.sqrt(np.mean(residual**2))),
        max_abs=float(np.abs(residual).max()),
        support=model.support_size,
    )
