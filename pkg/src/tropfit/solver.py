"""Sparse approximate solving of max-plus equations A (max-plus) x = b.

Support selection is a set-search over the error functions

    e(T)   = b - max_{j in T} (A_j + xhat_j)        (elementwise; T != empty)
    e({})  = elementwise max over the singleton error vectors

with xhat the principal solution.  A greedy cover loop shrinks the
lp error below a budget; because the p-th-power error is decreasing and
supermodular for finite p, the greedy support carries a logarithmic
approximation-ratio certificate.  The l-infinity variant of the greedy
is shipped for comparison only: its error function is not even
approximately supermodular, so it carries no guarantee.

All lp errors are computed as norms (theta-domain) via max-scaling,
which survives norm orders as high as p = 150 without overflow; the
greedy argmin and the budget test are invariant under the monotone
root map.  Certificate arithmetic, which needs raw p-th powers, runs
in log-domain.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .tropical import (
    ShapeError,
    as_matrix,
    as_vector,
    maxplus_add,
    principal_solution,
    project_on_support,
)

__all__ = [
    "Infeasible",
    "FitProblem",
    "GreedyTrace",
    "SparseSolution",
    "GreedyState",
    "pnorm",
    "error_vector",
    "error_p",
    "error_inf",
    "greedy_sparse_solve",
    "ratio_certificate",
    "smmae_lift",
    "brute_force_oracle",
    "submodularity_ratio",
    "submodularity_probe",
    "ProbeReport",
]

SGLE = "sgle"
SMMAE = "smmae"


class Infeasible(Exception):
    """Even the full support cannot meet the error budget."""

    def __init__(self, message: str, full_support_error: float | None = None):
        super().__init__(message)
        self.full_support_error = full_support_error


def pnorm(v, p: float) -> float:
    """Overflow-safe lp norm of ``|v|``; ``p`` may be ``math.inf``.

    Scales by the largest magnitude M and evaluates M * (sum (v/M)^p)^(1/p),
    so high orders like p = 150 never overflow for finite input.
    """
    a = np.abs(np.asarray(v, dtype=np.float64))
    if a.size == 0:
        return 0.0
    m = float(a.max())
    if m == 0.0:
        return 0.0
    if math.isinf(m) or math.isinf(p):
        return m
    return m * float(np.sum((a / m) ** p)) ** (1.0 / p)


def _log_diff_exp(la: float, lb: float) -> float:
    """log(exp(la) - exp(lb)) for la >= lb; -inf when the difference underflows."""
    if lb == -math.inf:
        return la
    if la == math.inf:
        return math.inf
    if lb >= la:
        return -math.inf
    d = -math.expm1(lb - la)
    if d <= 0.0:
        return -math.inf
    return la + math.log(d)


@dataclass(frozen=True)
class FitProblem:
    """One sparse-solve instance: equation data, norm order, budget, estimator.

    Exactly one of ``theta`` (norm-domain budget) / ``epsilon`` (p-th-power
    budget, theta = epsilon**(1/p)) must be given; theta is canonical
    internally.  ``p`` is a finite order >= 1 or ``math.inf`` for the
    comparison-only l-infinity greedy.  Orders 0 < p < 1 are accepted with a
    warning: they void the norm axioms and the supermodularity guarantee and
    are supported as an experimental quasi-norm mode only.
    """

    A: np.ndarray | None
    b: np.ndarray | None
    p: float
    theta: float | None = None
    epsilon: float | None = None
    estimator: str = SGLE

    def __post_init__(self):
        if self.estimator not in (SGLE, SMMAE):
            raise ValueError(f"estimator must be '{SGLE}' or '{SMMAE}', got {self.estimator!r}")
        if not self.p > 0:
            raise ValueError(f"norm order must be positive, got {self.p}")
        if self.p < 1.0:
            warnings.warn(
                f"norm order p={self.p} < 1 is a quasi-norm: no supermodularity "
                "guarantee applies (experimental)",
                stacklevel=2,
            )
        if (self.theta is None) == (self.epsilon is None):
            raise ValueError("exactly one of theta/epsilon must be given")
        raw = self.theta if self.theta is not None else self.epsilon
        if not raw >= 0:
            raise ValueError("error budget must be non-negative")
        if self.A is not None:
            object.__setattr__(self, "A", as_matrix(self.A))
        if self.b is not None:
            b = as_vector(self.b)
            if not np.isfinite(b).all():
                raise ValueError("right-hand side b must be finite")
            object.__setattr__(self, "b", b)
        if self.A is not None and self.b is not None and self.A.shape[0] != self.b.shape[0]:
            raise ShapeError(
                f"matrix has {self.A.shape[0]} rows, vector has length {self.b.shape[0]}"
            )

    @property
    def budget(self) -> float:
        """Norm-domain threshold theta (for p = inf, epsilon and theta coincide)."""
        if self.theta is not None:
            return float(self.theta)
        eps = float(self.epsilon)
        if math.isinf(self.p):
            return eps
        if eps == 0.0:
            return 0.0
        return math.exp(math.log(eps) / self.p)

    def with_data(self, A, b) -> "FitProblem":
        return replace(self, A=A, b=b)


@dataclass(frozen=True)
class GreedyTrace:
    """Replayable record of one solve."""

    initial_error: float
    iterations: tuple[tuple[int, float], ...] = ()
    clamped_columns: tuple[int, ...] = ()


@dataclass(frozen=True)
class SparseSolution:
    """Solution vector with its support, residual statistics and solve trace.

    ``residual`` is the error vector e(T) of the selected support (signed
    after an SMMAE shift).  For the degenerate empty support, e({}) is the
    singleton-max vector of the set-search formulation, which is what the
    budget test in the greedy loop sees; b - A(max-plus)x itself would be
    +inf there.
    """

    x: np.ndarray
    support: tuple[int, ...]
    residual: np.ndarray
    error_p: float
    error_inf: float
    p: float
    theta: float
    estimator: str
    trace: GreedyTrace
    ratio_bound: float | None = None

    @property
    def iterations(self) -> int:
        return len(self.support)

    @property
    def support_set(self) -> frozenset:
        return frozenset(self.support)


class GreedyState:
    """Incremental error-function evaluator over a fixed instance.

    Precomputes the principal solution xhat, the column contributions
    A_j + xhat_j, and the per-singleton error vectors; from those every
    candidate error e(T ∪ {s}) = min(e(T), e({s})) costs O(m).  ``cur``
    tracks max_{j in T}(A_j + xhat_j) and stays <= b throughout.
    """

    def __init__(self, A, b):
        self.A = as_matrix(A)
        self.b = as_vector(b)
        if self.A.shape[0] != self.b.shape[0]:
            raise ShapeError(
                f"matrix has {self.A.shape[0]} rows, vector has length {self.b.shape[0]}"
            )
        self.m, self.n = self.A.shape
        self.xhat = principal_solution(self.A, self.b)
        self.clamped_columns = tuple(int(j) for j in np.nonzero(np.isneginf(self.A).all(axis=0))[0])
        self.contrib = maxplus_add(self.A, self.xhat[np.newaxis, :])
        # rounding can push a contribution a hair above b; the error vector
        # is non-negative by construction, so clamp
        with np.errstate(invalid="ignore"):
            e0 = self.b[:, np.newaxis] - self.contrib
        self.e0 = np.maximum(e0, 0.0)
        self.cur = np.full(self.m, -np.inf)
        self.cur_error = self.e0.max(axis=1)  # e(empty) = singleton max
        self.selected: list[int] = []
        self._in_support = np.zeros(self.n, dtype=bool)

    def error_vector_of(self, T) -> np.ndarray:
        """e(T) for an arbitrary support set, independent of greedy progress."""
        idx = np.asarray(sorted(set(int(j) for j in T)), dtype=np.intp)
        if idx.size and (idx[0] < 0 or idx[-1] >= self.n):
            raise ShapeError(f"support indices out of range for {self.n} columns")
        if idx.size == 0:
            return self.e0.max(axis=1)
        return self.e0[:, idx].min(axis=1)

    def error_norm_of(self, T, p: float) -> float:
        """theta-domain error of a support: ||e(T)||_p, halved for p = inf."""
        v = self.error_vector_of(T)
        if math.isinf(p):
            return 0.5 * float(v.max())
        return pnorm(v, p)

    def full_support_norm(self, p: float) -> float:
        v = self.e0.min(axis=1)
        if math.isinf(p):
            return 0.5 * float(v.max())
        return pnorm(v, p)

    def current_norm(self, p: float) -> float:
        if math.isinf(p):
            return 0.5 * float(self.cur_error.max())
        return pnorm(self.cur_error, p)

    def select_best(self, p: float) -> tuple[int, float]:
        """Argmin over unselected columns of the candidate error, lowest index on ties.

        Candidates whose max entry already exceeds the best exact norm found
        cannot win (||v||_p >= max|v|), so for finite p exact norms are
        evaluated in ascending order of that lower bound and the scan stops
        early; this keeps high orders like p = 150 cheap at n = 1000.
        """
        cand = np.minimum(self.cur_error[:, np.newaxis], self.e0)
        lower = cand.max(axis=0)
        lower[self._in_support] = np.inf
        if math.isinf(p):
            j = int(np.argmin(lower))
            return j, 0.5 * float(lower[j])
        norms = np.full(self.n, np.inf)
        best = np.inf
        for col in np.argsort(lower, kind="stable"):
            if lower[col] > best:
                break
            if self._in_support[col]:
                continue
            norms[col] = pnorm(cand[:, col], p)
            if norms[col] < best:
                best = norms[col]
        winners = np.nonzero((norms == best) & ~self._in_support)[0]
        if winners.size == 0:  # every candidate is +inf
            winners = np.nonzero(~self._in_support)[0]
            best = np.inf
        return int(winners[0]), float(best)

    def select(self, j: int) -> None:
        if self._in_support[j]:
            raise ValueError(f"column {j} already selected")
        self.cur = np.maximum(self.cur, self.contrib[:, j])
        self.cur_error = np.minimum(self.cur_error, self.e0[:, j])
        self.selected.append(int(j))
        self._in_support[j] = True


def error_vector(A, b, T) -> np.ndarray:
    """Error vector e(T); e(empty set) is the elementwise singleton max.

    Convenience wrapper that builds a fresh GreedyState; batch callers should
    hold one state and use error_vector_of directly.
    """
    return GreedyState(A, b).error_vector_of(T)


def error_p(A, b, T, p: float) -> float:
    """theta-domain lp error of a support: the norm ||e(T)||_p.

    The p-th-power error of the set-search formulation equals this value
    raised to p; the root is a monotone reparameterization, so argmins and
    budget comparisons are unchanged while p = 150 stays representable.
    """
    if math.isinf(p):
        raise ValueError("use error_inf for the l-infinity error")
    return pnorm(GreedyState(A, b).error_vector_of(T), p)


def error_inf(A, b, T) -> float:
    """Half the l-infinity norm of e(T): the best max-abs error on support T."""
    return 0.5 * float(GreedyState(A, b).error_vector_of(T).max())


def _certificate_from(m: int, delta: float, p: float, theta: float, prev_norm: float) -> float:
    """Greedy cover ratio bound 1 + log((m Delta^p - eps) / (E_p(T_{k-1}) - eps)).

    Evaluated in log-domain; +inf when the denominator difference underflows.
    """
    if delta <= 0.0 or prev_norm <= 0.0:
        return math.inf
    log_eps = -math.inf if theta == 0.0 else p * math.log(theta)
    log_num = _log_diff_exp(math.log(m) + p * math.log(delta), log_eps)
    log_den = _log_diff_exp(p * math.log(prev_norm), log_eps)
    if not (math.isfinite(log_num) and math.isfinite(log_den)):
        # denominator underflow, or infinite errors from -inf matrix entries:
        # nothing can be certified
        return math.inf
    return 1.0 + (log_num - log_den)


def ratio_certificate(solution: SparseSolution, problem: FitProblem) -> float | None:
    """Certified upper bound on |T_greedy| / |T_optimal| for a finite-p greedy run.

    None when the greedy made no iterations (budget met by the empty set) or
    for the guarantee-free l-infinity variant.
    """
    if math.isinf(solution.p) or not solution.support:
        return None
    state = GreedyState(problem.A, problem.b)
    k = len(solution.support)
    prev_norm = solution.trace.initial_error if k == 1 else solution.trace.iterations[k - 2][1]
    return _certificate_from(state.m, float(state.e0.max()), solution.p, solution.theta, prev_norm)


def _finalize(
    state: GreedyState,
    support: tuple[int, ...],
    problem: FitProblem,
    trace: GreedyTrace,
    ratio_bound: float | None,
) -> SparseSolution:
    x = project_on_support(state.xhat, support)
    residual = state.error_vector_of(support)
    err_p = pnorm(residual, problem.p)
    solution = SparseSolution(
        x=x,
        support=support,
        residual=residual,
        error_p=err_p,
        error_inf=float(np.abs(residual).max()),
        p=problem.p,
        theta=problem.budget,
        estimator=SGLE,
        trace=trace,
        ratio_bound=ratio_bound,
    )
    if problem.estimator == SMMAE:
        solution = smmae_lift(solution)
    return solution


def greedy_sparse_solve(problem: FitProblem) -> SparseSolution:
    """Greedy minimum-support cover of the lp error budget (Infeasible if none).

    Infeasible is raised exactly when the full support misses the budget.
    Otherwise the returned support satisfies the budget in theta-domain and
    the solution never overshoots b (lateness).  Ties in the greedy argmin
    go to the lowest column index, so identical inputs replay identically.
    For finite p a ratio certificate is attached; for p = inf the variant is
    a comparison heuristic with no guarantee.
    """
    if problem.A is None or problem.b is None:
        raise ValueError("problem carries no equation data; use with_data(A, b)")
    p = problem.p
    if math.isinf(p):
        warnings.warn(
            "the l-infinity greedy has no approximation guarantee and can be "
            "arbitrarily far from the sparsest support",
            stacklevel=2,
        )
    budget = problem.budget
    state = GreedyState(problem.A, problem.b)
    full = state.full_support_norm(p)
    if full > budget:
        raise Infeasible(
            f"full support error {full:.6g} exceeds budget {budget:.6g}",
            full_support_error=full,
        )
    current = state.current_norm(p)
    initial = current
    steps: list[tuple[int, float]] = []
    while current > budget and len(state.selected) < state.n:
        j, _ = state.select_best(p)
        state.select(j)
        # recompute on the updated state so the traced error, the budget test
        # and the final error_p share one arithmetic path
        current = state.current_norm(p)
        steps.append((j, current))
    support = tuple(state.selected)
    bound = None
    if not math.isinf(p) and support:
        prev = initial if len(support) == 1 else steps[-2][1]
        bound = _certificate_from(state.m, float(state.e0.max()), p, budget, prev)
    trace = GreedyTrace(
        initial_error=initial,
        iterations=tuple(steps),
        clamped_columns=state.clamped_columns,
    )
    return _finalize(state, support, problem, trace, bound)


def smmae_lift(sgle: SparseSolution) -> SparseSolution:
    """Shift every finite coordinate up by half the max residual.

    The shifted vector is the minimum-max-absolute-error solution on the same
    support: its l-infinity error is exactly half the input's.  With an empty
    support there is nothing to shift and the solution is returned with only
    the estimator label changed.
    """
    if sgle.estimator != SGLE:
        raise ValueError("smmae_lift expects an SGLE solution")
    if not sgle.support:
        return replace(sgle, estimator=SMMAE)
    shift = 0.5 * sgle.error_inf
    x = sgle.x.copy()
    finite = ~np.isneginf(x)
    x[finite] += shift
    residual = sgle.residual - shift
    return replace(
        sgle,
        x=x,
        residual=residual,
        error_p=pnorm(residual, sgle.p),
        error_inf=float(np.abs(residual).max()),
        estimator=SMMAE,
    )


def brute_force_oracle(problem: FitProblem, max_columns: int = 20) -> SparseSolution:
    """Exact minimum-support solution by exhaustive support enumeration.

    Independent verifier for the greedy: walks supports in order of
    increasing cardinality (lexicographic within) and returns the first that
    meets the budget, which is optimal.  Refuses n > ``max_columns``.
    """
    if problem.A is None or problem.b is None:
        raise ValueError("problem carries no equation data; use with_data(A, b)")
    state = GreedyState(problem.A, problem.b)
    if state.n > max_columns:
        raise ValueError(f"brute force refused: {state.n} columns > cap {max_columns}")
    p = problem.p
    budget = problem.budget
    initial = state.current_norm(p)
    for size in range(state.n + 1):
        for T in itertools.combinations(range(state.n), size):
            if state.error_norm_of(T, p) <= budget:
                trace = GreedyTrace(initial_error=initial, clamped_columns=state.clamped_columns)
                return _finalize(state, T, problem, trace, None)
    raise Infeasible(
        f"full support error {state.full_support_norm(p):.6g} exceeds budget {budget:.6g}",
        full_support_error=state.full_support_norm(p),
    )


def _log_power_drop(norm_hi: float, norm_lo: float, p: float) -> float:
    """log of E(small) - E(large) in p-th-power domain, from theta-domain norms."""
    if norm_hi <= 0.0:
        return -math.inf
    la = p * math.log(norm_hi)
    lb = -math.inf if norm_lo <= 0.0 else p * math.log(norm_lo)
    return _log_diff_exp(la, lb)


def submodularity_ratio(A, b, p: float, L, S) -> float:
    """Empirical submodularity ratio of the (negated) error function at (L, S).

    sum_{x in S} [E(L) - E(L ∪ {x})] over [E(L) - E(L ∪ S)], with E in
    p-th-power domain for finite p (log-domain arithmetic) and the halved
    max-error for p = inf.  Returns inf when the denominator vanishes.
    """
    state = GreedyState(A, b)
    L = sorted(set(int(i) for i in L))
    S = sorted(set(int(i) for i in S))
    if set(L) & set(S) or not S:
        raise ValueError("S must be non-empty and disjoint from L")
    if math.isinf(state.error_norm_of(L, p)):
        return math.nan  # an uncoverable row leaves every drop undefined
    if math.isinf(p):
        base = state.error_norm_of(L, p)
        num = sum(base - state.error_norm_of(L + [x], p) for x in S)
        den = base - state.error_norm_of(L + S, p)
        return num / den if den > 0.0 else math.inf
    base = state.error_norm_of(L, p)
    drops = [_log_power_drop(base, state.error_norm_of(L + [x], p), p) for x in S]
    finite = [d for d in drops if d > -math.inf]
    log_num = -math.inf
    if finite:
        top = max(finite)
        log_num = top + math.log(sum(math.exp(d - top) for d in finite))
    log_den = _log_power_drop(base, state.error_norm_of(L + S, p), p)
    if log_den == -math.inf:
        return math.inf
    return math.exp(log_num - log_den)


@dataclass
class ProbeReport:
    """Outcome of randomized supermodularity / monotonicity sampling."""

    p: float
    trials: int
    supermodular_violations: int = 0
    monotonicity_violations: int = 0
    worst_margin: float = 0.0
    min_ratio: float | None = None
    ratio_samples: int = 0


_REL_TOL = 1e-9
_LOG_NOISE_FLOOR = math.log(1e-12)


def submodularity_probe(A, b, p: float, trials: int, rng=None) -> ProbeReport:
    """Sample (C ⊆ B, k ∉ B) triples and check the supermodular inequality.

    For finite p the inequality E(C ∪ {k}) - E(C) <= E(B ∪ {k}) - E(B) and
    monotonicity E(B) <= E(C) are checked in p-th-power domain (log-domain
    comparison, relative slack 1e-9); violations are counted.  For p = inf
    the probe instead estimates the submodularity ratio: it samples disjoint
    (L, S) pairs and reports the minimum ratio observed.
    """
    rng = np.random.default_rng(rng)
    state = GreedyState(A, b)
    n = state.n
    report = ProbeReport(p=p, trials=trials)
    if math.isinf(p):
        report.min_ratio = math.inf
        for _ in range(trials):
            perm = rng.permutation(n)
            ls = int(rng.integers(0, n))  # |L| in [0, n-1]
            ss = int(rng.integers(1, n - ls + 1))
            L, S = perm[:ls], perm[ls : ls + ss]
            base = state.error_norm_of(L, p)
            joint = state.error_norm_of(np.concatenate([L, S]), p)
            if not base - joint > 0.0:
                continue
            ratio = submodularity_ratio(A, b, p, L, S)
            report.ratio_samples += 1
            if ratio < report.min_ratio:
                report.min_ratio = ratio
        return report
    for _ in range(trials):
        perm = rng.permutation(n)
        bs = int(rng.integers(0, n))  # |B| in [0, n-1], leaving room for k
        B = sorted(int(i) for i in perm[:bs])
        k = int(perm[bs])
        C = sorted(int(i) for i in rng.permutation(B)[: int(rng.integers(0, bs + 1))]) if bs else []
        nC = state.error_norm_of(C, p)
        nCk = state.error_norm_of(C + [k], p)
        nB = state.error_norm_of(B, p)
        nBk = state.error_norm_of(sorted(B + [k]), p)
        if nB > nC * (1.0 + _REL_TOL) or nCk > nC * (1.0 + _REL_TOL) or nBk > nB * (1.0 + _REL_TOL):
            report.monotonicity_violations += 1
        drop_c = _log_power_drop(nC, nCk, p)
        drop_b = _log_power_drop(nB, nBk, p)
        # supermodularity: the marginal drop shrinks as the context grows.
        # Drops below ~1e-12 of the error scale are cancellation noise (the
        # theta-domain norm cannot resolve finer p-th-power differences), so
        # the slack is taken relative to E(C), the largest value involved.
        floor = -math.inf if nC <= 0.0 else p * math.log(nC) + _LOG_NOISE_FLOOR
        if drop_b > np.logaddexp(drop_c, floor):
            report.supermodular_violations += 1
            report.worst_margin = max(report.worst_margin, drop_b - drop_c)
    return report
