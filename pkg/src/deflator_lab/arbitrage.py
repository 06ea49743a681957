"""Exact arbitrage verdicts on event trees, and utility functions built from
tail bounds.

Both no-arbitrage notions reduce to linear programs over the strategy space.
A wealth path 1 + (H.S) is affine in the holdings H, and 1-admissibility is
one linear inequality per node, so on a finite tree:

* (NA) fails iff some H with gains >= 0 everywhere has a strictly positive
  terminal gain somewhere.  Gains scale with H, so a sup-norm box |H| <= 1 is
  imposed purely to keep the LP bounded; the verdict is unaffected.
* (NA1), boundedness in probability of terminal wealths, collapses on a finite
  space with strictly positive P to finiteness of sup E[terminal wealth] over
  1-admissible strategies.  The LP is bounded iff no admissible ray grows the
  expectation, and an unbounded ray is exactly an unbounded-profit witness.

The utility builder turns a tail-probability envelope F into a concave,
unbounded U = integral of a step function g with diverging sum(g_k) but
convergent sum(g_k F(k-1)), by the blockwise construction driven by Cesaro
averages of F.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .filtered_space import (AdaptedProcess, EventTree, ProbMeasure, Strategy,
                             as_fraction)
from .linprog import OPTIMAL, UNBOUNDED, LinearProgram

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class WealthProblem:
    """A priced tree: the implicit objects are the 1-admissible wealth family
    W1 = {1 + (H.S)} and its terminal values K1."""

    tree: EventTree
    P: ProbMeasure
    S: AdaptedProcess

    def __post_init__(self) -> None:
        self.P.validate_for(self.tree)
        self.S.validate_for(self.tree)
        if self.S.dim != self.tree.asset_dim:
            raise ValueError("price process dimension must equal the tree's asset_dim")

    def require_positive(self) -> None:
        if not self.P.strictly_positive:
            raise ValueError(
                "arbitrage verdicts need a strictly positive measure: null "
                "leaves would change the admissibility constraint set")


@dataclass
class ArbitrageReport:
    na_holds: Optional[bool] = None
    na1_holds: Optional[bool] = None
    witness: Optional[Strategy] = None
    optimal_value: Optional[Fraction] = None   # sup E[terminal wealth]
    unbounded: bool = False                    # marks optimal_value = +infinity
    na_optimum: Optional[Fraction] = None      # box-normalized NA gain optimum


def _gain_rows(problem: WealthProblem) -> tuple[dict[int, dict[int, Fraction]], dict[tuple[int, int], int]]:
    """Linear form of the gain (H.S) at every node, in holdings coordinates.

    Returns (rows, var_index): rows[node] maps LP variable -> coefficient, and
    var_index[(node, component)] numbers the holdings decided at each
    non-leaf node.
    """
    tree, S = problem.tree, problem.S
    d = tree.asset_dim
    var_index: dict[tuple[int, int], int] = {}
    for v in tree.non_leaf_nodes():
        for i in range(d):
            var_index[(v.id, i)] = len(var_index)
    rows: dict[int, dict[int, Fraction]] = {tree.root: {}}
    for v in tree.nodes:
        if v.parent is None:
            continue
        row = dict(rows[v.parent])
        for i in range(d):
            ds = S[v.id][i] - S[v.parent][i]
            if ds != 0:
                j = var_index[(v.parent, i)]
                row[j] = row.get(j, ZERO) + ds
        rows[v.id] = row
    return rows, var_index


def _strategy_from(problem: WealthProblem, x: list[Fraction],
                   var_index: dict[tuple[int, int], int]) -> Strategy:
    d = problem.tree.asset_dim
    steps = {
        v.id: tuple(x[var_index[(v.id, i)]] for i in range(d))
        for v in problem.tree.non_leaf_nodes()
    }
    return Strategy(steps, d)


def check_na(problem: WealthProblem) -> ArbitrageReport:
    """Decide (NA): no admissible terminal wealth X >= 1 with P(X > 1) > 0.

    Maximizes the plain sum of terminal gains subject to gains >= 0 at every
    node and |H|_inf <= 1.  Zero optimum is exactly (NA); a positive optimum
    yields a witness strategy whose wealth 1 + (H.S) lies in W1.
    """
    problem.require_positive()
    rows, var_index = _gain_rows(problem)
    lp = LinearProgram(len(var_index))
    objective: dict[int, Fraction] = {}
    for leaf in problem.tree.leaves:
        for j, coef in rows[leaf].items():
            objective[j] = objective.get(j, ZERO) + coef
    lp.set_objective(objective)
    for v in problem.tree.nodes:
        if v.parent is not None and rows[v.id]:
            lp.add_ge(rows[v.id], ZERO)
    for j in range(len(var_index)):
        lp.add_le({j: ONE}, ONE)
        lp.add_ge({j: ONE}, -ONE)
    res = lp.solve()
    assert res.status == OPTIMAL, "the NA program is bounded by the box constraint"
    report = ArbitrageReport(na_optimum=res.value)
    report.na_holds = res.value == 0
    if not report.na_holds:
        report.witness = _strategy_from(problem, res.x, var_index)
    return report


def check_na1(problem: WealthProblem) -> ArbitrageReport:
    """Decide (NA1): boundedness of sup E[1 + (H.S)_n] over 1-admissible H.

    On a finite tree with strictly positive P, boundedness in probability of
    K1, uniform boundedness, and finiteness of this supremum all coincide
    (each leaf carries mass at least min P > 0), so the LP value decides the
    verdict and doubles as the tightest wealth bound.  Unboundedness returns
    the improving ray: a strategy direction along which expected wealth grows
    without ever breaching admissibility.
    """
    problem.require_positive()
    rows, var_index = _gain_rows(problem)
    lp = LinearProgram(len(var_index))
    objective: dict[int, Fraction] = {}
    for leaf in problem.tree.leaves:
        mass = problem.P.mass(leaf)
        for j, coef in rows[leaf].items():
            objective[j] = objective.get(j, ZERO) + mass * coef
    lp.set_objective(objective)
    for v in problem.tree.nodes:
        if v.parent is not None and rows[v.id]:
            lp.add_ge(rows[v.id], -ONE)
    res = lp.solve()
    if res.status == UNBOUNDED:
        return ArbitrageReport(na1_holds=False, unbounded=True,
                               witness=_strategy_from(problem, res.ray, var_index))
    assert res.status == OPTIMAL
    return ArbitrageReport(na1_holds=True, optimal_value=ONE + res.value)


def check_both(problem: WealthProblem) -> ArbitrageReport:
    na = check_na(problem)
    na1 = check_na1(problem)
    return ArbitrageReport(
        na_holds=na.na_holds,
        na1_holds=na1.na1_holds,
        witness=na.witness if not na.na_holds else na1.witness,
        optimal_value=na1.optimal_value,
        unbounded=na1.unbounded,
        na_optimum=na.na_optimum,
    )


# -- de la Vallee-Poussin style utility construction ----------------------------

DEFAULT_N_SUM = 20_000
DEFAULT_PROBE_LIMIT = 1_000_000


class TailError(ValueError):
    """The tail envelope is invalid or does not decay within the probe range."""


@dataclass
class UtilityCurve:
    """Slopes g_k of a concave piecewise-linear U with U(0) = 0, U' = g_k on
    [k-1, k), built so that sum(g_k) diverges while sum(g_k F(k-1)) stays
    below pi^2/6.

    Infinite inner sums are truncated at n_sum terms; `remainder_bound` is an
    exact rational that dominates every truncated remainder (the dropped part
    of each g_k), so [g_k, g_k + remainder_bound] encloses the untruncated
    slope.  Aggregates over k <= K are computed by exchanging the two
    (finite, nonnegative) summations, which is exact for the truncated array.
    """

    K: int
    n_sum: int
    K_n: list[int]                 # K_n for n = 1..n_sum
    n_k: list[int]                 # n_k for k = 1..K
    g: list[Fraction]              # truncated slopes, k = 1..K
    remainder_bound: Fraction
    sum_g: Fraction                # sum of the emitted g_k, k <= K
    sum_g_tail: Fraction           # sum of g_k * tail(k-1), k <= K
    harmonic_lower_bound: Fraction  # sum of 1/n over {n: K_n <= K}, <= sum_g
    tail: Callable[[int], Fraction] = field(repr=False, default=None)

    @classmethod
    def from_slopes(cls, slopes) -> "UtilityCurve":
        """Wrap explicit nonincreasing slopes as a utility curve (no tail)."""
        g = [as_fraction(s) for s in slopes]
        if any(a < b for a, b in zip(g, g[1:])):
            raise ValueError("slopes must be nonincreasing for concavity")
        return cls(K=len(g), n_sum=0, K_n=[], n_k=[], g=g,
                   remainder_bound=ZERO, sum_g=sum(g, ZERO), sum_g_tail=ZERO,
                   harmonic_lower_bound=ZERO)

    def slope(self, k: int) -> Fraction:
        if not 1 <= k <= self.K:
            raise ValueError(f"slope index {k} outside 1..{self.K}")
        return self.g[k - 1]

    def value(self, x: Fraction) -> Fraction:
        """U(x) for 0 <= x <= K: integral of the step slopes."""
        x = as_fraction(x) if not isinstance(x, Fraction) else x
        if x < 0 or x > self.K:
            raise ValueError(f"U is built on [0, {self.K}]")
        whole = int(x)
        out = sum(self.g[:whole], ZERO)
        if x > whole:
            out += self.g[whole] * (x - whole)
        return out

    def pieces(self) -> list[tuple[Fraction, Fraction]]:
        """(slope, intercept) per linear piece; U(x) = min over pieces."""
        out = []
        level = ZERO
        for k, gk in enumerate(self.g, start=1):
            out.append((gk, level - gk * (k - 1)))
            level += gk
        return out


def build_utility(tail: Callable[[int], Fraction], K: int,
                  n_sum: int = DEFAULT_N_SUM,
                  probe_limit: int = DEFAULT_PROBE_LIMIT) -> UtilityCurve:
    """Construct the utility slopes from a nonincreasing tail envelope.

    tail(k) plays the role of sup P(|X| >= k) over the family of interest.
    The block sizes K_n are the smallest values >= max(n, K_{n-1}) whose
    Cesaro average of tail(0..K_n-1) is at most 1/n; the slope g_k adds up
    1/(n K_n) over all blocks with K_n >= k, truncated at n = n_sum.
    """
    if K < 1:
        raise ValueError("need at least one slope")
    if n_sum < 1:
        raise ValueError("n_sum must be positive")

    tails: list[Fraction] = []     # tail(0), tail(1), ...
    prefix: list[Fraction] = [ZERO]  # prefix[m] = sum of tail(j), j < m

    def extend_to(m: int) -> None:
        while len(tails) < m:
            j = len(tails)
            t = as_fraction(tail(j))
            if t < 0 or t > 1:
                raise TailError(f"tail({j}) = {t} outside [0, 1]")
            if tails and t > tails[-1]:
                raise TailError(f"tail not nonincreasing at k = {j}")
            tails.append(t)
            prefix.append(prefix[-1] + t)

    K_n: list[int] = []
    k_prev = 0
    for n in range(1, n_sum + 1):
        k = max(n, k_prev)
        while True:
            if k > probe_limit:
                raise TailError(
                    f"cannot certify Cesaro bound: no K_{n} <= {probe_limit} "
                    f"with average tail <= 1/{n}")
            extend_to(k)
            if n * prefix[k] <= k:
                break
            k += 1
        K_n.append(k)
        k_prev = k

    if K_n[-1] < K:
        raise TailError(
            f"K = {K} slopes need blocks up to K_n >= {K}; raise n_sum "
            f"(largest block at n_sum = {n_sum} is {K_n[-1]})")

    n_k = []
    n = 1
    for k in range(1, K + 1):   # n_k is nondecreasing, so sweep both indices once
        while K_n[n - 1] < k:
            n += 1
        n_k.append(n)

    # One backward pass gives every truncated slope g_k = s_{n_k} where
    # s_N = sum over N <= n <= n_sum of 1/(n K_n).
    suffix: list[Fraction] = [ZERO] * (n_sum + 2)
    for n in range(n_sum, 0, -1):
        suffix[n] = suffix[n + 1] + Fraction(1, n * K_n[n - 1])
    g = [suffix[n_k[k - 1]] for k in range(1, K + 1)]

    extend_to(K)
    sum_g = _pairwise([Fraction(min(K_n[n - 1], K), n * K_n[n - 1])
                       for n in range(1, n_sum + 1)])
    sum_g_tail = _pairwise([prefix[min(K_n[n - 1], K)] / (n * K_n[n - 1])
                            for n in range(1, n_sum + 1)])
    harmonic = _pairwise([Fraction(1, n) for n in range(1, n_sum + 1)
                          if K_n[n - 1] <= K] or [ZERO])
    return UtilityCurve(
        K=K, n_sum=n_sum, K_n=K_n, n_k=n_k, g=g,
        remainder_bound=Fraction(1, n_sum),
        sum_g=sum_g, sum_g_tail=sum_g_tail,
        harmonic_lower_bound=harmonic, tail=tail,
    )


def _pairwise(terms: list[Fraction]) -> Fraction:
    """Exact sum by a fixed balanced reduction; far cheaper than a running
    accumulator when denominators grow."""
    if not terms:
        return ZERO
    while len(terms) > 1:
        terms = [terms[i] + terms[i + 1] if i + 1 < len(terms) else terms[i]
                 for i in range(0, len(terms), 2)]
    return terms[0]


def finite_utility_check(problem: WealthProblem, U: UtilityCurve
                         ) -> tuple[bool, Optional[Fraction]]:
    """sup E[U(X)] over terminal wealths X in K1, as one exact LP.

    U is concave piecewise linear, so U(x) = min over pieces of (slope x +
    intercept); the hypograph variables u_leaf <= each piece linearize the
    objective.  Beyond the last breakpoint U is extended with its final
    slope.  Returns (finite, value); (False, None) means the supremum is
    +infinity, which can only happen when (NA1) fails and the terminal slope
    is positive.
    """
    problem.require_positive()
    rows, var_index = _gain_rows(problem)
    tree = problem.tree
    leaves = tree.leaves
    n_h = len(var_index)
    lp = LinearProgram(n_h + len(leaves))
    lp.set_objective({n_h + i: problem.P.mass(leaf)
                      for i, leaf in enumerate(leaves)})
    for v in tree.nodes:
        if v.parent is not None and rows[v.id]:
            lp.add_ge(rows[v.id], -ONE)
    pieces = U.pieces()
    for i, leaf in enumerate(leaves):
        for slope, intercept in pieces:
            # u <= slope * (1 + gain) + intercept
            row = {n_h + i: ONE}
            for j, coef in rows[leaf].items():
                row[j] = -slope * coef
            lp.add_le(row, slope + intercept)
    res = lp.solve()
    if res.status == UNBOUNDED:
        return False, None
    assert res.status == OPTIMAL
    return True, res.value
