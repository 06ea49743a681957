"""Initial enlargement of the tree filtration by a finite label.

An insider observes a leaf-measurable label L from time 0 on.  The enlarged
filtration is carried by label slices: the G-atoms are pairs (tree atom,
label value).  All conditional structure lives in the kernel P_t(atom, l) =
P(L = l | atom) and the marginal P_L; the density Y_t = P_t / P_L always
exists here because L takes finitely many values, and its reciprocal on the
realized label,

    Z_t = 1 / Y_t(atom, l)    on the slice where Y_t > 0,

multiplies every nonnegative supermartingale of the small filtration into a
supermartingale of the enlarged one.

Slices that die (a label whose conditional probability vanishes along a
branch) are retained as structural states of the enlarged market: wealth
constraints continue to bind there, mirroring the product-space picture in
which the label coordinate is decoupled from the path coordinate.  Without
those constraints the insider could lever up unboundedly on a fully revealed
branch and no enlargement statement would survive; with them, one-step
admissibility agrees with the small market's, which is what makes the
no-unbounded-profit property carry over to the insider and gives the
log-utility identity its exact meaning.  The product market (label-indexed
copies of the tree glued under a label-drawing root step, decoupling weights)
realizes this as an ordinary event tree so the arbitrage programs apply
verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .arbitrage import ArbitrageReport, WealthProblem, check_na1
from .deflator import Deflator, construct_deflator, one_step_program
from .filtered_space import (AdaptedProcess, EventTree, ProbMeasure,
                             Strategy)
from .linprog import INFEASIBLE, OPTIMAL, LinearProgram, LPResult

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class EnlargementSpec:
    """Base market filtration plus the label revealed at time zero."""

    tree: EventTree
    P: ProbMeasure
    labels: dict[int, str]

    def __post_init__(self) -> None:
        self.P.validate_for(self.tree)
        if set(self.labels) != set(self.tree.leaves):
            raise ValueError("every leaf needs a label")
        if not self.P.strictly_positive:
            raise ValueError("enlargement analysis needs a strictly positive base")
        self.label_set: tuple[str, ...] = tuple(sorted(set(self.labels.values())))
        self._slices: dict[str, dict[int, Fraction]] = {}

    def slice_masses(self, label: str) -> dict[int, Fraction]:
        """P(atom(v) n {L = label}) for every node v."""
        if label in self._slices:
            return self._slices[label]
        out: dict[int, Fraction] = {}
        for v in sorted(self.tree.nodes, key=lambda nd: -nd.time):
            if not v.children:
                out[v.id] = self.P.mass(v.id) if self.labels[v.id] == label else ZERO
            else:
                out[v.id] = sum((out[c] for c in v.children), ZERO)
        self._slices[label] = out
        return out


@dataclass
class ConditionalKernel:
    """Rows P_t(atom, label) of the conditional label law, plus the marginal."""

    P_t: dict[tuple[int, str], Fraction]
    P_L: dict[str, Fraction]


def kernel(spec: EnlargementSpec) -> ConditionalKernel:
    masses = spec.P.node_masses(spec.tree)
    p_t: dict[tuple[int, str], Fraction] = {}
    slices = {lab: spec.slice_masses(lab) for lab in spec.label_set}
    for v in spec.tree.nodes:
        for lab in spec.label_set:
            p_t[(v.id, lab)] = slices[lab][v.id] / masses[v.id]
    p_l = {lab: slices[lab][spec.tree.root] for lab in spec.label_set}
    return ConditionalKernel(p_t, p_l)


@dataclass
class JacodReport:
    holds: bool                     # P_t << P_L on every atom (true here)
    reverse_holds: bool             # P_t >> P_L on every atom and time
    equivalent: bool
    reverse_by_time: dict[int, bool]
    Y: dict[tuple[int, str], Fraction]


def jacod_check(spec: EnlargementSpec) -> JacodReport:
    """Verify the density criterion and emit Y_t = dP_t/dP_L (0/0 = 0).

    With finitely many label values the criterion cannot fail: a label the
    kernel charges is charged by the marginal.  The reverse direction (the
    kernel still charges every label the marginal charges, i.e. no label has
    been ruled out yet) is informative and reported per time layer: for a
    leaf-measurable label it must fail by the terminal time unless the label
    is constant.
    """
    ker = kernel(spec)
    y: dict[tuple[int, str], Fraction] = {}
    reverse_by_time = {t: True for t in range(spec.tree.horizon + 1)}
    for (v, lab), p in ker.P_t.items():
        pl = ker.P_L[lab]
        assert pl > 0 or p == 0, "label charged by the kernel but not the marginal"
        y[(v, lab)] = p / pl if pl > 0 else ZERO
        if p == 0 and pl > 0:
            reverse_by_time[spec.tree.time_of(v)] = False
    reverse = all(reverse_by_time.values())
    return JacodReport(holds=True, reverse_holds=reverse, equivalent=reverse,
                       reverse_by_time=reverse_by_time, Y=y)


@dataclass
class GProcess:
    """A value per (node, label) slice of the enlarged filtration."""

    values: dict[tuple[int, str], Fraction]

    def at(self, node: int, label: str) -> Fraction:
        return self.values[(node, label)]


def universal_density(spec: EnlargementSpec) -> GProcess:
    """The reciprocal-density process on realized slices, zero on dead ones.

    Every slice of positive mass gets a finite strictly positive value; this
    is checked, since it is exactly where conditioning is meaningful.
    """
    report = jacod_check(spec)
    values: dict[tuple[int, str], Fraction] = {}
    for (v, lab), y in report.Y.items():
        values[(v, lab)] = ONE / y if y > 0 else ZERO
    for v in spec.tree.nodes:
        for lab in spec.label_set:
            if spec.slice_masses(lab)[v.id] > 0:
                assert values[(v.id, lab)] > 0, \
                    f"universal density vanished on charged slice ({v.id}, {lab})"
    return GProcess(values)


def g_supermartingale_check(spec: EnlargementSpec, Zg: GProcess,
                            M: AdaptedProcess) -> list[tuple[int, str, Fraction]]:
    """Per-slice supermartingale inequality for Zg * M, M a process of the
    small filtration.  Returns the violations (node, label, excess)."""
    violations: list[tuple[int, str, Fraction]] = []
    for lab in spec.label_set:
        slices = spec.slice_masses(lab)
        for v in spec.tree.non_leaf_nodes():
            if slices[v.id] == 0:
                continue
            lhs = sum((slices[c] * Zg.at(c, lab) * M.at(c) for c in v.children),
                      ZERO) / slices[v.id]
            rhs = Zg.at(v.id, lab) * M.at(v.id)
            if lhs > rhs:
                violations.append((v.id, lab, lhs - rhs))
    return violations


# -- the enlarged market as an ordinary event tree ------------------------------


@dataclass
class ProductMarket:
    """Label-indexed copies of the base tree glued under a label-drawing root.

    Times shift by one: the root draws the label (prices frozen on that step),
    and step k+1 of the product replays step k of the base.  The measure is
    the decoupled one, P x P_L, which charges every slice; it has the same
    one-step supports as the base market on every copy, so arbitrage verdicts
    transfer copy by copy.
    """

    spec: EnlargementSpec
    tree: EventTree
    Q: ProbMeasure                          # decoupling measure, all slices
    S: AdaptedProcess
    node_of: dict[tuple[int, str], int]     # (base node, label) -> product node
    base_of: dict[int, tuple[Optional[int], Optional[str]]]

    def problem(self) -> WealthProblem:
        return WealthProblem(self.tree, self.Q, self.S)


def product_market(spec: EnlargementSpec, S: AdaptedProcess) -> ProductMarket:
    tree = spec.tree
    d = tree.asset_dim
    parents: list[Optional[int]] = [None]
    times: list[int] = [0]
    node_of: dict[tuple[int, str], int] = {}
    base_of: dict[int, tuple[Optional[int], Optional[str]]] = {0: (None, None)}
    for k in range(tree.horizon + 1):
        for lab in spec.label_set:
            for v in tree.nodes_at(k):
                idx = len(parents)
                if k == 0:
                    parents.append(0)
                else:
                    parents.append(node_of[(tree.parent_of(v), lab)])
                times.append(k + 1)
                node_of[(v, lab)] = idx
                base_of[idx] = (v, lab)
    product = EventTree(tree.horizon + 1, d, parents, times)

    p_l = {lab: spec.slice_masses(lab)[tree.root] for lab in spec.label_set}
    masses = {}
    for leaf in tree.leaves:
        for lab in spec.label_set:
            masses[node_of[(leaf, lab)]] = spec.P.mass(leaf) * p_l[lab]
    Q = ProbMeasure(masses)

    values = {0: S[tree.root]}
    for (v, lab), idx in node_of.items():
        values[idx] = S[v]
    S_bar = AdaptedProcess(values, d)
    return ProductMarket(spec, product, Q, S_bar, node_of, base_of)


def na1_in_enlargement(spec: EnlargementSpec, S: AdaptedProcess
                       ) -> ArbitrageReport:
    """(NA1) for the insider: the arbitrage program on the product market."""
    return check_na1(product_market(spec, S).problem())


def g_deflation_certificate(spec: EnlargementSpec, S: AdaptedProcess,
                            Zg: GProcess) -> list[tuple[int, str, Fraction]]:
    """Exact insider-deflation certificate for a slice process Zg.

    On each charged slice, the one-step optimal-value program runs with the
    slice-conditional weights but keeps the admissibility constraints of every
    structural child (dead slices still constrain the insider); the optimum
    must not exceed Zg on the slice.
    """
    violations = []
    for lab in spec.label_set:
        slices = spec.slice_masses(lab)
        for v in spec.tree.non_leaf_nodes():
            if slices[v.id] == 0:
                continue
            weights = {c: Zg.at(c, lab) for c in v.children}
            value, _ = one_step_program(spec.tree, slices, S, v.id, weights)
            if value > Zg.at(v.id, lab):
                violations.append((v.id, lab, value - Zg.at(v.id, lab)))
    return violations


def multiply(spec: EnlargementSpec, Zg: GProcess, Y: AdaptedProcess) -> GProcess:
    """Slice-wise product of a slice process with a base process."""
    return GProcess({(v, lab): z * Y.at(v)
                     for (v, lab), z in Zg.values.items()})


# -- generalized density condition for arbitrary refinements --------------------


@dataclass
class GeneralizedJacodReport:
    holds: bool                    # later conditional laws << earlier, per path
    reverse_holds: bool
    failures: list[tuple[int, int, int, frozenset]]          # (t, u, atom, cell)
    reverse_failures: list[tuple[int, int, int, frozenset]]


def generalized_jacod_check(tree: EventTree, P: ProbMeasure,
                            g_layers: Sequence[Iterable[frozenset]]
                            ) -> GeneralizedJacodReport:
    """Absolute-continuity relations between conditional laws restricted to an
    arbitrary refining filtration, cell by cell.

    The forward relation (null cells of the time-t conditional law stay null
    under later conditioning along the same path) is the discrete rendering of
    the criterion associated with universal densities; on a finite tree with a
    strictly positive base it holds by monotonicity of nested masses, and the
    verifier confirms it exhaustively.  The informative failure mode on trees
    is the reverse relation: a cell charged at time t whose mass vanishes
    under a later atom on the same path -- the verdict reports those
    separately with the offending (t, u, atom, cell).
    """
    n = tree.horizon
    layers = [list(cells) for cells in g_layers]
    if len(layers) != n + 1:
        raise ValueError(f"need {n + 1} layer partitions, got {len(layers)}")
    leaf_set = set(tree.leaves)
    for t, cells in enumerate(layers):
        seen: set[int] = set()
        for cell in cells:
            if not cell or not cell <= leaf_set:
                raise ValueError(f"layer {t}: cells must be nonempty leaf sets")
            if seen & cell:
                raise ValueError(f"layer {t}: cells overlap")
            seen |= cell
        if seen != leaf_set:
            raise ValueError(f"layer {t}: cells must partition the leaves")
        for cell in cells:
            atoms = {tree.ancestor_at(leaf, t) for leaf in cell}
            if len(atoms) > 1:
                raise ValueError(
                    f"layer {t}: cell {sorted(cell)} is not inside one atom")
        if t > 0:
            prev = layers[t - 1]
            for cell in cells:
                if not any(cell <= big for big in prev):
                    raise ValueError(f"layer {t}: partitions must be nested in time")

    def mass(leaves: Iterable[int]) -> Fraction:
        return sum((P.mass(x) for x in leaves), ZERO)

    failures = []
    reverse_failures = []
    for t in range(n + 1):
        for cell in layers[t]:
            anchor = tree.ancestor_at(next(iter(cell)), t)
            for u in range(t + 1, n + 1):
                for b in {tree.ancestor_at(leaf, u) for leaf in
                          tree.leaves_below(anchor)}:
                    below = set(tree.leaves_below(b))
                    if mass(below) == 0:
                        continue
                    m_cell_atom = mass(cell)
                    m_cell_b = mass(cell & below)
                    if m_cell_atom == 0 and m_cell_b > 0:
                        failures.append((t, u, b, cell))
                    if m_cell_atom > 0 and m_cell_b == 0:
                        reverse_failures.append((t, u, b, cell))
    return GeneralizedJacodReport(
        holds=not failures, reverse_holds=not reverse_failures,
        failures=failures, reverse_failures=reverse_failures)


# -- the insider impossibility example ------------------------------------------


class IncompleteMarketError(ValueError):
    """The construction needs a complete base market (unique pricing rule)."""


@dataclass
class CompleteMarket:
    """Unique strictly positive pricing measure of a complete base market."""

    q_leaf: dict[int, Fraction]            # unique martingale measure
    q_step: dict[int, Fraction]            # one-step weights q(child | parent)


def complete_market_measure(tree: EventTree, S: AdaptedProcess) -> CompleteMarket:
    """Check completeness atom by atom and return the pricing measure.

    A one-step market with children increments dS(c) replicates every payoff
    iff the vectors (1, dS(c)) are linearly independent across children, and
    prices it by the unique solution of sum q = 1, sum q dS = 0; the market is
    viable only if that solution is strictly positive.  Uniqueness makes the
    exact linear solve the whole certificate.
    """
    d = tree.asset_dim
    q_step: dict[int, Fraction] = {}
    for v in tree.non_leaf_nodes():
        children = v.children
        c = len(children)
        if c > d + 1:
            raise IncompleteMarketError(
                f"atom {v.id}: {c} children exceed the {d + 1} independent "
                "payoffs one step can span")
        rows = [[ONE] + [S[ch][i] - S[v.id][i] for i in range(d)]
                for ch in children]
        if _rank(rows) < c:
            raise IncompleteMarketError(
                f"atom {v.id}: one-step payoffs are linearly dependent")
        # transpose system: sum_j q_j = 1 and sum_j q_j dS_i(j) = 0
        sys_rows = [[rows[j][i] for j in range(c)] for i in range(d + 1)]
        rhs = [ONE] + [ZERO] * d
        try:
            q = _solve_exact(sys_rows, rhs)
        except IncompleteMarketError as exc:
            raise IncompleteMarketError(
                f"atom {v.id}: no one-step pricing weights exist") from exc
        if any(x <= 0 for x in q):
            raise IncompleteMarketError(
                f"atom {v.id}: pricing weights are not strictly positive")
        for j, ch in enumerate(children):
            q_step[ch] = q[j]
    q_leaf: dict[int, Fraction] = {}
    for leaf in tree.leaves:
        q = ONE
        w = leaf
        while tree.parent_of(w) is not None:
            q *= q_step[w]
            w = tree.parent_of(w)
        q_leaf[leaf] = q
    return CompleteMarket(q_leaf, q_step)


def replicate(tree: EventTree, S: AdaptedProcess, market: CompleteMarket,
              payoff: dict[int, Fraction]) -> tuple[AdaptedProcess, Strategy]:
    """Value process and hedge for a terminal payoff in a complete market."""
    d = tree.asset_dim
    value: dict[int, Fraction] = {leaf: payoff[leaf] for leaf in tree.leaves}
    hedge: dict[int, tuple[Fraction, ...]] = {}
    for v in sorted(tree.non_leaf_nodes(), key=lambda nd: -nd.time):
        children = v.children
        value[v.id] = sum((market.q_step[c] * value[c] for c in children), ZERO)
        rows = [[S[c][i] - S[v.id][i] for i in range(d)] for c in children]
        rhs = [value[c] - value[v.id] for c in children]
        hedge[v.id] = tuple(_solve_exact(rows, rhs))
    return AdaptedProcess.of_scalars(value), Strategy(hedge, d)


def _rank(rows: list[list[Fraction]]) -> int:
    mat = [list(r) for r in rows]
    rank = 0
    cols = len(mat[0]) if mat else 0
    for col in range(cols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        inv = ONE / mat[rank][col]
        mat[rank] = [a * inv for a in mat[rank]]
        for i in range(len(mat)):
            if i != rank and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]
                 ) -> list[Fraction]:
    """Least-structured exact solve of a consistent system (unique under the
    completeness rank condition)."""
    m = len(rows)
    cols = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots: list[tuple[int, int]] = []
    r = 0
    for col in range(cols):
        piv = next((i for i in range(r, m) if aug[i][col] != 0), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv = ONE / aug[r][col]
        aug[r] = [a * inv for a in aug[r]]
        for i in range(m):
            if i != r and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[r])]
        pivots.append((r, col))
        r += 1
    for i in range(r, m):
        if aug[i][-1] != 0:
            raise IncompleteMarketError("replication system is inconsistent")
    x = [ZERO] * cols
    for row, col in pivots:
        x[col] = aug[row][-1]
    return x


@dataclass
class InsiderReport:
    q_star: CompleteMarket
    hedge: Strategy                               # replicates the label event
    value_process: AdaptedProcess
    insider_strategy: dict[tuple[int, str], tuple[Fraction, ...]]
    arbitrage_gain: dict[tuple[int, str], Fraction]   # terminal insider wealth
    emm_result: LPResult
    emm_infeasible: bool
    na1_product: ArbitrageReport
    deflator_violations: list[tuple[int, str, Fraction]]

    @property
    def contradiction_certified(self) -> bool:
        return self.emm_infeasible and bool(self.na1_product.na1_holds) \
            and not self.deflator_violations


def insider_example(spec: EnlargementSpec, S: AdaptedProcess,
                    event_labels: set[str],
                    base_deflator: Optional[Deflator] = None) -> InsiderReport:
    """Replicate the label event, exhibit the insider's arbitrage, and certify
    that no equivalent insider pricing measure exists while the insider still
    cannot make unbounded profits.

    The hedge H replicates 1_{L in A} at cost q*(A).  Holding -H on the
    complementary slices earns q*(A) there from zero initial wealth and never
    falls below q*(A) - 1: an arbitrage for the insider, so no equivalent
    martingale measure can survive the enlargement; the feasibility program
    over slice measures certifies that exactly.  Unbounded profit remains
    impossible: the product market stays (NA1), witnessed both by its
    arbitrage program and by the slice density (universal density times any
    base deflator) passing the exact deflation certificate.
    """
    if not event_labels or not set(event_labels) <= set(spec.label_set):
        raise ValueError("event labels must be a nonempty subset of the labels")
    p_event = sum((spec.P.mass(leaf) for leaf in spec.tree.leaves
                   if spec.labels[leaf] in event_labels), ZERO)
    if not 0 < p_event < 1:
        raise ValueError("the label event needs probability strictly in (0, 1)")

    tree = spec.tree
    market = complete_market_measure(tree, S)
    payoff = {leaf: ONE if spec.labels[leaf] in event_labels else ZERO
              for leaf in tree.leaves}
    value, hedge = replicate(tree, S, market, payoff)

    insider_strategy: dict[tuple[int, str], tuple[Fraction, ...]] = {}
    for v in tree.non_leaf_nodes():
        for lab in spec.label_set:
            h = hedge[v.id]
            insider_strategy[(v.id, lab)] = (
                tuple(-x for x in h) if lab not in event_labels
                else tuple(ZERO for _ in h))
    gains: dict[tuple[int, str], Fraction] = {}
    for leaf in tree.leaves:
        for lab in spec.label_set:
            if lab in event_labels:
                gains[(leaf, lab)] = ZERO
            else:
                gains[(leaf, lab)] = value.at(tree.root) - value.at(leaf)
    for (leaf, lab), g in gains.items():
        if lab == spec.labels[leaf]:       # realized slices show the arbitrage
            assert g >= 0
            if lab not in event_labels:
                assert g == value.at(tree.root) > 0

    emm = _equivalent_slice_measure_program(spec, S)
    emm_infeasible = emm.status == INFEASIBLE or (
        emm.status == OPTIMAL and emm.value <= 0)

    na1 = na1_in_enlargement(spec, S)
    z_univ = universal_density(spec)
    if base_deflator is None:
        base_deflator = construct_deflator(WealthProblem(tree, spec.P, S))
    z_slice = multiply(spec, z_univ, base_deflator.Z)
    violations = g_deflation_certificate(spec, S, z_slice)
    return InsiderReport(
        q_star=market, hedge=hedge, value_process=value,
        insider_strategy=insider_strategy, arbitrage_gain=gains,
        emm_result=emm, emm_infeasible=emm_infeasible,
        na1_product=na1, deflator_violations=violations,
    )


def _equivalent_slice_measure_program(spec: EnlargementSpec, S: AdaptedProcess
                                      ) -> LPResult:
    """max epsilon over measures on realized slices, martingale on every
    charged slice atom and bounded below by epsilon on every realized leaf;
    a nonpositive optimum (or outright infeasibility) certifies that no
    equivalent insider martingale measure exists."""
    tree = spec.tree
    d = tree.asset_dim
    leaves = list(tree.leaves)
    idx = {leaf: j for j, leaf in enumerate(leaves)}
    eps = len(leaves)
    lp = LinearProgram(len(leaves) + 1)
    lp.set_nonneg(range(len(leaves)))
    lp.set_objective({eps: ONE})
    lp.add_eq({idx[leaf]: ONE for leaf in leaves}, ONE)
    lp.add_le({eps: ONE}, ONE)
    for leaf in leaves:
        lp.add_ge({idx[leaf]: ONE, eps: -ONE}, ZERO)
    for lab in spec.label_set:
        slices = spec.slice_masses(lab)
        for v in tree.non_leaf_nodes():
            if slices[v.id] == 0:
                continue
            charged = [leaf for leaf in tree.leaves_below(v.id)
                       if spec.labels[leaf] == lab]
            for i in range(d):
                row = {}
                for leaf in charged:
                    child = tree.ancestor_at(leaf, v.time + 1)
                    ds = S[child][i] - S[v.id][i]
                    if ds != 0:
                        row[idx[leaf]] = row.get(idx[leaf], ZERO) + ds
                if row:
                    lp.add_eq(row, ZERO)
    return lp.solve(want_duals=False)


# -- log-utility identity --------------------------------------------------------


@dataclass
class LogUtilityReport:
    u_base: float
    u_insider: float
    mutual_information: float
    identity_gap: float            # u_insider - u_base - mutual_information

    FLOAT_TOLERANCE = 1e-9


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def log_utility_identity(spec: EnlargementSpec, S: AdaptedProcess
                         ) -> LogUtilityReport:
    """Growth-optimal log utility with and without the label, and the exact
    information accounting between them.

    In a complete market the optimal terminal wealth is the reciprocal pricing
    density, so u = E log(dP/dq*); per label the same formula runs under the
    conditional law (the pricing rule does not move: death slices still
    constrain the insider, so the market structure is shared).  The identity
    u_insider = u_base + I(label; terminal information) is then an algebraic
    rearrangement, asserted here to float rounding.
    """
    tree = spec.tree
    market = complete_market_measure(tree, S)
    na1 = na1_in_enlargement(spec, S)
    if not na1.na1_holds:
        raise ValueError("insider log utility needs (NA1) in the enlargement")

    u_base = 0.0
    for leaf in tree.leaves:
        p = spec.P.mass(leaf)
        if p > 0:
            u_base += float(p) * (_log_fraction(p) -
                                  _log_fraction(market.q_leaf[leaf]))
    u_insider = 0.0
    information = 0.0
    p_l = {lab: spec.slice_masses(lab)[tree.root] for lab in spec.label_set}
    for lab in spec.label_set:
        pl = p_l[lab]
        if pl == 0:
            continue
        for leaf in tree.leaves:
            if spec.labels[leaf] != lab:
                continue
            p = spec.P.mass(leaf)
            cond = p / pl
            if cond > 0:
                u_insider += float(pl) * float(cond) * (
                    _log_fraction(cond) - _log_fraction(market.q_leaf[leaf]))
                information += float(p) * (_log_fraction(cond) - _log_fraction(p))
    gap = u_insider - u_base - information
    if abs(gap) > LogUtilityReport.FLOAT_TOLERANCE:
        raise AssertionError(f"log-utility identity out of balance by {gap}")
    assert information >= -LogUtilityReport.FLOAT_TOLERANCE, \
        "mutual information must be nonnegative"
    return LogUtilityReport(u_base=u_base, u_insider=u_insider,
                            mutual_information=information, identity_gap=gap)
