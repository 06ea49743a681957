"""Supermartingale densities on event trees.

The one-period construction realizes the optimal-value measure: on each atom,
the density value is the supremum of E[one-step wealth | atom] over one-step
1-admissible holdings, an LP whose optimum is reached at a vertex.  The
multi-period density runs the same program backward in time with the
already-built later values as weights, terminal value 1.  Unboundedness of
any per-atom program is precisely a one-step unbounded-profit ray, so (NA1)
failures surface as the offending atom rather than as a silent wrong number.

Deflation means: Z * (1 + (H.S)) is a supermartingale for every 1-admissible
H.  Scaling wealth to 1 on an atom shows it is enough to bound the one-step
programs by Z, which is an exact, certifiable condition; `verify_deflation`
checks it atom by atom and can additionally sample random admissible
strategies to exercise the path-wise inequality.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .arbitrage import WealthProblem
from .filtered_space import (AdaptedProcess, EventTree, ProbMeasure, Strategy,
                             doob_decomposition, dot, stochastic_integral)
from .linprog import OPTIMAL, UNBOUNDED, LinearProgram

ZERO = Fraction(0)
ONE = Fraction(1)


class Na1FailsOnAtom(ValueError):
    """A one-step program is unbounded: the atom supports an arbitrage ray."""

    def __init__(self, atom: int, ray: tuple[Fraction, ...]):
        self.atom = atom
        self.ray = ray
        super().__init__(f"NA1 fails on atom {atom}: unbounded ray {ray}")


@dataclass
class Deflator:
    """A strictly positive density with its additive decomposition cached.

    The construction normalizes the terminal value to 1; dominating-measure
    building instead wants E[Z_0] = 1, which `normalized()` arranges by a
    global rescale (the optimal one-step programs are positively homogeneous,
    so deflation survives scaling).
    """

    Z: AdaptedProcess
    M: AdaptedProcess = field(repr=False)
    dA: Strategy = field(repr=False)
    maximizers: dict[int, tuple[Fraction, ...]] = field(default_factory=dict,
                                                        repr=False)

    def normalized(self, tree: EventTree, P: ProbMeasure) -> "Deflator":
        scale = self.Z.at(tree.root)
        if scale == 1:
            return self
        Z = AdaptedProcess.of_scalars(
            {v.id: self.Z.at(v.id) / scale for v in tree.nodes})
        M, dA = doob_decomposition(tree, P, Z)
        return Deflator(Z, M, dA, self.maximizers)


def one_step_program(tree: EventTree, P_masses: dict[int, Fraction],
                     S: AdaptedProcess, node: int,
                     weights: Optional[dict[int, Fraction]] = None
                     ) -> tuple[Fraction, tuple[Fraction, ...]]:
    """sup over one-step admissible h of E[w * (1 + h.dS) | node].

    `weights` carries the later density values (default 1).  Returns the
    optimum and a maximizing h; which vertex comes back when the maximizer is
    not unique is an artifact of pivoting order and not part of the contract.
    Raises Na1FailsOnAtom with the improving ray when unbounded.
    """
    d = S.dim
    children = tree.children_of(node)
    atom_mass = P_masses[node]
    if atom_mass == 0:
        raise ValueError(f"one-step program on null atom {node}")
    lp = LinearProgram(d)
    objective: dict[int, Fraction] = {}
    const = ZERO
    for c in children:
        w = ONE if weights is None else weights[c]
        pw = P_masses[c] / atom_mass * w
        const += pw
        ds = tuple(a - b for a, b in zip(S[c], S[node]))
        for i in range(d):
            if ds[i] != 0:
                objective[i] = objective.get(i, ZERO) + pw * ds[i]
        row = {i: -ds[i] for i in range(d) if ds[i] != 0}
        if row:
            lp.add_le(row, ONE)            # 1 + h.dS >= 0 on this child
    lp.set_objective(objective)
    res = lp.solve()
    if res.status == UNBOUNDED:
        raise Na1FailsOnAtom(node, tuple(res.ray))
    assert res.status == OPTIMAL
    return const + res.value, tuple(res.x)


def one_period_density(tree: EventTree, P: ProbMeasure, S: AdaptedProcess,
                       at_time: int = 0) -> AdaptedProcess:
    """The optimal-value density over one step, one value per time-`at_time`
    atom; always >= 1 because h = 0 is admissible."""
    if not P.strictly_positive:
        raise ValueError("one-period density needs a strictly positive measure")
    masses = P.node_masses(tree)
    out = {}
    for v in tree.nodes_at(at_time):
        value, _ = one_step_program(tree, masses, S, v)
        out[v] = value
    return AdaptedProcess.of_scalars(out)


def construct_deflator(problem: WealthProblem) -> Deflator:
    """Backward induction with terminal value 1.

    Each atom solves the one-step program weighted by the next-layer density,
    which is exactly the one-period construction applied to the rescaled
    one-step wealth family.  The result satisfies, exactly on every atom,

        sup_h E[Z_{k+1} (1 + h.dS) | atom] = Z_k,

    hence Z deflates every 1-admissible wealth process, and Z_k >= Z's own
    later conditional values (h = 0), so Z is itself a supermartingale.
    """
    problem.require_positive()
    tree, P, S = problem.tree, problem.P, problem.S
    masses = P.node_masses(tree)
    z: dict[int, Fraction] = {leaf: ONE for leaf in tree.leaves}
    maximizers: dict[int, tuple[Fraction, ...]] = {}
    for k in range(tree.horizon - 1, -1, -1):
        for v in tree.nodes_at(k):
            value, h = one_step_program(tree, masses, S, v, z)
            z[v] = value
            maximizers[v] = h
    Z = AdaptedProcess.of_scalars(z)
    M, dA = doob_decomposition(tree, P, Z)
    return Deflator(Z, M, dA, maximizers)


@dataclass
class DeflationReport:
    certified: bool
    violations: list[tuple[int, Fraction]]     # (atom, excess over Z)
    trials: int = 0
    sampled_violations: list[tuple[int, Fraction]] = field(default_factory=list)
    worst_slack: Optional[Fraction] = None

    @property
    def passed(self) -> bool:
        return self.certified and not self.sampled_violations


def verify_deflation(problem: WealthProblem, Z: "AdaptedProcess | Deflator",
                     trials: int = 0, seed: int = 0) -> DeflationReport:
    """Certify the deflation property of Z, then optionally stress it.

    Part (a) is a proof: one LP per atom checks sup_h E[Z_next (1 + h.dS)] <=
    Z there, which bounds every 1-admissible wealth at once.  Part (b) draws
    `trials` seeded random admissible strategies and asserts the supermartingale
    inequality of Z * wealth on every atom, reporting the worst slack; any
    sampled violation with a clean certificate would mean a bug, not bad luck.
    """
    if isinstance(Z, Deflator):
        Z = Z.Z
    tree, P, S = problem.tree, problem.P, problem.S
    masses = P.node_masses(tree)
    violations: list[tuple[int, Fraction]] = []
    for v in tree.non_leaf_nodes():
        try:
            value, _ = one_step_program(tree, masses, S, v.id,
                                        {c: Z.at(c) for c in v.children})
        except Na1FailsOnAtom:
            violations.append((v.id, Fraction(-1)))
            continue
        if value > Z.at(v.id):
            violations.append((v.id, value - Z.at(v.id)))
    report = DeflationReport(certified=not violations, violations=violations,
                             trials=trials)
    if trials <= 0:
        return report

    rng = random.Random(seed)
    worst: Optional[Fraction] = None
    for _ in range(trials):
        H = _random_admissible(rng, tree, S)
        wealth = stochastic_integral(tree, S, H)
        for v in tree.non_leaf_nodes():
            w_here = ONE + wealth.at(v.id)
            lhs = sum((masses[c] / masses[v.id] * Z.at(c) * (ONE + wealth.at(c))
                       for c in v.children), ZERO)
            slack = Z.at(v.id) * w_here - lhs
            if worst is None or slack < worst:
                worst = slack
            if slack < 0:
                report.sampled_violations.append((v.id, slack))
    report.worst_slack = worst
    return report


def _random_admissible(rng: random.Random, tree: EventTree, S: AdaptedProcess
                       ) -> Strategy:
    """A random strategy whose wealth 1 + (H.S) stays nonnegative path-wise:
    scale a random direction into the admissible interval at each atom."""
    d = S.dim
    steps: dict[int, tuple[Fraction, ...]] = {}
    wealth: dict[int, Fraction] = {tree.root: ONE}
    for v in tree.nodes:
        if not v.children:
            continue
        w = wealth[v.id]
        u = tuple(Fraction(rng.randint(-3, 3)) for _ in range(d))
        t_cap = Fraction(4)
        t_max: Optional[Fraction] = None
        for c in v.children:
            rate = dot(u, tuple(a - b for a, b in zip(S[c], S[v.id])))
            if rate < 0:
                bound = w / -rate
                t_max = bound if t_max is None else min(t_max, bound)
        limit = t_cap if t_max is None else min(t_max, t_cap)
        t = limit * Fraction(rng.randint(0, 8), 8)
        h = tuple(t * x for x in u)
        steps[v.id] = h
        for c in v.children:
            wealth[c] = w + dot(h, tuple(a - b for a, b in zip(S[c], S[v.id])))
    return Strategy(steps, d)
