"""Finite filtered probability spaces as event trees, in exact rational arithmetic.

A tree with one root at time 0 and leaves at time n encodes a filtration
(F_0, ..., F_n): the nodes at depth k are the atoms of F_k, and each leaf is an
elementary outcome.  Adapted processes assign one rational vector per node,
strategies assign the holding for the next step to the node where it is
decided, so measurability and predictability are structural rather than
checked.  Everything in this module is exact; no floats enter or leave.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

RationalLike = Union[int, Fraction, str]
Vector = tuple[Fraction, ...]


class NullAtomError(ValueError):
    """Conditioning on an atom of probability zero."""


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions and 'p/q' strings to Fraction; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise TypeError(f"not an exact rational: {value!r}")
    return Fraction(value)


def as_vector(value, dim: int) -> Vector:
    """Coerce a scalar (dim 1) or a sequence of rationals to a length-dim tuple."""
    if isinstance(value, (int, Fraction, str)):
        if dim != 1:
            raise ValueError(f"scalar given where a vector of length {dim} is needed")
        return (as_fraction(value),)
    vec = tuple(as_fraction(x) for x in value)
    if len(vec) != dim:
        raise ValueError(f"vector of length {len(vec)} given, expected {dim}")
    return vec


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


@dataclass(frozen=True)
class Node:
    id: int
    time: int
    parent: Optional[int]
    children: tuple[int, ...]


class EventTree:
    """Rooted tree with time layers; node ids are dense integers in BFS order."""

    def __init__(self, horizon: int, asset_dim: int, parents: Sequence[Optional[int]],
                 times: Sequence[int]):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if asset_dim < 1:
            raise ValueError("asset_dim must be >= 1")
        if len(parents) != len(times):
            raise ValueError("parents and times must have equal length")
        n_nodes = len(parents)
        children: list[list[int]] = [[] for _ in range(n_nodes)]
        for i, p in enumerate(parents):
            if p is None:
                continue
            if not (0 <= p < n_nodes):
                raise ValueError(f"node {i}: parent {p} out of range")
            children[p].append(i)
        self.horizon = horizon
        self.asset_dim = asset_dim
        self.nodes: tuple[Node, ...] = tuple(
            Node(i, times[i], parents[i], tuple(children[i])) for i in range(n_nodes)
        )
        self._validate()
        self._levels: tuple[tuple[int, ...], ...] = tuple(
            tuple(v.id for v in self.nodes if v.time == k) for k in range(horizon + 1)
        )
        self._leaves_below: list[tuple[int, ...]] = [() for _ in range(n_nodes)]
        for v in sorted(self.nodes, key=lambda nd: -nd.time):
            if not v.children:
                self._leaves_below[v.id] = (v.id,)
            else:
                acc: list[int] = []
                for c in v.children:
                    acc.extend(self._leaves_below[c])
                self._leaves_below[v.id] = tuple(acc)

    def _validate(self) -> None:
        roots = [v for v in self.nodes if v.parent is None]
        if len(roots) != 1 or roots[0].time != 0 or roots[0].id != 0:
            raise ValueError("need exactly one root, with id 0 at time 0")
        last_time = 0
        for v in self.nodes:
            if v.time < last_time:
                raise ValueError("node ids must be breadth-first (nondecreasing time)")
            last_time = v.time
            if v.parent is not None and self.nodes[v.parent].time != v.time - 1:
                raise ValueError(f"node {v.id}: parent must live one step earlier")
            if v.time > self.horizon:
                raise ValueError(f"node {v.id}: time beyond horizon")
            if v.time < self.horizon and not v.children:
                raise ValueError(f"node {v.id}: interior node without children")
            if v.time == self.horizon and v.children:
                raise ValueError(f"node {v.id}: leaf with children")

    # -- structure queries ----------------------------------------------------

    @property
    def root(self) -> int:
        return 0

    @property
    def leaves(self) -> tuple[int, ...]:
        return self._levels[self.horizon]

    def nodes_at(self, time: int) -> tuple[int, ...]:
        return self._levels[time]

    def non_leaf_nodes(self) -> Iterable[Node]:
        for v in self.nodes:
            if v.children:
                yield v

    def time_of(self, node: int) -> int:
        return self.nodes[node].time

    def parent_of(self, node: int) -> Optional[int]:
        return self.nodes[node].parent

    def children_of(self, node: int) -> tuple[int, ...]:
        return self.nodes[node].children

    def leaves_below(self, node: int) -> tuple[int, ...]:
        return self._leaves_below[node]

    def ancestor_at(self, node: int, time: int) -> int:
        """The unique time-`time` node on the path from the root to `node`."""
        v = self.nodes[node]
        if time > v.time:
            raise ValueError("ancestor time beyond the node's own time")
        while v.time > time:
            v = self.nodes[v.parent]
        return v.id

    def is_ancestor(self, anc: int, node: int) -> bool:
        a, v = self.nodes[anc], self.nodes[node]
        return a.time <= v.time and self.ancestor_at(node, a.time) == anc

    # -- constructors ----------------------------------------------------------

    @classmethod
    def from_branching(cls, branching: Sequence[Sequence[int]], asset_dim: int = 1
                       ) -> "EventTree":
        """Build from per-layer child counts: branching[k][i] is the number of
        children of the i-th node at time k (nodes in BFS order)."""
        horizon = len(branching)
        parents: list[Optional[int]] = [None]
        times = [0]
        layer = [0]
        for k, counts in enumerate(branching):
            if len(counts) != len(layer):
                raise ValueError(f"layer {k}: expected {len(layer)} child counts")
            nxt = []
            for node, c in zip(layer, counts):
                if c < 1:
                    raise ValueError("every interior node needs at least one child")
                for _ in range(c):
                    parents.append(node)
                    times.append(k + 1)
                    nxt.append(len(parents) - 1)
            layer = nxt
        return cls(horizon, asset_dim, parents, times)

    @classmethod
    def uniform(cls, horizon: int, branches: int, asset_dim: int = 1) -> "EventTree":
        """Tree where every interior node has the same number of children."""
        branching = []
        width = 1
        for _ in range(horizon):
            branching.append([branches] * width)
            width *= branches
        return cls.from_branching(branching, asset_dim)

    @classmethod
    def singleton_path(cls, horizon: int, asset_dim: int = 1) -> "EventTree":
        return cls.from_branching([[1]] * horizon, asset_dim)


class ProbMeasure:
    """Leaf masses summing to one exactly.  Zero-mass leaves are allowed (needed
    for restrictions of dominating measures); operations that condition require
    positive mass on the conditioning atom."""

    def __init__(self, leaf_mass: Mapping[int, RationalLike]):
        self.leaf_mass: dict[int, Fraction] = {
            int(k): as_fraction(v) for k, v in leaf_mass.items()
        }
        if any(m < 0 for m in self.leaf_mass.values()):
            raise ValueError("negative leaf mass")
        if sum(self.leaf_mass.values()) != 1:
            raise ValueError("leaf masses must sum to exactly 1")

    @property
    def strictly_positive(self) -> bool:
        return all(m > 0 for m in self.leaf_mass.values())

    def mass(self, leaf: int) -> Fraction:
        return self.leaf_mass[leaf]

    def node_masses(self, tree: EventTree) -> dict[int, Fraction]:
        """Mass of every atom: sum of the leaf masses below each node."""
        out: dict[int, Fraction] = {}
        for v in sorted(tree.nodes, key=lambda nd: -nd.time):
            if not v.children:
                out[v.id] = self.leaf_mass[v.id]
            else:
                out[v.id] = sum((out[c] for c in v.children), Fraction(0))
        return out

    @classmethod
    def uniform(cls, tree: EventTree) -> "ProbMeasure":
        n = len(tree.leaves)
        return cls({leaf: Fraction(1, n) for leaf in tree.leaves})

    def validate_for(self, tree: EventTree) -> None:
        if set(self.leaf_mass) != set(tree.leaves):
            raise ValueError("measure must assign a mass to exactly the leaves")


class AdaptedProcess:
    """One rational vector per node; F_k-measurability is one value per atom."""

    def __init__(self, values: Mapping[int, object], dim: int = 1):
        self.dim = dim
        self.values: dict[int, Vector] = {
            int(k): as_vector(v, dim) for k, v in values.items()
        }

    def __getitem__(self, node: int) -> Vector:
        return self.values[node]

    def at(self, node: int) -> Fraction:
        """Scalar value; only for dim-1 processes."""
        if self.dim != 1:
            raise ValueError("scalar access on a vector-valued process")
        return self.values[node][0]

    def __contains__(self, node: int) -> bool:
        return node in self.values

    def validate_for(self, tree: EventTree, full: bool = True) -> None:
        if full and set(self.values) != {v.id for v in tree.nodes}:
            raise ValueError("process must assign a value to every node")

    @classmethod
    def of_scalars(cls, values: Mapping[int, RationalLike]) -> "AdaptedProcess":
        return cls(values, dim=1)

    @classmethod
    def constant(cls, tree: EventTree, value, dim: int = 1) -> "AdaptedProcess":
        vec = as_vector(value, dim)
        return cls({v.id: vec for v in tree.nodes}, dim)


class Strategy:
    """Predictable holdings: the vector held over step k+1 sits on the time-k
    node where it is decided, so each non-leaf node carries one value."""

    def __init__(self, steps: Mapping[int, object], dim: int = 1):
        self.dim = dim
        self.steps: dict[int, Vector] = {
            int(k): as_vector(v, dim) for k, v in steps.items()
        }

    def __getitem__(self, node: int) -> Vector:
        return self.steps[node]

    def at(self, node: int) -> Fraction:
        if self.dim != 1:
            raise ValueError("scalar access on a vector-valued strategy")
        return self.steps[node][0]

    def validate_for(self, tree: EventTree) -> None:
        want = {v.id for v in tree.nodes if v.children}
        if set(self.steps) != want:
            raise ValueError("strategy must assign a value to every non-leaf node")

    @classmethod
    def of_scalars(cls, steps: Mapping[int, RationalLike]) -> "Strategy":
        return cls(steps, dim=1)

    @classmethod
    def constant(cls, tree: EventTree, value, dim: Optional[int] = None) -> "Strategy":
        d = tree.asset_dim if dim is None else dim
        vec = as_vector(value, d)
        return cls({v.id: vec for v in tree.nodes if v.children}, d)


class StoppingTime:
    """An antichain of nodes; a path stops at its first node in the antichain
    and otherwise never (the value infinity, encoded as None).

    Localizing sequences are unnecessary here: in finite time the deterministic
    horizon localizes everything, so this type only encodes death and hitting
    times.
    """

    def __init__(self, tree: EventTree, stop_at: Iterable[int]):
        self.tree = tree
        self.stop_at = frozenset(int(v) for v in stop_at)
        for v in self.stop_at:
            for w in self.stop_at:
                if v != w and tree.is_ancestor(v, w):
                    raise ValueError("stop set must be an antichain")
        self._stopped_node: dict[int, Optional[int]] = {}
        for leaf in tree.leaves:
            hit = None
            for k in range(tree.horizon + 1):
                anc = tree.ancestor_at(leaf, k)
                if anc in self.stop_at:
                    hit = anc
                    break
            self._stopped_node[leaf] = hit

    def stopped_node(self, leaf: int) -> Optional[int]:
        """The node where the path through `leaf` stops, or None for infinity."""
        return self._stopped_node[leaf]

    def value(self, leaf: int) -> Optional[int]:
        """The stopping time on the path through `leaf` (None = infinity)."""
        v = self._stopped_node[leaf]
        return None if v is None else self.tree.time_of(v)

    @classmethod
    def hitting_time(cls, tree: EventTree, X: AdaptedProcess, level: Fraction,
                     component: int = 0) -> "StoppingTime":
        """First time the given component of X is >= level."""
        stop: list[int] = []

        def walk(node: int) -> None:
            if X[node][component] >= level:
                stop.append(node)
                return
            for c in tree.children_of(node):
                walk(c)

        walk(tree.root)
        return cls(tree, stop)


# -- operations ----------------------------------------------------------------


def conditional_expectation(tree: EventTree, P: ProbMeasure, X: AdaptedProcess,
                            j: int, at_time: Optional[int] = None) -> AdaptedProcess:
    """E[X_k | F_j] as a process on the time-j layer, by exact weighted averages.

    X must be defined on the time-k layer (k = at_time, default the horizon).
    Atoms of mass zero are tolerated only where X vanishes below them;
    otherwise conditioning is undefined and a NullAtomError is raised.
    """
    k = tree.horizon if at_time is None else at_time
    if not 0 <= j < k <= tree.horizon:
        raise ValueError(f"need 0 <= j < k <= horizon, got j={j}, k={k}")
    masses = P.node_masses(tree)
    zero = tuple(Fraction(0) for _ in range(X.dim))

    def layer_sum(node: int) -> Vector:
        if tree.time_of(node) == k:
            m = masses[node]
            return tuple(m * x for x in X[node])
        acc = zero
        for c in tree.children_of(node):
            acc = tuple(a + b for a, b in zip(acc, layer_sum(c)))
        return acc

    def layer_nodes(node: int) -> list[int]:
        if tree.time_of(node) == k:
            return [node]
        out: list[int] = []
        for c in tree.children_of(node):
            out.extend(layer_nodes(c))
        return out

    out: dict[int, Vector] = {}
    for v in tree.nodes_at(j):
        if masses[v] == 0:
            if any(any(x != 0 for x in X[w]) for w in layer_nodes(v)):
                raise NullAtomError(f"conditioning on null atom {v}")
            out[v] = zero
        else:
            out[v] = tuple(x / masses[v] for x in layer_sum(v))
    return AdaptedProcess(out, X.dim)


def martingale_closure(tree: EventTree, P: ProbMeasure,
                       terminal: AdaptedProcess) -> AdaptedProcess:
    """The martingale E[X_n | F_k] for all k, closed by the given terminal layer."""
    masses = P.node_masses(tree)
    out: dict[int, Vector] = {leaf: terminal[leaf] for leaf in tree.leaves}
    zero = tuple(Fraction(0) for _ in range(terminal.dim))
    for v in sorted(tree.nodes, key=lambda nd: -nd.time):
        if not v.children:
            continue
        if masses[v.id] == 0:
            if any(any(x != 0 for x in out[c]) for c in v.children):
                raise NullAtomError(f"conditioning on null atom {v.id}")
            out[v.id] = zero
            continue
        acc = zero
        for c in v.children:
            acc = tuple(a + masses[c] * x for a, x in zip(acc, out[c]))
        out[v.id] = tuple(x / masses[v.id] for x in acc)
    return AdaptedProcess(out, terminal.dim)


def stochastic_integral(tree: EventTree, S: AdaptedProcess, H: Strategy
                        ) -> AdaptedProcess:
    """The gain process (H.S): zero at the root, and along each edge the
    increment H_parent . (S_child - S_parent)."""
    if S.dim != H.dim:
        raise ValueError(f"dimension mismatch: S has {S.dim}, H has {H.dim}")
    out: dict[int, Fraction] = {tree.root: Fraction(0)}
    for v in tree.nodes:
        if v.parent is None:
            continue
        h = H[v.parent]
        ds = tuple(a - b for a, b in zip(S[v.id], S[v.parent]))
        out[v.id] = out[v.parent] + dot(h, ds)
    return AdaptedProcess.of_scalars(out)


def doob_decomposition(tree: EventTree, P: ProbMeasure, Z: AdaptedProcess
                       ) -> tuple[AdaptedProcess, Strategy]:
    """Split Z = Z_0 + M - A with M an exact martingale started at zero and A
    predictable: the step of A over (k-1, k] is E[Z_{k-1} - Z_k | F_{k-1}],
    stored on the time-(k-1) node.  Returns (M, increments of A)."""
    if Z.dim != 1:
        raise ValueError("Doob decomposition expects a scalar process")
    if not P.strictly_positive:
        raise ValueError("Doob decomposition needs a strictly positive measure")
    masses = P.node_masses(tree)
    dA: dict[int, Fraction] = {}
    for v in tree.non_leaf_nodes():
        exp_next = sum((masses[c] * Z.at(c) for c in v.children), Fraction(0))
        dA[v.id] = Z.at(v.id) - exp_next / masses[v.id]
    M: dict[int, Fraction] = {tree.root: Fraction(0)}
    A: dict[int, Fraction] = {tree.root: Fraction(0)}
    z0 = Z.at(tree.root)
    for v in tree.nodes:
        if v.parent is None:
            continue
        A[v.id] = A[v.parent] + dA[v.parent]
        M[v.id] = Z.at(v.id) - z0 + A[v.id]
    for v in tree.non_leaf_nodes():  # martingale property is exact, so assert it
        drift = sum((masses[c] * (M[c] - M[v.id]) for c in v.children), Fraction(0))
        assert drift == 0, f"Doob martingale part drifts at node {v.id}"
    return AdaptedProcess.of_scalars(M), Strategy.of_scalars(dA)


def expectation(tree: EventTree, P: ProbMeasure, X: AdaptedProcess) -> Vector:
    """E[X_n] over the leaves."""
    acc = tuple(Fraction(0) for _ in range(X.dim))
    for leaf in tree.leaves:
        acc = tuple(a + P.mass(leaf) * x for a, x in zip(acc, X[leaf]))
    return acc
