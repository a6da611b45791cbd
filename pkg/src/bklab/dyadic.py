"""Step functions on [0, 1) and the m-adic maximal operator, evaluated exactly.

The tree T consists of the intervals [j m^-d, (j+1) m^-d) for d = 0..N.  A
StepFunction is piecewise constant with Fraction breakpoints; when its values
are Fractions (or ints) every average below is computed in exact rational
arithmetic, which is what makes the linearization identities testable to the
bit.  Functions aligned to the leaf grid at depth N are exactly the ones the
tree operations accept: for those, averages over elements deeper than N equal
the function value, so truncating the supremum at depth N is lossless and

    (M phi)(x) = max over ancestors I of x, depth 0..N, of Av_I(phi).

The linearization assigns to each point the shallowest ancestor attaining
that maximum, giving the distinguished family S_phi, the sets A(phi, I) and
the representation M phi = sum y_I 1_{A(phi, I)}.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral

from .errors import DomainError, NotTGoodError

Value = float | Fraction


@dataclass(frozen=True)
class TreeSpec:
    """Branching factor m and truncation depth N of the tree."""

    m: int = 2
    depth: int = 8

    def __post_init__(self) -> None:
        if not isinstance(self.m, Integral) or self.m < 2:
            raise DomainError(f"branching factor must be an integer >= 2, got {self.m}")
        if not isinstance(self.depth, Integral) or self.depth < 0:
            raise DomainError(f"depth must be a nonnegative integer, got {self.depth}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "depth", int(self.depth))

    @property
    def n_leaves(self) -> int:
        return self.m**self.depth

    @property
    def leaf_measure(self) -> Fraction:
        return Fraction(1, self.n_leaves)


@dataclass(frozen=True, order=True)
class TreeElement:
    """Interval [index m^-depth, (index+1) m^-depth) as a tree node."""

    depth: int
    index: int

    def __post_init__(self) -> None:
        if self.depth < 0 or self.index < 0:
            raise DomainError(f"bad tree element ({self.depth}, {self.index})")

    def start(self, m: int) -> Fraction:
        return Fraction(self.index, m**self.depth)

    def end(self, m: int) -> Fraction:
        return Fraction(self.index + 1, m**self.depth)

    def measure(self, m: int) -> Fraction:
        return Fraction(1, m**self.depth)

    def parent(self, m: int) -> "TreeElement":
        if self.depth == 0:
            raise DomainError("root has no parent")
        return TreeElement(self.depth - 1, self.index // m)

    def children(self, m: int) -> list["TreeElement"]:
        return [TreeElement(self.depth + 1, self.index * m + i) for i in range(m)]

    def ancestor(self, d: int, m: int) -> "TreeElement":
        if d > self.depth:
            raise DomainError("ancestor depth exceeds element depth")
        return TreeElement(d, self.index // m ** (self.depth - d))

    def contains(self, other: "TreeElement", m: int) -> bool:
        """True if other is a subset of self (as tree intervals)."""
        if other.depth < self.depth:
            return False
        return other.index // m ** (other.depth - self.depth) == self.index

    def leaf_range(self, spec: TreeSpec) -> range:
        """Indices of the depth-N leaves below this element."""
        if self.depth > spec.depth:
            raise DomainError("element deeper than the tree")
        width = spec.m ** (spec.depth - self.depth)
        return range(self.index * width, (self.index + 1) * width)


ROOT = TreeElement(0, 0)


def _as_value(v) -> Value:
    if isinstance(v, Fraction):
        val = v
    elif isinstance(v, bool):
        raise DomainError("boolean is not a function value")
    elif isinstance(v, Integral):
        val = Fraction(int(v))
    else:
        val = float(v)
        if not val == val or val in (float("inf"), float("-inf")):
            raise DomainError(f"value must be finite, got {val}")
    if val < 0:
        raise DomainError(f"values must be nonnegative, got {val}")
    return val


class StepFunction:
    """Nonnegative piecewise-constant function on [0, 1).

    Breakpoints are exact Fractions; values are floats or Fractions.  Integer
    values are promoted to Fractions, so functions built from ints compute in
    exact arithmetic end to end.
    """

    __slots__ = ("breakpoints", "values")

    def __init__(self, breakpoints, values):
        bps = tuple(Fraction(b) for b in breakpoints)
        vals = tuple(_as_value(v) for v in values)
        if len(bps) != len(vals) + 1:
            raise DomainError("need one more breakpoint than values")
        if bps[0] != 0 or bps[-1] != 1:
            raise DomainError("breakpoints must run from 0 to 1")
        for a, b in zip(bps, bps[1:]):
            if b <= a:
                raise DomainError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return self.breakpoints == other.breakpoints and self.values == other.values

    def __repr__(self):
        return f"StepFunction({len(self.values)} pieces)"

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, value) -> "StepFunction":
        return cls((0, 1), (value,))

    @classmethod
    def from_pieces(cls, pieces) -> "StepFunction":
        """Build from (start, end, value) triples covering [0, 1) contiguously."""
        pieces = sorted(pieces, key=lambda p: Fraction(p[0]))
        if not pieces:
            raise DomainError("no pieces")
        bps = [Fraction(pieces[0][0])]
        vals = []
        for start, end, value in pieces:
            if Fraction(start) != bps[-1]:
                raise DomainError(f"pieces not contiguous at {start}")
            bps.append(Fraction(end))
            vals.append(value)
        return cls(bps, vals)

    @classmethod
    def from_leaf_values(cls, values, spec: TreeSpec) -> "StepFunction":
        values = list(values)
        if len(values) != spec.n_leaves:
            raise DomainError(f"expected {spec.n_leaves} leaf values, got {len(values)}")
        w = spec.leaf_measure
        bps = [w * i for i in range(spec.n_leaves + 1)]
        return cls(bps, values).simplify()

    # -- basic structure ------------------------------------------------

    def simplify(self) -> "StepFunction":
        """Merge adjacent pieces with equal values."""
        bps = [self.breakpoints[0]]
        vals = []
        for i, v in enumerate(self.values):
            if vals and v == vals[-1]:
                bps[-1] = self.breakpoints[i + 1]
            else:
                vals.append(v)
                bps.append(self.breakpoints[i + 1])
        return StepFunction(bps, vals)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.values)

    def to_exact(self) -> "StepFunction":
        """Promote float values to exact Fractions (floats are dyadic rationals)."""
        return StepFunction(self.breakpoints, [Fraction(v) for v in self.values])

    def to_float(self) -> "StepFunction":
        return StepFunction(self.breakpoints, [float(v) for v in self.values])

    def value_at(self, x) -> Value:
        x = Fraction(x)
        if not (0 <= x < 1):
            raise DomainError(f"point {x} outside [0, 1)")
        lo, hi = 0, len(self.values) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.breakpoints[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        return self.values[lo]

    def is_leaf_aligned(self, spec: TreeSpec) -> bool:
        n = spec.n_leaves
        return all((b * n).denominator == 1 for b in self.breakpoints)

    def leaf_values(self, spec: TreeSpec) -> list[Value]:
        if not self.is_leaf_aligned(spec):
            raise NotTGoodError(
                f"function is not aligned to the depth-{spec.depth} leaf grid"
            )
        w = spec.leaf_measure
        out = []
        piece = 0
        for i in range(spec.n_leaves):
            x = w * i
            while self.breakpoints[piece + 1] <= x:
                piece += 1
            out.append(self.values[piece])
        return out

    # -- integrals ------------------------------------------------------

    def integral(self):
        """Integral over [0, 1); exact when the values are Fractions."""
        total = 0
        for i, v in enumerate(self.values):
            total += v * (self.breakpoints[i + 1] - self.breakpoints[i])
        return total

    def q_integral(self, q: float) -> float:
        """Integral of phi^q; float (fractional powers leave the rationals)."""
        total = 0.0
        for i, v in enumerate(self.values):
            length = float(self.breakpoints[i + 1] - self.breakpoints[i])
            total += float(v) ** q * length
        return total

    def integral_over(self, a, b):
        """Integral over [a, b) within [0, 1]; exact for Fraction values."""
        a, b = Fraction(a), Fraction(b)
        if not (0 <= a <= b <= 1):
            raise DomainError(f"bad interval [{a}, {b})")
        total = 0
        for i, v in enumerate(self.values):
            lo = max(a, self.breakpoints[i])
            hi = min(b, self.breakpoints[i + 1])
            if hi > lo:
                total += v * (hi - lo)
        return total

    def q_integral_over(self, a, b, q: float) -> float:
        a, b = Fraction(a), Fraction(b)
        if not (0 <= a <= b <= 1):
            raise DomainError(f"bad interval [{a}, {b})")
        total = 0.0
        for i, v in enumerate(self.values):
            lo = max(a, self.breakpoints[i])
            hi = min(b, self.breakpoints[i + 1])
            if hi > lo:
                total += float(v) ** q * float(hi - lo)
        return total

    def average_over(self, element: TreeElement, m: int):
        return self.integral_over(element.start(m), element.end(m)) * m**element.depth

    # -- serialization --------------------------------------------------

    def to_json_obj(self, m: int) -> dict:
        """Schema: {"m": m, "pieces": [{"start": {"num", "den_pow"}, "end": ..., "value"}]}.

        Endpoints are encoded as num / m^den_pow; Fraction values as
        {"num", "den"}; float values as JSON numbers.  Round-trips exactly.
        """
        def endpoint(b: Fraction) -> dict:
            den = b.denominator
            power = 1
            p = 0
            while power % den != 0:
                power *= m
                p += 1
                if p > 512:
                    raise DomainError(f"breakpoint {b} is not m-adic for m={m}")
            return {"num": b.numerator * (power // den), "den_pow": p}

        pieces = []
        for i, v in enumerate(self.values):
            piece = {
                "start": endpoint(self.breakpoints[i]),
                "end": endpoint(self.breakpoints[i + 1]),
            }
            if isinstance(v, Fraction):
                piece["value"] = {"num": v.numerator, "den": v.denominator}
            else:
                piece["value"] = v
            pieces.append(piece)
        return {"m": m, "pieces": pieces}

    @classmethod
    def from_json_obj(cls, obj: dict) -> tuple["StepFunction", int]:
        try:
            m = int(obj["m"])
            raw = obj["pieces"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed step function object: {exc}") from exc

        def endpoint(e) -> Fraction:
            return Fraction(int(e["num"]), m ** int(e["den_pow"]))

        pieces = []
        for p in raw:
            v = p["value"]
            if isinstance(v, dict):
                v = Fraction(int(v["num"]), int(v["den"]))
            pieces.append((endpoint(p["start"]), endpoint(p["end"]), v))
        return cls.from_pieces(pieces), m


# -- tree machinery -----------------------------------------------------


def tree_averages(phi: StepFunction, spec: TreeSpec) -> list[list[Value]]:
    """Averages of phi over every element, indexed [depth][index].

    Exact when phi has Fraction values.  Requires leaf alignment.
    """
    leaves = phi.leaf_values(spec)
    m = spec.m
    levels = [None] * (spec.depth + 1)
    levels[spec.depth] = leaves
    for d in range(spec.depth - 1, -1, -1):
        below = levels[d + 1]
        if phi.is_exact:
            inv = Fraction(1, m)
            levels[d] = [sum(below[j * m + i] for i in range(m)) * inv
                         for j in range(m**d)]
        else:
            levels[d] = [sum(float(below[j * m + i]) for i in range(m)) / m
                         for j in range(m**d)]
    return levels


def maximal_function(phi: StepFunction, spec: TreeSpec) -> StepFunction:
    """M phi as a step function on the same leaf grid.

    Running maximum of ancestor averages down the tree; exact in rational mode.
    """
    levels = tree_averages(phi, spec)
    m = spec.m
    running = list(levels[0])
    for d in range(1, spec.depth + 1):
        running = [max(running[j // m], levels[d][j]) for j in range(m**d)]
    return StepFunction.from_leaf_values(running, spec)


def is_t_good(phi: StepFunction, spec: TreeSpec) -> bool:
    """Whether every point's supremum of ancestor averages is attained.

    For leaf-aligned step functions the supremum over all depths equals the
    maximum over depths 0..N (deeper averages repeat the leaf value), so this
    always holds; the check is still performed literally.
    """
    levels = tree_averages(phi, spec)
    m = spec.m
    for i in range(spec.n_leaves):
        anc = [levels[d][i // m ** (spec.depth - d)] for d in range(spec.depth + 1)]
        if max(anc) not in anc:
            return False
    return True


@dataclass(frozen=True)
class Linearization:
    """S_phi with its averages y_I, the sets A(phi, I), weights and star map.

    a_sets maps each I in S_phi to the depth-N leaf indices where I is the
    shallowest element attaining M phi; weights are the exact measures of
    those sets.  star maps I to the smallest member of S_phi strictly
    containing it (None for the root).
    """

    spec: TreeSpec
    elements: tuple[TreeElement, ...]
    averages: dict
    a_sets: dict
    weights: dict
    star: dict

    def maximal_from_parts(self) -> StepFunction:
        """Reassemble M phi as sum of y_I over A(phi, I)."""
        leaves = [None] * self.spec.n_leaves
        for el, idxs in self.a_sets.items():
            y = self.averages[el]
            for i in idxs:
                leaves[i] = y
        if any(v is None for v in leaves):
            raise DomainError("A-sets do not cover [0, 1)")
        return StepFunction.from_leaf_values(leaves, self.spec)


def linearize(phi: StepFunction, spec: TreeSpec) -> Linearization:
    """Distinguished family of phi by the shallowest-attaining-ancestor rule."""
    levels = tree_averages(phi, spec)
    m, N = spec.m, spec.depth

    a_sets: dict[TreeElement, list[int]] = {}
    for i in range(spec.n_leaves):
        best = None
        best_depth = 0
        for d in range(N + 1):
            v = levels[d][i // m ** (N - d)]
            if best is None or v > best:
                best = v
                best_depth = d
        el = TreeElement(best_depth, i // m ** (N - best_depth))
        a_sets.setdefault(el, []).append(i)

    elements = set(a_sets)
    elements.add(ROOT)
    ordered = tuple(sorted(elements))

    averages = {el: levels[el.depth][el.index] for el in ordered}
    w = spec.leaf_measure
    weights = {el: w * len(a_sets.get(el, ())) for el in ordered}

    star: dict[TreeElement, TreeElement | None] = {}
    for el in ordered:
        if el.depth == 0:
            star[el] = None
            continue
        cur = el.parent(m)
        while cur not in elements:
            cur = cur.parent(m)
        star[el] = cur

    return Linearization(
        spec=spec,
        elements=ordered,
        averages=averages,
        a_sets={el: tuple(a_sets.get(el, ())) for el in ordered},
        weights=weights,
        star=star,
    )


def s_phi_by_criterion(phi: StepFunction, spec: TreeSpec) -> frozenset[TreeElement]:
    """S_phi by the strict ancestor-average test.

    An element I != X belongs to S_phi iff every proper ancestor J satisfies
    Av_J(phi) < Av_I(phi); the root always belongs.  Independent of
    linearize(), which goes through the A-sets.
    """
    levels = tree_averages(phi, spec)
    m = spec.m
    out = {ROOT}
    prev = [None]
    for d in range(1, spec.depth + 1):
        cur = []
        for j in range(m**d):
            p = j // m
            parent_avg = levels[d - 1][p]
            bound = parent_avg if d == 1 else max(prev[p], parent_avg)
            cur.append(bound)
            if levels[d][j] > bound:
                out.add(TreeElement(d, j))
        prev = cur
    return frozenset(out)


@dataclass(frozen=True)
class ExcessSet:
    """Maximal elements with average >= L, with the masses over their union.

    measure is k, mass is B = integral of phi over the union, q_mass is
    A = integral of phi^q.
    """

    elements: tuple[TreeElement, ...]
    measure: Fraction
    mass: object
    q_mass: float
    leaves: tuple[int, ...]


def excess_set(phi: StepFunction, L, spec: TreeSpec, q: float) -> ExcessSet:
    """Decompose {M phi >= L} into maximal tree elements.

    The union of the returned elements equals {M phi >= L} exactly at leaf
    resolution.  B >= k L whenever the set is nonempty.
    """
    levels = tree_averages(phi, spec)
    m, N = spec.m, spec.depth
    chosen: list[TreeElement] = []

    stack = [ROOT]
    while stack:
        el = stack.pop()
        if levels[el.depth][el.index] >= L:
            chosen.append(el)
        elif el.depth < N:
            stack.extend(reversed(el.children(m)))
    chosen.sort()

    leaves: list[int] = []
    for el in chosen:
        leaves.extend(el.leaf_range(spec))
    leaf_vals = phi.leaf_values(spec)
    w = spec.leaf_measure
    measure = w * len(leaves)
    mass = sum((leaf_vals[i] * w for i in leaves), start=Fraction(0) if phi.is_exact else 0.0)
    q_mass = float(sum(float(leaf_vals[i]) ** q * float(w) for i in leaves))
    return ExcessSet(
        elements=tuple(chosen),
        measure=measure,
        mass=mass,
        q_mass=q_mass,
        leaves=tuple(leaves),
    )


# -- classical inequalities at leaf resolution --------------------------


@dataclass(frozen=True)
class SlackRecord:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def weak_type_gap(phi: StepFunction, lam: float, spec: TreeSpec) -> SlackRecord:
    """mu({M phi > lam}) <= (1/lam) integral of phi over {M phi > lam}."""
    if lam <= 0:
        raise DomainError(f"weak-type level must be positive, got {lam}")
    mvals = maximal_function(phi, spec).leaf_values(spec)
    leaf_vals = phi.leaf_values(spec)
    w = float(spec.leaf_measure)
    idx = [i for i in range(spec.n_leaves) if mvals[i] > lam]
    lhs = w * len(idx)
    rhs = sum(float(leaf_vals[i]) for i in idx) * w / float(lam)
    return SlackRecord(lhs=lhs, rhs=rhs)


def kolmogorov_gap(phi: StepFunction, q: float, leaves, spec: TreeSpec) -> SlackRecord:
    """integral_E (M phi)^q <= (1-q)^-1 mu(E)^(1-q) ||phi||_1^q for any leaf union E."""
    if not (0.0 < q < 1.0):
        raise DomainError(f"q must lie in (0, 1), got {q}")
    leaves = sorted(set(leaves))
    if leaves and not (0 <= leaves[0] and leaves[-1] < spec.n_leaves):
        raise DomainError("leaf indices out of range")
    mvals = maximal_function(phi, spec).leaf_values(spec)
    w = float(spec.leaf_measure)
    lhs = sum(float(mvals[i]) ** q for i in leaves) * w
    mu_e = w * len(leaves)
    rhs = mu_e ** (1.0 - q) * float(phi.integral()) ** q / (1.0 - q)
    return SlackRecord(lhs=lhs, rhs=rhs)
