"""Private ID3 decision-tree induction with an information-gain criterion.

The split utility is the (size-scaled, sign-flipped) conditional entropy of
the class given an attribute, so a perfectly separating split scores zero
and everything else scores below; logs are base 2.  Trees are built with a
halved-per-stage budget: each recursion level spends one noisy size count
plus either one attribute selection or one set of leaf class counts, and
sibling partitions compose in parallel.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    BudgetAccountant,
    InvalidInputError,
    SelectionProblem,
    SensitivityFunction,
)
from . import mechanisms
from .sensitivity import NeighborEnumerator, bound_sensitivity

LOG2E = 1.0 / math.log(2.0)


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise InvalidInputError("categorical domain must be nonempty")


@dataclass(frozen=True)
class Continuous:
    lo: float
    hi: float
    bins: int

    def __post_init__(self):
        if self.bins < 2:
            raise InvalidInputError("continuous attributes need at least 2 bins")
        if not (self.lo <= self.hi):
            raise InvalidInputError("continuous domain has lo > hi")


@dataclass(frozen=True)
class TableSchema:
    attributes: tuple              # ordered (name, Categorical | Continuous)
    class_attribute: str
    class_values: tuple

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "class_values", tuple(self.class_values))
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names) or self.class_attribute in names:
            raise InvalidInputError("attribute names must be distinct")

    def spec_of(self, name: str):
        for attr, spec in self.attributes:
            if attr == name:
                return spec
        raise InvalidInputError(f"unknown attribute {name!r}")

    def attribute_names(self) -> tuple:
        return tuple(name for name, _ in self.attributes)


class LabeledTable:
    """Immutable list of rows under a schema.

    Rows are mappings from attribute name to value plus the class value;
    stored canonically so tables hash and compare as multisets.
    """

    __slots__ = ("schema", "rows", "_key")

    def __init__(self, schema: TableSchema, rows: Iterable[Mapping]):
        self.schema = schema
        cols = schema.attribute_names() + (schema.class_attribute,)
        canonical = []
        for row_no, row in enumerate(rows, start=1):
            values = []
            for col in cols:
                if col not in row:
                    raise InvalidInputError(f"row {row_no} is missing {col!r}")
                value = row[col]
                spec = (
                    None if col == schema.class_attribute else schema.spec_of(col)
                )
                if spec is None:
                    if value not in schema.class_values:
                        raise InvalidInputError(
                            f"row {row_no}: class value {value!r} not declared"
                        )
                elif isinstance(spec, Categorical):
                    if value not in spec.values:
                        raise InvalidInputError(
                            f"row {row_no}: value {value!r} outside the domain "
                            f"of {col!r}"
                        )
                else:
                    value = float(value)
                    if not (spec.lo <= value <= spec.hi):
                        raise InvalidInputError(
                            f"row {row_no}: value {value} outside "
                            f"[{spec.lo}, {spec.hi}] of {col!r}"
                        )
                values.append(value)
            canonical.append(tuple(values))
        self.rows = tuple(sorted(canonical))
        self._key = (schema, self.rows)

    def __len__(self):
        return len(self.rows)

    def __eq__(self, other):
        return isinstance(other, LabeledTable) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def _col_index(self, name: str) -> int:
        cols = self.schema.attribute_names() + (self.schema.class_attribute,)
        return cols.index(name)

    def column(self, name: str) -> list:
        ix = self._col_index(name)
        return [row[ix] for row in self.rows]

    def row_dicts(self) -> list[dict]:
        cols = self.schema.attribute_names() + (self.schema.class_attribute,)
        return [dict(zip(cols, row)) for row in self.rows]

    def counts(self, attribute: str) -> dict:
        """Contingency counts tau[j][c] for one attribute, over the declared
        domains (absent combinations count zero)."""
        spec = self.schema.spec_of(attribute)
        if not isinstance(spec, Categorical):
            raise InvalidInputError(
                f"attribute {attribute!r} must be discretized first"
            )
        a_ix = self._col_index(attribute)
        c_ix = self._col_index(self.schema.class_attribute)
        table = {
            j: {c: 0 for c in self.schema.class_values} for j in spec.values
        }
        for row in self.rows:
            table[row[a_ix]][row[c_ix]] += 1
        return table

    def class_counts(self) -> dict:
        c_ix = self._col_index(self.schema.class_attribute)
        counts = {c: 0 for c in self.schema.class_values}
        for row in self.rows:
            counts[row[c_ix]] += 1
        return counts

    def partition(self, attribute: str) -> dict:
        """Disjoint subtables, one per declared value of the attribute."""
        spec = self.schema.spec_of(attribute)
        a_ix = self._col_index(attribute)
        buckets = {j: [] for j in spec.values}
        for row in self.row_dicts():
            buckets[row[attribute]].append(row)
        return {
            j: LabeledTable(self.schema, rows) for j, rows in buckets.items()
        }

    def with_rows(self, rows: Iterable[Mapping]) -> "LabeledTable":
        return LabeledTable(self.schema, rows)


# -- information gain utility ------------------------------------------------


def ig_utility(table: LabeledTable, attribute: str) -> float:
    """Split score ``sum_j sum_c tau_jc * log2(tau_jc / tau_j)``.

    Equal to minus the table-size-scaled conditional entropy of the class
    given the attribute: nonpositive, zero exactly for pure splits, and
    maximized by the classic information-gain choice.
    """
    if attribute == table.schema.class_attribute:
        raise InvalidInputError("cannot split on the class attribute")
    total = 0.0
    for by_class in table.counts(attribute).values():
        tau_j = sum(by_class.values())
        if tau_j == 0:
            continue
        for tau_jc in by_class.values():
            if tau_jc > 0:
                total += tau_jc * math.log2(tau_jc / tau_j)
    return total


def global_sensitivity_ig(n: int) -> float:
    """Worst-case one-row change of the split score on tables of size n."""
    if n < 0:
        raise InvalidInputError("table size must be >= 0")
    return math.log2(n + 1) + LOG2E


@lru_cache(maxsize=None)
def f_add(x: float) -> float:
    """Utility movement potential for adding into a count of x (0 for x <= 0)."""
    if x <= 0:
        return 0.0
    return x * math.log2((x + 1) / x) + math.log2(x + 1)


@lru_cache(maxsize=None)
def g_remove(x: float) -> float:
    """Utility movement potential for removing from a count of x (0 for x <= 1)."""
    if x <= 1:
        return 0.0
    return x * math.log2((x - 1) / x) - math.log2(x - 1)


@lru_cache(maxsize=None)
def h_pair(a: int, b: int) -> float:
    """Largest one-edit score change for a cell with attribute count a and
    class-cell count b."""
    return max(f_add(a) - f_add(b), g_remove(b) - g_remove(a))


def ls0_ig(table: LabeledTable, attribute: str) -> float:
    """Element local sensitivity of the split score at distance 0."""
    best = 0.0
    for by_class in table.counts(attribute).values():
        tau_j = sum(by_class.values())
        for tau_jc in by_class.values():
            best = max(best, h_pair(tau_j, tau_jc))
    return best


class CandidateCache:
    """Memo for the count-pair expansion, shared across t levels of one table."""

    def __init__(self):
        self.pairs: dict = {}
        self.ls_best: dict = {}
        self.ls_frontiers: dict = {}


def candidates_ig(
    table: LabeledTable,
    attribute: str,
    t: int,
    j: Hashable,
    c: Hashable,
    cache: CandidateCache | None = None,
) -> frozenset:
    """Reachable (attribute-count, cell-count) pairs after t typed row edits.

    Each step either removes a row counted by both coordinates or adds a row
    counted by the first only, with the addition gated on the original table
    size; the gate is kept as given even though edits change the actual
    size, which makes the expansion a lower bound when a count can climb
    past the original size (the oracle comparison in the tests bounds that
    effect).  Results are cached per (t, j, c) since callers sweep t upward.
    """
    if t < 0:
        raise InvalidInputError("t must be >= 0")
    if cache is None:
        cache = CandidateCache()
    key = (attribute, t, j, c)
    hit = cache.pairs.get(key)
    if hit is not None:
        return hit
    if t == 0:
        by_class = table.counts(attribute)[j]
        result = frozenset({(sum(by_class.values()), by_class[c])})
    else:
        tau = len(table)
        expanded = set()
        for a, b in candidates_ig(table, attribute, t - 1, j, c, cache):
            if a > 0 and b > 0:
                expanded.add((a - 1, b - 1))
            if a < tau:
                expanded.add((a + 1, b))
        result = frozenset(expanded)
    cache.pairs[key] = result
    return result


def _cell_level_max(a0: int, b0: int, t: int) -> float:
    """Largest movement bound over pairs exactly t ungated edits away from
    (a0, b0).

    Edits that matter are p removals of doubly counted rows and t - p
    additions of singly counted ones, landing on (a0 + t - 2p, b0 - p); the
    remaining edit types are dominated because the movement potentials are
    monotone with shrinking increments, and there is no size gate in the
    add/remove privacy model (a gate makes the bound undershoot and breaks
    the admissibility the mechanisms rely on).
    """
    best = 0.0
    for p in range(min(b0, t) + 1):
        a = a0 + t - 2 * p
        if a < 0:
            continue
        best = max(best, h_pair(a, b0 - p))
    return best


def ls_t_ig(
    table: LabeledTable,
    t: int,
    attribute: str,
    cache: CandidateCache | None = None,
) -> float:
    """Exact element local sensitivity of the split score at distance t.

    The cell movement bound is maximized over every count pair reachable
    within t typed row edits, over all attribute values and classes, via the
    closed-form per-distance scan of :func:`_cell_level_max`.  Nondecreasing
    in t and computed incrementally through the cache.
    """
    if t < 0:
        raise InvalidInputError("t must be >= 0")
    if cache is None:
        cache = CandidateCache()
    spec = table.schema.spec_of(attribute)
    levels = cache.ls_best.setdefault(attribute, [])
    cells = cache.ls_frontiers.get(attribute)
    if cells is None:
        counts = table.counts(attribute)
        cells = [
            (sum(counts[j].values()), counts[j][c])
            for j in spec.values
            for c in table.schema.class_values
        ]
        cache.ls_frontiers[attribute] = cells
    while len(levels) <= t:
        tt = len(levels)
        best = levels[-1] if levels else 0.0
        for a0, b0 in cells:
            best = max(best, _cell_level_max(a0, b0, tt))
        levels.append(best)
    return levels[t]


def ig_sensitivity() -> SensitivityFunction:
    """Split-score local sensitivity as a sensitivity function over tables
    (admissible; bound with the size-matched global sensitivity before use)."""
    caches: dict = {}

    def eval_fn(table: LabeledTable, t: int, attribute: str) -> float:
        cache = caches.get(table)
        if cache is None:
            cache = CandidateCache()
            caches[table] = cache
        return ls_t_ig(table, t, attribute, cache)

    return SensitivityFunction(
        eval=eval_fn,
        declared_admissible=True,
        declared_bounded=False,
        monotonicity="none",
        name="ls_ig",
    )


def ig_problem(table: LabeledTable, attributes: Sequence[str]) -> SelectionProblem:
    """Attribute selection over one node's subtable."""
    return SelectionProblem(
        database=table,
        candidates=tuple(attributes),
        utility=lambda tbl, attr: ig_utility(tbl, attr),
        global_sensitivity=global_sensitivity_ig(len(table)),
        database_size=max(len(table), 1),
    )


def row_edit_enumerator(schema: TableSchema) -> NeighborEnumerator:
    """Add or remove one fully typed row; the tiny-instance privacy model
    for tables."""
    from itertools import product

    domains = []
    for name, spec in schema.attributes:
        if not isinstance(spec, Categorical):
            raise InvalidInputError("enumerator needs categorical attributes")
        domains.append([(name, v) for v in spec.values])
    domains.append(
        [(schema.class_attribute, c) for c in schema.class_values]
    )
    all_rows = [dict(combo) for combo in product(*domains)]

    def neighbors(table: LabeledTable):
        rows = table.row_dicts()
        for extra in all_rows:
            yield table.with_rows(rows + [extra])
        seen = set()
        for ix, row in enumerate(rows):
            key = tuple(sorted(row.items()))
            if key in seen:
                continue
            seen.add(key)
            yield table.with_rows(rows[:ix] + rows[ix + 1:])

    return NeighborEnumerator(neighbors=neighbors, key=lambda tbl: tbl.rows)


# -- noisy counts and tree induction ----------------------------------------


def noisy_count(count: float, epsilon: float, rng) -> float:
    """Count plus Laplace(1/epsilon) noise; counts move by one per row edit."""
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    return float(count) + float(rng.laplace(0.0, 1.0 / epsilon))


@dataclass(frozen=True)
class Leaf:
    label: Hashable

    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Internal:
    attribute: str
    children: tuple                 # ((value, node), ...) in domain order
    majority: Hashable              # fallback label for unseen branch values

    def child(self, value):
        for v, node in self.children:
            if v == value:
                return node
        return None

    def depth(self) -> int:
        return 1 + max(node.depth() for _, node in self.children)


STOP_THRESHOLD = math.sqrt(2.0) / 2.0

VARIANTS = ("global", "local", "shifted")


def _leaf_majority(node) -> Counter:
    if isinstance(node, Leaf):
        return Counter({node.label: 1})
    total = Counter()
    for _, child in node.children:
        total.update(_leaf_majority(child))
    return total


def _pick_majority(counter: Counter, class_values: Sequence) -> Hashable:
    return max(class_values, key=lambda c: (counter.get(c, 0), ))


def build_diffp_id3(
    table: LabeledTable,
    attributes: Sequence[str],
    depth: int,
    epsilon: float,
    variant: str,
    rng,
    accountant: BudgetAccountant | None = None,
    scope_prefix: Hashable = "diffp_id3",
):
    """Differentially private ID3 with a per-stage budget of
    ``epsilon / (2 (depth + 1))``.

    Every recursion level runs one noisy size count and either one private
    attribute selection (exponential mechanism, local dampening, or shifted
    local dampening on the bounded split-score sensitivity) or, at leaves,
    noisy class counts.  Sibling partitions are disjoint, so each stage is a
    parallel scope; the full per-stage budget is reserved up front, making
    the accountant total exactly epsilon regardless of early stops.
    """
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    if depth < 0:
        raise InvalidInputError("depth must be >= 0")
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}")
    for attr in attributes:
        if not isinstance(table.schema.spec_of(attr), Categorical):
            raise InvalidInputError(
                f"attribute {attr!r} must be discretized before induction"
            )
    if accountant is None:
        accountant = BudgetAccountant()
    eps_stage = epsilon / (2 * (depth + 1))
    for level in range(depth + 1):
        for stage in ("count", "select"):
            scope = (scope_prefix, level, stage)
            accountant.open_scope(scope, "parallel")
            accountant.account(scope, eps_stage)  # reserved whether used or not

    class_values = table.schema.class_values
    delta = ig_sensitivity() if variant in ("local", "shifted") else None

    def build(node_table: LabeledTable, attrs: tuple, d: int, node_rng):
        level = depth - d
        count_scope = (scope_prefix, level, "count")
        select_scope = (scope_prefix, level, "select")
        n_noisy = noisy_count(len(node_table), eps_stage, node_rng)
        accountant.account(count_scope, eps_stage)
        t_max = max((len(table.schema.spec_of(a).values) for a in attrs), default=1)
        stop = (
            not attrs
            or d == 0
            or n_noisy / (t_max * len(class_values)) < STOP_THRESHOLD
        )
        if stop:
            counts = node_table.class_counts()
            noisy = {c: noisy_count(counts[c], eps_stage, node_rng)
                     for c in class_values}
            accountant.account(select_scope, eps_stage)
            label = max(class_values, key=lambda c: noisy[c])
            best = noisy[label]
            for c in class_values:  # first declared class wins ties
                if noisy[c] == best:
                    label = c
                    break
            return Leaf(label)
        problem = ig_problem(node_table, attrs)
        if variant == "global":
            chosen, _ = mechanisms.select_exponential(problem, eps_stage, node_rng)
        else:
            bounded = bound_sensitivity(
                delta, problem.global_sensitivity, problem.database_size
            )
            if variant == "local":
                chosen, _ = mechanisms.select_local_dampening(
                    problem, bounded, eps_stage, node_rng
                )
            else:
                chosen, _ = mechanisms.select_shifted_local_dampening(
                    problem, bounded, eps_stage, node_rng
                )
        accountant.account(select_scope, eps_stage)
        remaining = tuple(a for a in attrs if a != chosen)
        parts = node_table.partition(chosen)
        child_rngs = node_rng.spawn(len(parts))
        children = []
        for child_rng, (value, part) in zip(child_rngs, parts.items()):
            children.append((value, build(part, remaining, d - 1, child_rng)))
        label_votes = Counter()
        for _, child in children:
            label_votes.update(_leaf_majority(child))
        return Internal(
            attribute=chosen,
            children=tuple(children),
            majority=_pick_majority(label_votes, class_values),
        )

    tree = build(table, tuple(attributes), depth, rng)
    return tree, accountant


def build_id3(table: LabeledTable, attributes: Sequence[str], depth: int):
    """Non-private reference induction: exact counts, exact argmax, same
    stopping rule and tie-breaks as the private builder."""
    class_values = table.schema.class_values

    def build(node_table, attrs, d):
        t_max = max((len(table.schema.spec_of(a).values) for a in attrs), default=1)
        if (
            not attrs
            or d == 0
            or len(node_table) / (t_max * len(class_values)) < STOP_THRESHOLD
        ):
            counts = node_table.class_counts()
            label = max(class_values, key=lambda c: counts[c])
            best = counts[label]
            for c in class_values:
                if counts[c] == best:
                    label = c
                    break
            return Leaf(label)
        scores = {a: ig_utility(node_table, a) for a in attrs}
        chosen = max(attrs, key=lambda a: scores[a])
        best = scores[chosen]
        for a in attrs:
            if scores[a] == best:
                chosen = a
                break
        remaining = tuple(a for a in attrs if a != chosen)
        children = tuple(
            (value, build(part, remaining, d - 1))
            for value, part in node_table.partition(chosen).items()
        )
        return Internal(
            attribute=chosen,
            children=children,
            majority=_pick_majority(
                sum((_leaf_majority(c) for _, c in children), Counter()),
                class_values,
            ),
        )

    return build(table, tuple(attributes), depth)


def classify(tree, row: Mapping) -> Hashable:
    node = tree
    while isinstance(node, Internal):
        child = node.child(row.get(node.attribute))
        if child is None:
            return node.majority
        node = child
    return node.label


def accuracy(tree, table: LabeledTable) -> float:
    if len(table) == 0:
        return 0.0
    hits = sum(
        1
        for row in table.row_dicts()
        if classify(tree, row) == row[table.schema.class_attribute]
    )
    return hits / len(table)


# -- continuous attributes ---------------------------------------------------


def bin_index(value: float, lo: float, hi: float, bins: int) -> int:
    """Evenly spaced bins on [lo, hi]; every bin is closed on the right so
    boundary values (including hi) land in the bin they cap."""
    if hi <= lo:
        return 0
    width = (hi - lo) / bins
    idx = math.ceil((value - lo) / width) - 1
    return min(max(idx, 0), bins - 1)


def discretize(table: LabeledTable, attribute: str) -> LabeledTable:
    """Replace one continuous attribute by its bin index (a categorical
    attribute with values 0..bins-1)."""
    spec = table.schema.spec_of(attribute)
    if not isinstance(spec, Continuous):
        raise InvalidInputError(f"attribute {attribute!r} is not continuous")
    new_attrs = tuple(
        (name, Categorical(tuple(range(spec.bins))) if name == attribute else s)
        for name, s in table.schema.attributes
    )
    schema = TableSchema(
        attributes=new_attrs,
        class_attribute=table.schema.class_attribute,
        class_values=table.schema.class_values,
    )
    rows = []
    for row in table.row_dicts():
        row[attribute] = bin_index(row[attribute], spec.lo, spec.hi, spec.bins)
        rows.append(row)
    return LabeledTable(schema, rows)


def discretize_all(table: LabeledTable) -> LabeledTable:
    for name, spec in table.schema.attributes:
        if isinstance(spec, Continuous):
            table = discretize(table, name)
    return table


def cross_validate(
    table: LabeledTable,
    depth: int,
    epsilon: float,
    variant: str,
    seed: int,
    folds: int = 10,
) -> float:
    """Mean held-out accuracy over a seeded fold split.

    Continuous attributes are binned first; fold assignment shuffles row
    order deterministically from the seed."""
    if folds < 2:
        raise InvalidInputError("need at least 2 folds")
    table = discretize_all(table)
    rows = table.row_dicts()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(rows))
    fold_of = {int(ix): pos % folds for pos, ix in enumerate(order)}
    attributes = table.schema.attribute_names()
    scores = []
    fold_rngs = rng.spawn(folds)
    for fold in range(folds):
        train = [rows[i] for i in range(len(rows)) if fold_of[i] != fold]
        test = [rows[i] for i in range(len(rows)) if fold_of[i] == fold]
        if not train or not test:
            continue
        tree, _ = build_diffp_id3(
            table.with_rows(train), attributes, depth, epsilon, variant,
            fold_rngs[fold],
        )
        scores.append(accuracy(tree, table.with_rows(test)))
    return float(np.mean(scores))


# -- loading ------------------------------------------------------------------


def schema_from_json(doc: Mapping) -> TableSchema:
    """Sidecar layout: one key per attribute mapping to either
    {"categorical": [...]} or {"continuous": {"min":…, "max":…, "bins":…}},
    plus "class" naming the label column and "classes" listing its values
    (optional; inferred from data when absent)."""
    if "class" not in doc:
        raise InvalidInputError('schema is missing the "class" key')
    class_attr = doc["class"]
    attrs = []
    for name, spec in doc.items():
        if name in ("class", "classes"):
            continue
        if "categorical" in spec:
            attrs.append((name, Categorical(tuple(spec["categorical"]))))
        elif "continuous" in spec:
            c = spec["continuous"]
            attrs.append(
                (name, Continuous(float(c["min"]), float(c["max"]), int(c["bins"])))
            )
        else:
            raise InvalidInputError(
                f"attribute {name!r} needs a categorical or continuous spec"
            )
    classes = tuple(doc.get("classes", ()))
    return TableSchema(
        attributes=tuple(attrs),
        class_attribute=class_attr,
        class_values=classes,
    )


def load_table(data_path, schema_path) -> LabeledTable:
    with open(schema_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    schema = schema_from_json(doc)
    with open(data_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        raw_rows = list(reader)
    if not schema.class_values:
        observed = sorted({row[schema.class_attribute] for row in raw_rows})
        schema = TableSchema(
            attributes=schema.attributes,
            class_attribute=schema.class_attribute,
            class_values=tuple(observed),
        )
    def coerce(raw, declared):
        # CSV hands back strings; match them onto the declared domain.
        if raw in declared:
            return raw
        for v in declared:
            if str(v) == raw:
                return v
        return raw

    rows = []
    for row in raw_rows:
        converted = {}
        for name, spec in schema.attributes:
            value = row.get(name)
            if value is None:
                raise InvalidInputError(f"CSV is missing column {name!r}")
            if isinstance(spec, Continuous):
                converted[name] = float(value)
            else:
                converted[name] = coerce(value, spec.values)
        converted[schema.class_attribute] = coerce(
            row[schema.class_attribute], schema.class_values
        )
        rows.append(converted)
    return LabeledTable(schema, rows)

