"""Domain types for relational schemas and abstract models.

Relational side: tables with ordered columns and a primary key, plus
foreign key constraints. Abstract side: entity tables whose members are
plain attributes, entity references and nested multivalued children.

The classification functions here (``classify_table`` and friends) are
pure functions of a ``RelationalSchema``.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Union

IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class SchemaError(ValueError):
    """A relational schema value violates its invariants or a lookup fails."""


class ClassificationError(SchemaError):
    """An operation that requires a simple table was given a non-simple one."""


@lru_cache(maxsize=4096)
def _matches_identifier(text: str) -> bool:
    return IDENTIFIER_RE.fullmatch(text) is not None


def is_identifier(text: object) -> bool:
    return isinstance(text, str) and _matches_identifier(text)


def _check_identifier(text: object, what: str, owner: str = "") -> None:
    """``what`` may contain ``{}``, filled with ``owner`` only on failure."""
    if not is_identifier(text):
        raise SchemaError(f"{what.format(owner)} is not a valid identifier: {text!r}")


def _duplicates(names: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    dups = []
    for name in names:
        if name in seen and name not in dups:
            dups.append(name)
        seen.add(name)
    return dups


# ---------------------------------------------------------------------------
# Relational schemas


@dataclass(frozen=True)
class Column:
    name: str
    domain: str

    def __post_init__(self) -> None:
        _check_identifier(self.name, "column name")
        _check_identifier(self.domain, "domain of column {}", self.name)


@dataclass(frozen=True)
class RelationalTable:
    name: str
    columns: tuple[Column, ...]
    primary_key: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "primary_key", tuple(self.primary_key))
        _check_identifier(self.name, "table name")
        names = self.column_names
        dups = _duplicates(names)
        if dups:
            raise SchemaError(f"table {self.name}: duplicate column {dups[0]}")
        if not self.primary_key:
            raise SchemaError(f"table {self.name}: empty primary key")
        if _duplicates(self.primary_key):
            raise SchemaError(f"table {self.name}: repeated primary key column")
        present = set(names)
        missing = [c for c in self.primary_key if c not in present]
        if missing:
            raise SchemaError(
                f"table {self.name}: primary key column {missing[0]} does not exist"
            )

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise SchemaError(f"table {self.name} has no column {name}")


@dataclass(frozen=True)
class ForeignKeyConstraint:
    name: str
    source_table: str
    source_columns: tuple[str, ...]
    target_table: str
    target_columns: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_columns", tuple(self.source_columns))
        object.__setattr__(self, "target_columns", tuple(self.target_columns))
        _check_identifier(self.name, "constraint name")
        _check_identifier(self.source_table, "source table of {}", self.name)
        _check_identifier(self.target_table, "target table of {}", self.name)
        if not self.source_columns:
            raise SchemaError(f"constraint {self.name}: no source columns")
        if len(self.source_columns) != len(self.target_columns):
            raise SchemaError(
                f"constraint {self.name}: {len(self.source_columns)} source columns "
                f"but {len(self.target_columns)} target columns"
            )
        if _duplicates(self.source_columns) or _duplicates(self.target_columns):
            raise SchemaError(f"constraint {self.name}: repeated column")


@dataclass(frozen=True)
class RelationalSchema:
    tables: tuple[RelationalTable, ...] = ()
    constraints: tuple[ForeignKeyConstraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", tuple(self.tables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        dups = _duplicates([t.name for t in self.tables])
        if dups:
            raise SchemaError(f"duplicate table {dups[0]}")
        dups = _duplicates([c.name for c in self.constraints])
        if dups:
            raise SchemaError(f"duplicate constraint {dups[0]}")
        by_name = {t.name: t for t in self.tables}
        for fk in self.constraints:
            for table_name, cols in (
                (fk.source_table, fk.source_columns),
                (fk.target_table, fk.target_columns),
            ):
                table = by_name.get(table_name)
                if table is None:
                    raise SchemaError(
                        f"constraint {fk.name}: unknown table {table_name}"
                    )
                for col in cols:
                    if col not in table.column_names:
                        raise SchemaError(
                            f"constraint {fk.name}: table {table_name} "
                            f"has no column {col}"
                        )

    def table(self, name: str) -> RelationalTable:
        for table in self.tables:
            if table.name == name:
                return table
        raise SchemaError(f"unknown table {name}")

    def constraint(self, name: str) -> ForeignKeyConstraint:
        for fk in self.constraints:
            if fk.name == name:
                return fk
        raise SchemaError(f"unknown constraint {name}")

    def constraints_from(self, table: str) -> list[ForeignKeyConstraint]:
        return [fk for fk in self.constraints if fk.source_table == table]


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class Entity:
    pass


@dataclass(frozen=True)
class Multivalued:
    parent_constraint: str


@dataclass(frozen=True)
class Neither:
    diagnostic: str


TableClass = Union[Entity, Multivalued, Neither]


def is_simple_fk(schema: RelationalSchema, constraint: ForeignKeyConstraint) -> bool:
    """True iff the constraint references the whole primary key of its target."""
    target = schema.table(constraint.target_table)
    return set(constraint.target_columns) == set(target.primary_key)


def key_prefix_score(primary_key: Sequence[str], columns: Sequence[str]) -> int:
    """Length of the longest prefix of ``primary_key`` covered by ``columns``."""
    cols = set(columns)
    score = 0
    for name in primary_key:
        if name not in cols:
            break
        score += 1
    return score


def rank_parent_candidates(
    schema: RelationalSchema, table: str, candidates: Sequence[ForeignKeyConstraint]
) -> list[ForeignKeyConstraint]:
    """Order candidate parent constraints best first.

    Longest covered key prefix wins, then the smallest parent table name,
    then declaration order.
    """
    pk = schema.table(table).primary_key
    order = {fk.name: i for i, fk in enumerate(schema.constraints)}
    return sorted(
        candidates,
        key=lambda fk: (
            -key_prefix_score(pk, fk.source_columns),
            fk.target_table,
            order[fk.name],
        ),
    )


def multivalued_witnesses(
    schema: RelationalSchema, table: str
) -> list[ForeignKeyConstraint]:
    """Simple constraints from ``table`` whose source is a proper subset of its key."""
    pk = set(schema.table(table).primary_key)
    return [
        fk
        for fk in schema.constraints_from(table)
        if set(fk.source_columns) < pk and is_simple_fk(schema, fk)
    ]


def classify_table(schema: RelationalSchema, table: str) -> TableClass:
    pk = set(schema.table(table).primary_key)
    inside_key = [
        fk for fk in schema.constraints_from(table) if set(fk.source_columns) <= pk
    ]
    if not inside_key:
        return Entity()
    witnesses = multivalued_witnesses(schema, table)
    if witnesses:
        best = rank_parent_candidates(schema, table, witnesses)[0]
        return Multivalued(best.name)
    blocker = inside_key[0]
    if set(blocker.source_columns) == pk:
        why = "covers the entire primary key"
    else:
        why = "does not reference the primary key of its target"
    return Neither(
        f"table {table} is neither an entity nor a multivalued table: "
        f"constraint {blocker.name} lies inside the primary key and {why}"
    )


def _require_simple(schema: RelationalSchema, table: str) -> TableClass:
    cls = classify_table(schema, table)
    if isinstance(cls, Neither):
        raise ClassificationError(cls.diagnostic)
    return cls


def entity_references_of(
    schema: RelationalSchema, table: str
) -> list[tuple[str, str]]:
    """(constraint, target) for every entity reference leaving ``table``."""
    _require_simple(schema, table)
    all_columns = set(schema.table(table).column_names)
    refs = []
    for fk in schema.constraints_from(table):
        if not set(fk.source_columns) < all_columns:
            continue
        if not is_simple_fk(schema, fk):
            continue
        if isinstance(classify_table(schema, fk.target_table), Entity):
            refs.append((fk.name, fk.target_table))
    return refs


def multivalued_references_of(
    schema: RelationalSchema, table: str
) -> list[tuple[str, str]]:
    """(constraint, child) for every multivalued table attached to ``table``."""
    _require_simple(schema, table)
    witness_of: dict[str, str] = {}
    for other in schema.tables:
        cls = classify_table(schema, other.name)
        if isinstance(cls, Multivalued):
            witness_of[cls.parent_constraint] = other.name
    return [
        (fk.name, witness_of[fk.name])
        for fk in schema.constraints
        if fk.name in witness_of and fk.target_table == table
    ]


def is_redundant_entity_reference(
    schema: RelationalSchema,
    eps: tuple[str, str],
    chosen_mu_assignment: Mapping[str, str],
) -> bool:
    """Whether ``eps`` duplicates the constraint attaching its table to a parent.

    ``chosen_mu_assignment`` maps each multivalued table to the name of the
    constraint by which it is attached to its parent.
    """
    constraint_name, _ = eps
    fk = schema.constraint(constraint_name)
    source = fk.source_table
    if not isinstance(classify_table(schema, source), Multivalued):
        return False
    return chosen_mu_assignment.get(source) == constraint_name


# ---------------------------------------------------------------------------
# Attribute classification


class Repeating(enum.Enum):
    SINGLE = "S"
    MULTIPLE = "M"


class Defining(enum.Enum):
    NONENTITY = "N"
    ENTITY = "E"


@dataclass(frozen=True)
class AttributeClassification:
    repeating: Repeating
    defining: Defining


_TABLES_REQUIRED = {
    (Repeating.SINGLE, Defining.NONENTITY): 0,
    (Repeating.SINGLE, Defining.ENTITY): 1,
    (Repeating.MULTIPLE, Defining.NONENTITY): 1,
    (Repeating.MULTIPLE, Defining.ENTITY): 2,
}


def tables_required(c: AttributeClassification) -> int:
    """Extra database tables implied by an attribute of class ``c``."""
    return _TABLES_REQUIRED[(c.repeating, c.defining)]


# ---------------------------------------------------------------------------
# Abstract models


@dataclass(frozen=True)
class PlainAttribute:
    name: str
    domain: str
    in_key: bool = False

    def __post_init__(self) -> None:
        _check_identifier(self.name, "attribute name")
        _check_identifier(self.domain, "domain of attribute {}", self.name)

    @property
    def member_name(self) -> str:
        return self.name


@dataclass(frozen=True)
class EntityReference:
    ref_name: str
    target: str
    in_key: bool = False
    column_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        _check_identifier(self.ref_name, "reference name")
        _check_identifier(self.target, "target of reference {}", self.ref_name)
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(self.column_names))
            if not self.column_names:
                raise SchemaError(f"reference {self.ref_name}: empty column list")
            for name in self.column_names:
                _check_identifier(name, "column of reference {}", self.ref_name)

    @property
    def member_name(self) -> str:
        return self.ref_name


@dataclass(frozen=True)
class MultivaluedChild:
    ref_name: str
    child: AbstractTable

    def __post_init__(self) -> None:
        _check_identifier(self.ref_name, "reference name")

    @property
    def member_name(self) -> str:
        return self.ref_name

    @property
    def in_key(self) -> bool:
        return False


Member = Union[PlainAttribute, EntityReference, MultivaluedChild]
TableKind = Literal["entity", "multivalued"]


@dataclass(frozen=True)
class AbstractTable:
    name: str
    kind: TableKind = "entity"
    members: tuple[Member, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        _check_identifier(self.name, "table name")
        if self.kind not in ("entity", "multivalued"):
            raise SchemaError(f"table {self.name}: unknown kind {self.kind!r}")

    def children(self) -> list[MultivaluedChild]:
        return [m for m in self.members if isinstance(m, MultivaluedChild)]


@dataclass(frozen=True)
class AbstractModel:
    tables: tuple[AbstractTable, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tables", tuple(self.tables))

    def walk(self) -> Iterator[tuple[tuple[int, ...], AbstractTable, AbstractTable | None]]:
        """Yield ``(path, table, parent)`` for every table in pre-order.

        A top-level table has path ``(i,)``; a nested child has the path of
        the member that holds it.
        """

        def visit(path, table, parent):
            yield path, table, parent
            for j, member in enumerate(table.members):
                if isinstance(member, MultivaluedChild):
                    yield from visit(path + (j,), member.child, table)

        for i, table in enumerate(self.tables):
            yield from visit((i,), table, None)

    def all_tables(self) -> dict[str, AbstractTable]:
        found: dict[str, AbstractTable] = {}
        for _, table, _ in self.walk():
            found.setdefault(table.name, table)
        return found


# ---------------------------------------------------------------------------
# Reference graph


@dataclass(frozen=True)
class Arc:
    source: str
    target: str
    kind: Literal["epsilon", "mu"]
    constraint: str


@dataclass(frozen=True)
class ReferenceGraph:
    vertices: tuple[str, ...]
    arcs: tuple[Arc, ...]
    kinds: Mapping[str, TableKind] = field(default_factory=dict, compare=False)

    def mu_arcs(self) -> list[Arc]:
        return [a for a in self.arcs if a.kind == "mu"]

    def epsilon_arcs(self) -> list[Arc]:
        return [a for a in self.arcs if a.kind == "epsilon"]


def build_reference_graph(model: AbstractModel) -> ReferenceGraph:
    vertices = []
    kinds: dict[str, TableKind] = {}
    arcs = []
    for _, table, _ in model.walk():
        vertices.append(table.name)
        kinds[table.name] = table.kind
        for member in table.members:
            if isinstance(member, EntityReference):
                arcs.append(Arc(table.name, member.target, "epsilon", member.ref_name))
            elif isinstance(member, MultivaluedChild):
                arcs.append(Arc(table.name, member.child.name, "mu", member.ref_name))
    return ReferenceGraph(tuple(vertices), tuple(arcs), kinds)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    """A problem found in an abstract model.

    ``path`` locates the offending node: ``(i,)`` is top-level table ``i``,
    and each further index selects a member of the table reached so far
    (descending into multivalued children).
    """

    message: str
    path: tuple[int, ...] = ()


def validate_model(model: AbstractModel) -> list[Diagnostic]:
    from amdl.compiler import checked_key_closure

    return checked_key_closure(model)[1]


def structural_diagnostics(model: AbstractModel) -> list[Diagnostic]:
    """Every check of validate_model except the column-naming ones, which
    need the key closure."""
    diags: list[Diagnostic] = []
    walked = list(model.walk())

    seen_tables: set[str] = set()
    for path, table, parent in walked:
        if table.name in seen_tables:
            diags.append(Diagnostic(f"duplicate table name {table.name}", path))
        seen_tables.add(table.name)
        if parent is None and table.kind != "entity":
            diags.append(
                Diagnostic(f"top-level table {table.name} must be an entity table", path)
            )
        if parent is not None and table.kind == "entity":
            diags.append(
                Diagnostic(
                    f"entity table {table.name} cannot be nested as a multivalued child",
                    path,
                )
            )

    kinds: dict[str, TableKind] = {}
    for _, table, _ in walked:
        kinds.setdefault(table.name, table.kind)

    seen_refs: set[str] = set()
    for path, table, _ in walked:
        names: set[str] = set()
        for j, member in enumerate(table.members):
            mpath = path + (j,)
            name = member.member_name
            if name in names:
                diags.append(
                    Diagnostic(f"duplicate member name {name} in table {table.name}", mpath)
                )
            names.add(name)
            if isinstance(member, (EntityReference, MultivaluedChild)):
                if member.ref_name in seen_refs:
                    diags.append(
                        Diagnostic(
                            f"duplicate reference name {member.ref_name} "
                            "(reference names become constraint names)",
                            mpath,
                        )
                    )
                seen_refs.add(member.ref_name)
            if isinstance(member, EntityReference):
                if member.target not in kinds:
                    diags.append(Diagnostic(f"unknown entity table {member.target}", mpath))
                elif kinds[member.target] != "entity":
                    diags.append(
                        Diagnostic(
                            f"reference {member.ref_name} targets multivalued table "
                            f"{member.target}; entity references must target entity tables",
                            mpath,
                        )
                    )
                if member.column_names and _duplicates(member.column_names):
                    diags.append(
                        Diagnostic(
                            f"reference {member.ref_name} repeats a column name", mpath
                        )
                    )
        if table.kind == "entity" and not any(m.in_key for m in table.members):
            diags.append(Diagnostic(f"entity table {table.name} has no key member", path))

    diags.extend(_key_cycles(walked, kinds))
    return diags


def _key_cycles(walked, kinds) -> list[Diagnostic]:
    """Cycles among in-key entity references between entity tables."""
    edges: dict[str, list[tuple[str, tuple[int, ...]]]] = {}
    for path, table, parent in walked:
        if parent is not None or table.name in edges:
            continue
        out = []
        for j, member in enumerate(table.members):
            if (
                isinstance(member, EntityReference)
                and member.in_key
                and kinds.get(member.target) == "entity"
            ):
                out.append((member.target, path + (j,)))
        edges[table.name] = out

    diags = []
    reported: set[frozenset[str]] = set()
    state: dict[str, int] = {}
    stack: list[str] = []

    def dfs(node: str) -> None:
        state[node] = 1
        stack.append(node)
        for target, mpath in edges.get(node, []):
            if target not in edges:
                continue
            if state.get(target) == 1:
                start = stack.index(target)
                cycle = stack[start:] + [target]
                key = frozenset(cycle)
                if key not in reported:
                    reported.add(key)
                    diags.append(
                        Diagnostic("key-closure cycle " + "→".join(cycle), mpath)
                    )
            elif target not in state:
                dfs(target)
        stack.pop()
        state[node] = 2

    for node in edges:
        if node not in state:
            dfs(node)
    return diags
