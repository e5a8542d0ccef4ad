"""Translate an abstract model into a relational schema."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace

from amdl.model import (
    AbstractModel,
    AbstractTable,
    Column,
    Diagnostic,
    EntityReference,
    ForeignKeyConstraint,
    Member,
    MultivaluedChild,
    PlainAttribute,
    RelationalSchema,
    RelationalTable,
    structural_diagnostics,
)


class CompileError(Exception):
    def __init__(self, message: str, path: tuple[int, ...] = ()):
        super().__init__(message)
        self.path = path


@dataclass(frozen=True)
class KeyClosure:
    """Resolved primary key of every table.

    ``inherited`` holds, for multivalued children, the parent key columns
    that prefix the child's own key (empty for entity tables).
    """

    keys: Mapping[str, tuple[Column, ...]]
    inherited: Mapping[str, tuple[Column, ...]]
    # per table, the synthesized columns of each entity reference
    references: Mapping[str, Mapping[str, "_RefColumns"]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __getitem__(self, table: str) -> tuple[Column, ...]:
        return self.keys[table]


@dataclass(frozen=True)
class _RefColumns:
    columns: tuple[Column, ...]
    matches_default: bool


def _reference_columns(
    table: AbstractTable,
    path: tuple[int, ...],
    inherited: tuple[Column, ...],
    key_of: Callable[[str], tuple[Column, ...]],
    keys_only: bool = False,
    known: Mapping[str, _RefColumns] | None = None,
) -> dict[str, _RefColumns]:
    """Synthesize FK columns for the entity references of ``table``.

    In-key references are resolved before the others so that a table's key
    never depends on its non-key references. ``known`` holds results of an
    earlier ``keys_only`` call, which are reused as they stand.
    """
    inherited_names = {c.name for c in inherited}
    occupied = set(inherited_names)
    for j, member in enumerate(table.members):
        if isinstance(member, PlainAttribute):
            if member.name in inherited_names:
                raise CompileError(
                    f"attribute {member.name} of {table.name} collides with "
                    "an inherited parent key column",
                    path + (j,),
                )
            occupied.add(member.name)

    refs = [
        (j, m) for j, m in enumerate(table.members) if isinstance(m, EntityReference)
    ]
    ordered = [r for r in refs if r[1].in_key]
    if not keys_only:
        ordered += [r for r in refs if not r[1].in_key]

    result: dict[str, _RefColumns] = {}
    for j, ref in ordered:
        if known is not None and ref.ref_name in known:
            result[ref.ref_name] = known[ref.ref_name]
            occupied.update(c.name for c in known[ref.ref_name].columns)
            continue
        mpath = path + (j,)
        target_key = key_of(ref.target)
        default = []
        for col in target_key:
            name = col.name
            if name in occupied or name in default:
                name = f"{ref.ref_name}_{col.name}"
                if name in occupied or name in default:
                    name = None
            default.append(name)
        if ref.column_names is not None:
            if len(ref.column_names) != len(target_key):
                raise CompileError(
                    f"reference {ref.ref_name}: {len(ref.column_names)} column names "
                    f"given but {ref.target} has {len(target_key)} key columns",
                    mpath,
                )
            for name in ref.column_names:
                if name in occupied:
                    raise CompileError(
                        f"reference {ref.ref_name}: column {name} collides with "
                        f"an existing column of {table.name}",
                        mpath,
                    )
            names = list(ref.column_names)
            matches = names == default
        else:
            if None in default:
                bad = target_key[default.index(None)].name
                raise CompileError(
                    f"reference {ref.ref_name}: column {ref.ref_name}_{bad} "
                    f"still collides in {table.name}",
                    mpath,
                )
            names = default
            matches = True
        occupied.update(names)
        result[ref.ref_name] = _RefColumns(
            tuple(Column(n, c.domain) for n, c in zip(names, target_key)), matches
        )
    return result


def resolve_key_closure(model: AbstractModel) -> KeyClosure:
    info = {}
    for path, table, parent in model.walk():
        info.setdefault(table.name, (path, table, parent))

    keys: dict[str, tuple[Column, ...]] = {}
    inherited_of: dict[str, tuple[Column, ...]] = {}
    key_refs: dict[str, dict[str, _RefColumns]] = {}
    active: list[str] = []

    def key_of(name: str) -> tuple[Column, ...]:
        if name in keys:
            return keys[name]
        if name not in info:
            raise CompileError(f"unknown entity table {name}")
        if name in active:
            cycle = active[active.index(name):] + [name]
            raise CompileError("key-closure cycle " + "→".join(cycle), info[name][0])
        active.append(name)
        path, table, parent = info[name]
        inherited = key_of(parent.name) if parent is not None else ()
        if any(isinstance(m, EntityReference) and m.in_key for m in table.members):
            ref_cols = _reference_columns(table, path, inherited, key_of, keys_only=True)
        else:
            ref_cols = {}
        key_refs[name] = ref_cols
        key = list(inherited)
        for member in table.members:
            if isinstance(member, PlainAttribute) and member.in_key:
                key.append(Column(member.name, member.domain))
            elif isinstance(member, EntityReference) and member.in_key:
                key.extend(ref_cols[member.ref_name].columns)
        active.pop()
        keys[name] = tuple(key)
        inherited_of[name] = inherited
        return keys[name]

    for name in info:
        key_of(name)
    references = {
        name: _reference_columns(
            table, path, inherited_of[name], key_of, known=key_refs[name]
        )
        for name, (path, table, _) in info.items()
    }
    return KeyClosure(keys, inherited_of, references)


def checked_key_closure(model: AbstractModel) -> tuple[KeyClosure | None, list[Diagnostic]]:
    """The key closure of ``model``, or the diagnostics that prevent it.

    Once the structural checks pass, every remaining compilation error
    surfaces while resolving the closure, so this is a full validation.
    """
    diags = structural_diagnostics(model)
    if diags:
        return None, diags
    try:
        return resolve_key_closure(model), []
    except CompileError as exc:
        return None, [Diagnostic(str(exc), exc.path)]


def synthesize_fk_columns(
    table: AbstractTable, ref: EntityReference, closure: KeyClosure
) -> list[tuple[str, str]]:
    """(name, domain) pairs of the FK columns ``ref`` contributes to ``table``."""
    cols = _reference_columns(
        table, (), closure.inherited.get(table.name, ()), closure.__getitem__
    )
    return [(c.name, c.domain) for c in cols[ref.ref_name].columns]


def compile_model(model: AbstractModel, validate: bool = True) -> RelationalSchema:
    if validate:
        diags = structural_diagnostics(model)
        if diags:
            raise CompileError(diags[0].message, diags[0].path)
    closure = resolve_key_closure(model)
    tables: list[RelationalTable] = []
    constraints: list[ForeignKeyConstraint] = []

    def visit(table: AbstractTable) -> None:
        inherited = closure.inherited[table.name]
        ref_cols = closure.references[table.name]
        key = closure[table.name]
        columns = list(inherited)
        for member in table.members:
            if isinstance(member, PlainAttribute):
                columns.append(Column(member.name, member.domain))
            elif isinstance(member, EntityReference):
                columns.extend(ref_cols[member.ref_name].columns)
        tables.append(RelationalTable(table.name, columns, [c.name for c in key]))

        key_names = tuple(c.name for c in key)
        for member in table.members:
            if isinstance(member, EntityReference):
                constraints.append(
                    ForeignKeyConstraint(
                        member.ref_name,
                        table.name,
                        [c.name for c in ref_cols[member.ref_name].columns],
                        member.target,
                        [c.name for c in closure[member.target]],
                    )
                )
            elif isinstance(member, MultivaluedChild):
                constraints.append(
                    ForeignKeyConstraint(
                        member.ref_name,
                        member.child.name,
                        key_names,
                        table.name,
                        key_names,
                    )
                )
        for member in table.members:
            if isinstance(member, MultivaluedChild):
                visit(member.child)

    for table in model.tables:
        visit(table)
    return RelationalSchema(tables, constraints)


def _canonical_order(members: tuple[Member, ...]) -> tuple[Member, ...]:
    """Move each multivalued child just before the next entity reference.

    A relational schema does not record where a multivalued child sat
    among plain attributes; this is the placement the lifter reconstructs.
    """
    result: list[Member] = []
    pending: list[Member] = []
    for member in members:
        if isinstance(member, MultivaluedChild):
            pending.append(member)
            continue
        if isinstance(member, EntityReference):
            result.extend(pending)
            pending = []
        result.append(member)
    result.extend(pending)
    return tuple(result)


def canonicalize(model: AbstractModel, closure: KeyClosure | None = None) -> AbstractModel:
    """Drop explicit FK column names equal to the defaults and reorder
    multivalued children into canonical position.

    Two models that compile to the same schema have equal canonical forms.
    ``closure`` may be passed when already resolved for ``model``.
    """
    if closure is None:
        closure = resolve_key_closure(model)

    def visit(table: AbstractTable) -> AbstractTable:
        ref_cols = closure.references[table.name]
        members: list[Member] = []
        for member in table.members:
            if isinstance(member, EntityReference):
                if member.column_names is not None and ref_cols[member.ref_name].matches_default:
                    member = replace(member, column_names=None)
            elif isinstance(member, MultivaluedChild):
                member = replace(member, child=visit(member.child))
            members.append(member)
        return replace(table, members=_canonical_order(tuple(members)))

    return AbstractModel([visit(t) for t in model.tables])
