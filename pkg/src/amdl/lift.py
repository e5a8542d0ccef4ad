"""Recover an abstract model from a relational schema.

Every table is classified first. Multivalued tables are then attached to
exactly one parent (the best-ranked viable candidate) and nested under it.
Foreign key columns that take part in a reference are removed from the
attribute list. Tables that fit neither class are reported as excluded,
along with anything nested beneath them.

A table whose only in-key constraint is a simple foreign key covering its
whole primary key is lifted as a multivalued child with no key members of
its own (an optional attribute group). This is the inverse of how such
children compile.
"""

from __future__ import annotations

from dataclasses import dataclass

from amdl.compiler import canonicalize, checked_key_closure
from amdl.model import (
    AbstractModel,
    AbstractTable,
    Entity,
    EntityReference,
    ForeignKeyConstraint,
    Member,
    Multivalued,
    MultivaluedChild,
    Neither,
    PlainAttribute,
    RelationalSchema,
    classify_table,
    is_simple_fk,
    multivalued_witnesses,
    rank_parent_candidates,
)


@dataclass(frozen=True)
class LiftReport:
    model: AbstractModel
    warnings: tuple[str, ...] = ()
    excluded_tables: tuple[tuple[str, str], ...] = ()


def attachment_candidates(
    schema: RelationalSchema, table: str
) -> tuple[list[ForeignKeyConstraint], bool]:
    """Constraints that could attach ``table`` to a parent.

    Returns ``(candidates, optional)``; ``optional`` is true for the
    whole-key pattern described in the module docstring. Entity tables and
    unliftable tables get no candidates.
    """
    cls = classify_table(schema, table)
    if isinstance(cls, Multivalued):
        return multivalued_witnesses(schema, table), False
    if isinstance(cls, Neither):
        pk = set(schema.table(table).primary_key)
        inside = [
            fk for fk in schema.constraints_from(table) if set(fk.source_columns) <= pk
        ]
        if (
            len(inside) == 1
            and set(inside[0].source_columns) == pk
            and is_simple_fk(schema, inside[0])
        ):
            return inside, True
    return [], False


class _Lifter:
    def __init__(self, schema: RelationalSchema):
        self.schema = schema
        self.classes = {t.name: classify_table(schema, t.name) for t in schema.tables}
        self.warnings: list[str] = []
        self.excluded: dict[str, str] = {}
        self.candidates: dict[str, list[ForeignKeyConstraint]] = {}
        self.chosen: dict[str, ForeignKeyConstraint] = {}

    def is_entity_reference(self, fk: ForeignKeyConstraint) -> bool:
        source = self.schema.table(fk.source_table)
        return (
            set(fk.source_columns) < set(source.column_names)
            and is_simple_fk(self.schema, fk)
            and isinstance(self.classes[fk.target_table], Entity)
        )

    def exclude(self, table: str, diagnostic: str) -> None:
        self.excluded.setdefault(table, diagnostic)

    def classify_all(self) -> None:
        for table in self.schema.tables:
            cls = self.classes[table.name]
            if isinstance(cls, Entity):
                pass
            else:
                found, _ = attachment_candidates(self.schema, table.name)
                if found:
                    self.candidates[table.name] = found
                else:
                    self.exclude(table.name, cls.diagnostic)

        for table in self.schema.tables:
            pk = set(table.primary_key)
            for fk in self.schema.constraints_from(table.name):
                inside = pk & set(fk.source_columns)
                if inside and inside != set(fk.source_columns) and self.is_entity_reference(fk):
                    self.exclude(
                        table.name,
                        f"table {table.name}: entity reference {fk.name} lies "
                        "partly inside the primary key",
                    )

    def assign_parents(self) -> None:
        changed = True
        while changed:
            changed = False
            self.chosen = {}
            for table, found in self.candidates.items():
                if table in self.excluded:
                    continue
                viable = [
                    fk
                    for fk in found
                    if fk.target_table != table and fk.target_table not in self.excluded
                ]
                if not viable:
                    if all(fk.target_table == table for fk in found):
                        why = f"table {table} references itself inside its primary key"
                    else:
                        parents = ", ".join(sorted({fk.target_table for fk in found}))
                        why = f"table {table}: parent table {parents} was excluded"
                    self.exclude(table, why)
                    changed = True
                    continue
                self.chosen[table] = rank_parent_candidates(self.schema, table, viable)[0]

            for table in list(self.chosen):
                seen = [table]
                node = self.chosen[table].target_table
                while node in self.chosen and node not in seen:
                    seen.append(node)
                    node = self.chosen[node].target_table
                if node == table:
                    cycle = " -> ".join(seen + [table])
                    for member in seen:
                        self.exclude(member, f"table {member} is part of a parent cycle {cycle}")
                    changed = True

        for table, fk in self.chosen.items():
            rejected = [
                f"{c.target_table} via {c.name}"
                for c in self.candidates[table]
                if c is not fk and c.target_table not in self.excluded and c.target_table != table
            ]
            if rejected:
                self.warnings.append(
                    f"table {table}: attached to {fk.target_table} via {fk.name}; "
                    f"rejected candidates: {', '.join(rejected)}"
                )

    def build(self, name: str, attach: ForeignKeyConstraint | None) -> AbstractTable:
        table = self.schema.table(name)
        pk = set(table.primary_key)
        claimed = set(attach.source_columns) if attach else set()
        if attach is not None:
            parent_key = self.schema.table(attach.target_table).primary_key
            pairs = dict(zip(attach.target_columns, attach.source_columns))
            if [pairs[k] for k in parent_key] != list(parent_key):
                self.warnings.append(
                    f"table {name}: inherited key columns will be named after "
                    f"the key of {attach.target_table}"
                )

        events: list[Member] = []
        for fk in self.schema.constraints:
            if fk.source_table == name and fk is not attach:
                ref = self.entity_reference(fk, claimed, pk)
                if ref is not None:
                    claimed |= set(fk.source_columns)
                    events.append(ref)
            elif (
                fk.target_table == name
                and self.chosen.get(fk.source_table) is fk
                and fk.source_table not in self.excluded
            ):
                events.append(MultivaluedChild(fk.name, self.build(fk.source_table, fk)))

        position = {c.name: i for i, c in enumerate(table.columns)}
        bearing: list[tuple[int, Member]] = [
            (position[c.name], PlainAttribute(c.name, c.domain, c.name in pk))
            for c in table.columns
            if c.name not in claimed
        ]
        for event in events:
            if isinstance(event, EntityReference):
                bearing.append((min(position[c] for c in event.column_names), event))
        bearing.sort(key=lambda item: item[0])

        before: dict[str, list[Member]] = {}
        pending: list[Member] = []
        for event in events:
            if isinstance(event, MultivaluedChild):
                pending.append(event)
            else:
                before[event.ref_name] = pending
                pending = []

        members: list[Member] = []
        for _, member in bearing:
            if isinstance(member, EntityReference):
                members.extend(before.get(member.ref_name, []))
            members.append(member)
        members.extend(pending)
        return AbstractTable(name, "entity" if attach is None else "multivalued", members)

    def entity_reference(
        self, fk: ForeignKeyConstraint, claimed: set[str], pk: set[str]
    ) -> EntityReference | None:
        if not self.is_entity_reference(fk):
            self.warnings.append(
                f"constraint {fk.name} is neither an entity nor a multivalued "
                "reference; its columns are kept as attributes"
            )
            return None
        if fk.target_table in self.excluded:
            self.warnings.append(
                f"constraint {fk.name}: target table {fk.target_table} was excluded; "
                "its columns are kept as attributes"
            )
            return None
        if claimed & set(fk.source_columns):
            self.warnings.append(
                f"constraint {fk.name} shares columns with another reference "
                f"of {fk.source_table} and was dropped"
            )
            return None
        target = self.schema.table(fk.target_table)
        pairs = dict(zip(fk.target_columns, fk.source_columns))
        columns = tuple(pairs[k] for k in target.primary_key)
        source = self.schema.table(fk.source_table)
        for src, tgt in zip(fk.source_columns, fk.target_columns):
            if source.column(src).domain != target.column(tgt).domain:
                self.warnings.append(
                    f"constraint {fk.name}: column {src} will take the domain of "
                    f"{fk.target_table}.{tgt}"
                )
        return EntityReference(fk.name, fk.target_table, set(fk.source_columns) <= pk, columns)

    def run(self) -> LiftReport:
        self.classify_all()
        self.assign_parents()
        roots = [
            self.build(t.name, None)
            for t in self.schema.tables
            if isinstance(self.classes[t.name], Entity) and t.name not in self.excluded
        ]
        model = AbstractModel(roots)
        closure, problems = checked_key_closure(model)
        if closure is None:
            for diag in problems:
                self.warnings.append(f"lifted model is not compilable: {diag.message}")
        else:
            model = canonicalize(model, closure)
        order = [t.name for t in self.schema.tables]
        excluded = sorted(self.excluded.items(), key=lambda item: order.index(item[0]))
        return LiftReport(model, tuple(self.warnings), tuple(excluded))


def lift_schema(schema: RelationalSchema) -> LiftReport:
    return _Lifter(schema).run()
