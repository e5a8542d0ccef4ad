"""Random abstract models and relational schemas for property tests.

Generators take any object with ``randint``, ``random`` and ``choice``
(``random.Random`` or the hypothesis adapter below).
"""

from __future__ import annotations

import itertools
import random

from hypothesis import strategies as st

from amdl import (
    AbstractModel,
    AbstractTable,
    Column,
    EntityReference,
    ForeignKeyConstraint,
    MultivaluedChild,
    PlainAttribute,
    RelationalSchema,
    RelationalTable,
    validate_model,
)

# Small pool so that plain attributes often collide with inherited or
# synthesized key names.
NAME_POOL = ["id", "name", "code", "k0", "a"]
DOMAINS = ["text", "integer"]


class DrawRandom:
    def __init__(self, draw):
        self.draw = draw

    def randint(self, a: int, b: int) -> int:
        return self.draw(st.integers(a, b))

    def random(self) -> float:
        return self.draw(st.integers(0, 999)) / 1000

    def choice(self, seq):
        return seq[self.draw(st.integers(0, len(seq) - 1))]


def _build_model(
    rng, max_entities: int, max_depth: int, max_members: int, entity_key_refs: bool
) -> AbstractModel:
    counter = itertools.count()
    n = rng.randint(1, max_entities)
    names = [f"E{i}" for i in range(n)]
    explicit: list[list] = []  # mutable placeholders filled once key widths are known

    def member_list(owner_index: int, depth: int, entity: bool) -> list:
        count = rng.randint(1 if entity else 0, max_members)
        members = []
        used: set[str] = set()
        for slot in range(count):
            roll = rng.random()
            force_key = entity and slot == 0
            if force_key or roll < 0.45:
                name = rng.choice(NAME_POOL)
                if name in used:
                    name = f"c{next(counter)}"
                used.add(name)
                in_key = force_key or rng.random() < 0.4
                members.append(PlainAttribute(name, rng.choice(DOMAINS), in_key))
            elif roll < 0.8 or depth >= max_depth:
                target = rng.randint(0, n - 1)
                # between entities, in-key references only point backwards,
                # which keeps key closures acyclic
                in_key = rng.random() < 0.4 and (
                    not entity or (entity_key_refs and target < owner_index)
                )
                ref = f"r{next(counter)}"
                if rng.random() < 0.15:
                    slot_ref = [ref, names[target], in_key, None]
                    explicit.append(slot_ref)
                    members.append(slot_ref)
                else:
                    members.append(EntityReference(ref, names[target], in_key))
            else:
                child = f"M{next(counter)}"
                ref = f"m{next(counter)}"
                members.append(
                    (ref, child, member_list(owner_index, depth + 1, entity=False))
                )
        return members

    raw = [(names[i], member_list(i, 0, entity=True)) for i in range(n)]

    def key_width(table_members, inherited: int) -> int:
        width = inherited
        for m in table_members:
            if isinstance(m, PlainAttribute) and m.in_key:
                width += 1
            elif isinstance(m, EntityReference) and m.in_key:
                width += entity_width[m.target]
            elif isinstance(m, list) and m[2]:
                width += entity_width[m[1]]
        return width

    entity_width: dict[str, int] = {}
    for name, members in raw:
        entity_width[name] = key_width(members, 0)

    def freeze(table_name: str, kind: str, members: list) -> AbstractTable:
        out = []
        for m in members:
            if isinstance(m, list):
                ref, target, in_key, _ = m
                cols = tuple(f"x{next(counter)}" for _ in range(entity_width[target]))
                out.append(EntityReference(ref, target, in_key, cols))
            elif isinstance(m, tuple):
                ref, child, child_members = m
                out.append(MultivaluedChild(ref, freeze(child, "multivalued", child_members)))
            else:
                out.append(m)
        return AbstractTable(table_name, kind, out)

    return AbstractModel([freeze(name, "entity", members) for name, members in raw])


def random_model(
    rng,
    max_entities: int = 6,
    max_depth: int = 3,
    max_members: int = 5,
    entity_key_refs: bool = False,
    attempts: int = 50,
) -> AbstractModel:
    """A valid random model (rejection sampling over the raw generator).

    With ``entity_key_refs`` entity tables may carry in-key entity
    references; such tables compile to multivalued tables, so these models
    only round-trip at the schema level.
    """
    for _ in range(attempts):
        model = _build_model(rng, max_entities, max_depth, max_members, entity_key_refs)
        if not validate_model(model):
            return model
    return AbstractModel([AbstractTable("E0", "entity", [PlainAttribute("id", "text", True)])])


@st.composite
def models(draw, max_entities=4, max_depth=3, max_members=4, entity_key_refs=False):
    return random_model(
        DrawRandom(draw), max_entities, max_depth, max_members, entity_key_refs, attempts=5
    )


def random_models(count: int, seed: int = 0, **kwargs) -> list[AbstractModel]:
    rng = random.Random(seed)
    return [random_model(rng, **kwargs) for _ in range(count)]


# ---------------------------------------------------------------------------
# General relational schemas, not necessarily in the image of compilation


def random_schema(rng, max_tables: int = 4) -> RelationalSchema:
    n = rng.randint(1, max_tables)
    names = [f"T{i}" for i in range(n)]
    columns: dict[str, list[Column]] = {t: [] for t in names}
    pk: dict[str, list[str]] = {t: [] for t in names}
    fks: list[ForeignKeyConstraint] = []
    counter = itertools.count()

    def add_column(table: str, name: str, domain: str, key: bool) -> str:
        if any(c.name == name for c in columns[table]):
            name = f"{name}_{next(counter)}"
        columns[table].append(Column(name, domain))
        if key:
            pk[table].append(name)
        return name

    order = list(names)
    for i in range(n - 1, 0, -1):
        j = rng.randint(0, i)
        order[i], order[j] = order[j], order[i]

    optional = {t for t in names if rng.random() < 0.15}
    for t in names:
        if t not in optional:
            for _ in range(rng.randint(1, 2)):
                add_column(t, f"k{next(counter)}", rng.choice(DOMAINS), key=True)

    # Key-mode constraints, mostly towards tables whose keys are already final.
    for pos, t in enumerate(order):
        wanted = 1 if t in optional else rng.randint(0, 2)
        for _ in range(wanted):
            if pos > 0 and rng.random() < 0.9:
                target = order[rng.randint(0, pos - 1)]
            else:
                target = rng.choice(names)
            if not pk[target] or (target == t and t in optional):
                continue
            fk = f"f{next(counter)}"
            tcols = list(pk[target])
            src = [add_column(t, f"{fk}_{c}", columns[target][0].domain, key=True) for c in tcols]
            fks.append(ForeignKeyConstraint(fk, t, src, target, tcols))
        if not pk[t]:
            add_column(t, f"k{next(counter)}", "text", key=True)

    for t in names:
        for _ in range(rng.randint(0, 2)):
            add_column(t, f"v{next(counter)}", rng.choice(DOMAINS), key=False)

    # Non-key constraints, simple or not.
    for t in names:
        for _ in range(rng.randint(0, 2)):
            target = rng.choice(names)
            if rng.random() < 0.8:
                tcols = list(pk[target])
            else:
                k = rng.randint(1, len(columns[target]))
                tcols = [c.name for c in columns[target][:k]]
            fk = f"f{next(counter)}"
            if rng.random() < 0.2 and len(columns[t]) >= len(tcols):
                start = rng.randint(0, len(columns[t]) - len(tcols))
                src = [c.name for c in columns[t][start : start + len(tcols)]]
            else:
                src = [add_column(t, f"{fk}_{c}", "text", key=False) for c in tcols]
            fks.append(ForeignKeyConstraint(fk, t, src, target, tcols))

    tables = [RelationalTable(t, columns[t], pk[t]) for t in names]
    return RelationalSchema(tables, fks)
