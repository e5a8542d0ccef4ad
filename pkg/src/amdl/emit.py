"""Serializers for schemas and models, and the JSON schema loader."""

from __future__ import annotations

import json
from dataclasses import dataclass

from amdl.model import (
    AbstractModel,
    AbstractTable,
    Column,
    EntityReference,
    ForeignKeyConstraint,
    MultivaluedChild,
    PlainAttribute,
    RelationalSchema,
    RelationalTable,
    build_reference_graph,
    is_identifier,
)

# ---------------------------------------------------------------------------
# SQL DDL

# Words that cannot appear unquoted as identifiers in SQL:1999 (subset that
# commonly collides with attribute names).
_RESERVED = frozenset(
    """
    all alter and any as asc authorization between both by case cast check
    collate column constraint create cross current_date current_time
    current_timestamp current_user default delete desc distinct drop else end
    except exists false fetch for foreign from full grant group having in
    inner insert intersect into is join key leading left like natural not null
    of on only or order outer primary references right select session_user
    set some table then to trailing true union unique update user using values
    when where with
    """.split()
)


def _quote(name: str) -> str:
    return f'"{name}"' if name.lower() in _RESERVED else name


def _cols(names) -> str:
    return ", ".join(_quote(n) for n in names)


def _fk_clause(fk: ForeignKeyConstraint) -> str:
    return (
        f"CONSTRAINT {_quote(fk.name)} FOREIGN KEY ({_cols(fk.source_columns)}) "
        f"REFERENCES {_quote(fk.target_table)} ({_cols(fk.target_columns)})"
    )


def table_order(schema: RelationalSchema) -> tuple[list[str], set[str]]:
    """Emission order of tables and the names of constraints to defer.

    Referenced tables come before referencing ones, ties broken by
    declaration order. When only cycles remain, the earliest declared table
    is emitted and its references to later tables are deferred.
    """
    index = {t.name: i for i, t in enumerate(schema.tables)}
    deps = {
        t.name: {
            fk.target_table
            for fk in schema.constraints_from(t.name)
            if fk.target_table != t.name
        }
        for t in schema.tables
    }
    done: list[str] = []
    emitted: set[str] = set()
    deferred: set[str] = set()
    remaining = sorted(index, key=index.__getitem__)
    while remaining:
        ready = [t for t in remaining if deps[t] <= emitted]
        pick = ready[0] if ready else remaining[0]
        if not ready:
            for fk in schema.constraints_from(pick):
                if fk.target_table != pick and fk.target_table not in emitted:
                    deferred.add(fk.name)
            deps[pick] = set()
        remaining.remove(pick)
        done.append(pick)
        emitted.add(pick)
    return done, deferred


def emit_sql(schema: RelationalSchema) -> str:
    order, deferred = table_order(schema)
    statements = []
    for name in order:
        table = schema.table(name)
        lines = [f"  {_quote(c.name)} {c.domain} NOT NULL" for c in table.columns]
        lines.append(f"  PRIMARY KEY ({_cols(table.primary_key)})")
        for fk in schema.constraints_from(name):
            if fk.name not in deferred:
                lines.append("  " + _fk_clause(fk))
        statements.append(f"CREATE TABLE {_quote(name)} (\n" + ",\n".join(lines) + "\n)")
    for fk in schema.constraints:
        if fk.name in deferred:
            statements.append(f"ALTER TABLE {_quote(fk.source_table)} ADD {_fk_clause(fk)}")
    if not statements:
        return ""
    return ";\n\n".join(statements) + ";\n"


# ---------------------------------------------------------------------------
# Hierarchical notation


@dataclass(frozen=True)
class HierarchyDoc:
    lines: tuple[str, ...]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


def _render_members(table: AbstractTable) -> str:
    parts = []
    for m in table.members:
        if isinstance(m, PlainAttribute):
            part = m.name
        elif isinstance(m, EntityReference):
            part = f"{m.ref_name}[{m.target}]"
        else:
            part = f"{m.ref_name}({_render_members(m.child)})"
        parts.append(f"*{part}*" if m.in_key else part)
    return ", ".join(parts)


def emit_hierarchy(model: AbstractModel) -> HierarchyDoc:
    return HierarchyDoc(
        tuple(f"H({t.name}): {_render_members(t)}" for t in model.tables)
    )


# ---------------------------------------------------------------------------
# Reference graph (Graphviz dot)


def _dot_id(name: str) -> str:
    return f'"{name}"'


def emit_graph(model: AbstractModel) -> str:
    graph = build_reference_graph(model)
    lines = ["digraph model {"]
    for name in graph.vertices:
        shape = "box" if graph.kinds[name] == "entity" else "ellipse"
        lines.append(f"  {_dot_id(name)} [shape={shape}];")
    for arc in graph.arcs:
        style = "solid" if arc.kind == "epsilon" else "dashed"
        lines.append(
            f"  {_dot_id(arc.source)} -> {_dot_id(arc.target)} "
            f'[label="{arc.constraint}", style={style}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON interchange


def emit_json(schema: RelationalSchema) -> str:
    doc = {
        "tables": [
            {
                "name": t.name,
                "columns": [{"name": c.name, "domain": c.domain} for c in t.columns],
                "primary_key": list(t.primary_key),
            }
            for t in schema.tables
        ],
        "constraints": [
            {
                "name": fk.name,
                "source_table": fk.source_table,
                "source_columns": list(fk.source_columns),
                "target_table": fk.target_table,
                "target_columns": list(fk.target_columns),
            }
            for fk in schema.constraints
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


class SchemaLoadError(ValueError):
    """The document is not a valid schema; ``diagnostics`` lists every problem.

    ``malformed`` is true when the text is not JSON at all.
    """

    def __init__(self, diagnostics: list[str], malformed: bool = False):
        super().__init__("\n".join(diagnostics))
        self.diagnostics = diagnostics
        self.malformed = malformed


class _Loader:
    def __init__(self) -> None:
        self.diags: list[str] = []
        # Dependent checks are skipped once something they rely on is broken,
        # so one corrupted field yields one diagnostic.
        self.unreliable_tables = False

    def error(self, where: str, message: str) -> None:
        self.diags.append(f"{where}: {message}")

    def fields(self, obj, where: str, required: tuple[str, ...]) -> bool:
        if not isinstance(obj, dict):
            self.error(where, "expected an object")
            return False
        for key in obj:
            if key not in required:
                self.error(where, f"unknown field {key!r}")
        missing = [k for k in required if k not in obj]
        for key in missing:
            self.error(where, f"missing field {key!r}")
        return not missing

    def ident(self, value, where: str) -> str | None:
        if not is_identifier(value):
            self.error(where, f"expected an identifier, found {json.dumps(value)}")
            return None
        return value

    def ident_list(self, value, where: str, allow_empty: bool = False) -> list | None:
        if not isinstance(value, list):
            self.error(where, "expected a list of identifiers")
            return None
        if not value and not allow_empty:
            self.error(where, "must not be empty")
            return None
        names = [self.ident(v, f"{where}[{i}]") for i, v in enumerate(value)]
        if None in names:
            return None
        seen: set[str] = set()
        for name in names:
            if name in seen:
                self.error(where, f"repeats {name}")
                return None
            seen.add(name)
        return names

    def table(self, obj, where: str):
        """Return ``(name, column_names, table)``.

        ``column_names`` is None when the columns could not be read;
        ``table`` is None when anything about the table is invalid.
        """
        if not self.fields(obj, where, ("name", "columns", "primary_key")):
            self.unreliable_tables = True
            return None, None, None
        name = self.ident(obj["name"], f"{where}.name")
        if name is None:
            self.unreliable_tables = True
        where = f"{where} ({name})" if name else where

        names: list[str] | None = []
        columns: list[Column] = []
        complete = True
        raw = obj["columns"]
        if not isinstance(raw, list):
            self.error(f"{where}.columns", "expected a list")
            names = None
        else:
            for i, col in enumerate(raw):
                cw = f"{where}.columns[{i}]"
                if not self.fields(col, cw, ("name", "domain")):
                    names = None
                    continue
                cname = self.ident(col["name"], f"{cw}.name")
                domain = self.ident(col["domain"], f"{cw}.domain")
                if cname is None:
                    names = None
                    continue
                if names is not None and cname in names:
                    self.error(cw, f"duplicate column {cname}")
                    complete = False
                    continue
                if names is not None:
                    names.append(cname)
                if domain is None:
                    complete = False
                else:
                    columns.append(Column(cname, domain))
        if names is None:
            self.unreliable_tables = True

        pk = self.ident_list(obj["primary_key"], f"{where}.primary_key")
        if pk is not None and names is not None:
            missing = [c for c in pk if c not in names]
            if missing:
                self.error(f"{where}.primary_key", f"unknown column {missing[0]}")
                pk = None
        if name is None or names is None or pk is None or not complete:
            return name, names, None
        return name, names, RelationalTable(name, columns, pk)

    def constraint(self, obj, where: str, tables: dict) -> ForeignKeyConstraint | None:
        required = ("name", "source_table", "source_columns", "target_table", "target_columns")
        if not self.fields(obj, where, required):
            return None
        name = self.ident(obj["name"], f"{where}.name")
        where = f"{where} ({name})" if name else where
        ends = []
        for side in ("source", "target"):
            tname = self.ident(obj[f"{side}_table"], f"{where}.{side}_table")
            cols = self.ident_list(obj[f"{side}_columns"], f"{where}.{side}_columns")
            ends.append((tname, cols))
        (src_t, src_c), (tgt_t, tgt_c) = ends
        ok = name is not None and None not in (src_t, src_c, tgt_t, tgt_c)
        if src_c is not None and tgt_c is not None and len(src_c) != len(tgt_c):
            self.error(
                where,
                f"constraint {name or '?'} has {len(src_c)} source columns "
                f"but {len(tgt_c)} target columns",
            )
            ok = False
        for side, (tname, cols) in zip(("source", "target"), ends):
            if tname is None:
                continue
            known = tables.get(tname)
            if known is None:
                if not self.unreliable_tables:
                    self.error(f"{where}.{side}_table", f"unknown table {tname}")
                ok = False
                continue
            if known == "broken" or cols is None:
                ok = False
                continue
            for col in cols:
                if col not in known:
                    self.error(f"{where}.{side}_columns", f"table {tname} has no column {col}")
                    ok = False
                    break
        if not ok:
            return None
        return ForeignKeyConstraint(name, src_t, src_c, tgt_t, tgt_c)

    def load(self, text: str | bytes) -> RelationalSchema:
        if isinstance(text, bytes):
            try:
                text = text.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise SchemaLoadError(
                    [f"invalid UTF-8 at byte {exc.start}"], malformed=True
                ) from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaLoadError(
                [f"{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}"], malformed=True
            ) from None
        except RecursionError:
            raise SchemaLoadError(["malformed JSON: nested too deeply"], malformed=True) from None

        if not self.fields(doc, "document", ("tables", "constraints")):
            raise SchemaLoadError(self.diags)

        tables: list[RelationalTable] = []
        # name -> set of column names, or "broken" when columns could not be read
        index: dict[str, object] = {}
        raw_tables = doc["tables"]
        if not isinstance(raw_tables, list):
            self.error("tables", "expected a list")
            self.unreliable_tables = True
            raw_tables = []
        for i, obj in enumerate(raw_tables):
            name, names, table = self.table(obj, f"tables[{i}]")
            if name is None:
                continue
            if name in index:
                self.error(f"tables[{i}]", f"duplicate table {name}")
                continue
            index[name] = "broken" if names is None else set(names)
            if table is not None:
                tables.append(table)

        constraints = []
        raw_constraints = doc["constraints"]
        if not isinstance(raw_constraints, list):
            self.error("constraints", "expected a list")
            raw_constraints = []
        seen: set[str] = set()
        for i, obj in enumerate(raw_constraints):
            fk = self.constraint(obj, f"constraints[{i}]", index)
            if fk is None:
                continue
            if fk.name in seen:
                self.error(f"constraints[{i}]", f"duplicate constraint {fk.name}")
                continue
            seen.add(fk.name)
            constraints.append(fk)

        if self.diags:
            raise SchemaLoadError(self.diags)
        return RelationalSchema(tables, constraints)


def load_json(text: str | bytes) -> RelationalSchema:
    return _Loader().load(text)
