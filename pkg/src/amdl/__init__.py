"""Abstract data models: entity references and multivalued references over
relational tables, with a DSL, a compiler to relational schemas, a lifter
back to abstract form, and emitters for SQL, hierarchy text, dot and JSON."""

from amdl.compiler import (
    CompileError,
    KeyClosure,
    canonicalize,
    compile_model,
    resolve_key_closure,
    synthesize_fk_columns,
)
from amdl.dsl import ParseDiagnostic, ParseError, SourceSpan, format_model, parse_model
from amdl.emit import (
    HierarchyDoc,
    SchemaLoadError,
    emit_graph,
    emit_hierarchy,
    emit_json,
    emit_sql,
    load_json,
)
from amdl.lift import LiftReport, lift_schema
from amdl.model import (
    AbstractModel,
    AbstractTable,
    AttributeClassification,
    ClassificationError,
    Column,
    Defining,
    Diagnostic,
    Entity,
    EntityReference,
    ForeignKeyConstraint,
    Multivalued,
    MultivaluedChild,
    Neither,
    PlainAttribute,
    ReferenceGraph,
    RelationalSchema,
    RelationalTable,
    Repeating,
    SchemaError,
    build_reference_graph,
    classify_table,
    entity_references_of,
    is_redundant_entity_reference,
    is_simple_fk,
    multivalued_references_of,
    tables_required,
    validate_model,
)
from amdl.corpus import corpus_path, load_corpus_model

__version__ = "0.1.0"
