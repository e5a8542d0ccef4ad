import json
import random
import subprocess
import sys

import pytest

from amdl import compile_model, emit_json, format_model, load_corpus_model
from amdl.cli import main
from amdl.corpus import corpus_path


def run(capsys, *argv):
    status = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return status, out, err


# --- check ------------------------------------------------------------------------


def test_check_biology(capsys):
    assert run(capsys, "check", corpus_path("biology")) == (0, "", "")


def test_check_empty(capsys):
    assert run(capsys, "check", corpus_path("empty")) == (0, "", "")


def test_check_key_cycle(capsys):
    path = corpus_path("key_cycle")
    status, out, err = run(capsys, "check", path)
    assert status == 1 and out == ""
    assert err == f"{path}:5:3: error: key-closure cycle X→Y→X\n"


def test_check_missing_file(capsys, tmp_path):
    status, out, err = run(capsys, "check", tmp_path / "nope.amdl")
    assert status == 2 and out == ""
    assert "cannot read" in err


def test_check_reports_every_diagnostic(capsys, tmp_path):
    path = tmp_path / "bad.amdl"
    path.write_text("entity X {\n  key a: text\n  r -> Q\n  s -> Q\n}\n")
    status, _, err = run(capsys, "check", path)
    assert status == 1
    assert err.splitlines() == [
        f"{path}:3:3: error: unknown entity table Q",
        f"{path}:4:3: error: unknown entity table Q",
    ]


# --- compile ----------------------------------------------------------------------


def test_compile_biology_json(capsys):
    status, out, err = run(capsys, "compile", corpus_path("biology"), "--to", "json")
    assert status == 0 and err == ""
    doc = json.loads(out)
    assert len(doc["tables"]) == 5 and len(doc["constraints"]) == 4
    assert out.endswith("}\n")


def test_compile_biology_sql_to_file(capsys, tmp_path):
    target = tmp_path / "bio.sql"
    status, out, _ = run(capsys, "compile", corpus_path("biology"), "--to", "sql", "--out", target)
    assert status == 0 and out == ""
    assert target.read_bytes().startswith(b"CREATE TABLE O (\n")


def test_compile_empty_sql(capsys):
    assert run(capsys, "compile", corpus_path("empty"), "--to", "sql") == (0, "", "")


def test_compile_failure_writes_nothing(capsys, tmp_path):
    target = tmp_path / "out.sql"
    status, out, err = run(
        capsys, "compile", corpus_path("key_cycle"), "--to", "sql", "--out", target
    )
    assert status == 1 and out == "" and err
    assert not target.exists()


def test_compile_requires_target(capsys):
    with pytest.raises(SystemExit) as info:
        main(["compile", str(corpus_path("biology"))])
    assert info.value.code == 2


def test_compile_unwritable_output(capsys, tmp_path):
    status, _, err = run(
        capsys, "compile", corpus_path("biology"), "--to", "sql", "--out", tmp_path / "no" / "x"
    )
    assert status == 2 and "cannot write" in err


# --- lift ---------------------------------------------------------------------------


def write_json(tmp_path, schema):
    path = tmp_path / "schema.json"
    path.write_text(emit_json(schema))
    return path


def test_lift_biology_round_trip(capsys, tmp_path):
    biology = load_corpus_model("biology")
    path = write_json(tmp_path, compile_model(biology))
    status, out, err = run(capsys, "lift", path)
    assert status == 0
    assert out == format_model(biology)
    assert err == f"{path}: warning: table T: attached to B via orgs; rejected candidates: O via org\n"


def test_lift_empty(capsys, tmp_path):
    path = tmp_path / "empty.json"
    path.write_text('{"tables":[],"constraints":[]}')
    assert run(capsys, "lift", path) == (0, "", "")


def test_lift_association(capsys, tmp_path):
    path = tmp_path / "assoc.json"
    path.write_text(
        json.dumps(
            {
                "tables": [
                    {"name": "X", "columns": [{"name": "x_id", "domain": "text"}], "primary_key": ["x_id"]},
                    {"name": "Y", "columns": [{"name": "y_id", "domain": "text"}], "primary_key": ["y_id"]},
                    {
                        "name": "A",
                        "columns": [{"name": "x_id", "domain": "text"}, {"name": "y_id", "domain": "text"}],
                        "primary_key": ["x_id", "y_id"],
                    },
                ],
                "constraints": [
                    {"name": "fx", "source_table": "A", "source_columns": ["x_id"], "target_table": "X", "target_columns": ["x_id"]},
                    {"name": "fy", "source_table": "A", "source_columns": ["y_id"], "target_table": "Y", "target_columns": ["y_id"]},
                ],
            }
        )
    )
    status, out, err = run(capsys, "lift", path)
    assert status == 0
    assert "fx: multi A {" in out
    assert err.splitlines() == [
        f"{path}: warning: table A: attached to X via fx; rejected candidates: Y via fy"
    ]


def test_lift_excluded_table_warned(capsys, tmp_path):
    path = tmp_path / "self.json"
    path.write_text(
        '{"tables":[{"name":"X","columns":[{"name":"a","domain":"text"}],"primary_key":["a"]}],'
        '"constraints":[{"name":"f","source_table":"X","source_columns":["a"],'
        '"target_table":"X","target_columns":["a"]}]}'
    )
    status, out, err = run(capsys, "lift", path)
    assert status == 0 and out == ""
    assert err == (
        f"{path}: warning: excluded table X: table X references itself inside its primary key\n"
    )


def test_lift_malformed_json(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    status, out, err = run(capsys, "lift", path)
    assert status == 2 and out == ""
    assert err.startswith(f"{path}: error: 1:2: malformed JSON")


def test_lift_schema_diagnostics(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"tables":[{"name":"X","columns":[],"primary_key":["a"]}],"constraints":[]}')
    status, out, err = run(capsys, "lift", path)
    assert status == 1 and out == "" and err.startswith(f"{path}: error: ")


def test_lift_writes_out_file(capsys, tmp_path):
    path = write_json(tmp_path, compile_model(load_corpus_model("employee")))
    target = tmp_path / "lifted.amdl"
    status, out, _ = run(capsys, "lift", path, "--out", target)
    assert status == 0 and out == ""
    assert target.read_text() == format_model(load_corpus_model("employee"))


# --- hier / graph -------------------------------------------------------------------


def test_hier_biology(capsys):
    status, out, err = run(capsys, "hier", corpus_path("biology"))
    assert status == 0 and err == ""
    assert out.splitlines() == [
        "H(O): *genus*, *species*, cname",
        "H(B): *btname*, orgs(*org[O]*)",
        "H(I): *indname*, images(*imgfile*, notes), biotype[B]",
    ]


def test_hier_empty(capsys):
    assert run(capsys, "hier", corpus_path("empty")) == (0, "", "")


def test_graph_managers(capsys):
    status, out, _ = run(capsys, "graph", corpus_path("managers"))
    assert status == 0
    arcs = [line.strip() for line in out.splitlines() if "->" in line]
    assert arcs == [
        '"E" -> "M" [label="empmgr", style=dashed];',
        '"M" -> "E" [label="mgr", style=solid];',
    ]


def test_hier_and_graph_report_diagnostics(capsys):
    for command in ("hier", "graph"):
        status, out, err = run(capsys, command, corpus_path("key_cycle"))
        assert status == 1 and out == "" and "key-closure cycle" in err


# --- process-level properties ---------------------------------------------------------


def test_repeatable(capsys, tmp_path):
    path = write_json(tmp_path, compile_model(load_corpus_model("biology")))
    commands = [
        ("check", corpus_path("biology")),
        ("compile", corpus_path("cyclic"), "--to", "sql"),
        ("compile", corpus_path("biology"), "--to", "json"),
        ("lift", path),
        ("hier", corpus_path("managers")),
        ("graph", corpus_path("biology")),
    ]
    for argv in commands:
        assert run(capsys, *argv) == run(capsys, *argv)


def test_never_crashes_on_random_files(capsys, tmp_path):
    rng = random.Random(99)
    path = tmp_path / "fuzz"
    biology = corpus_path("biology").read_bytes()
    doc = emit_json(compile_model(load_corpus_model("biology"))).encode()
    for i in range(150):
        seed = biology if i % 2 else doc
        data = bytearray(seed)
        for _ in range(rng.randint(1, 6)):
            data[rng.randrange(len(data))] = rng.randrange(256)
        path.write_bytes(bytes(data))
        for argv in (["check"], ["compile", "--to", "sql"], ["lift"], ["hier"], ["graph"]):
            status = main([argv[0], str(path), *argv[1:]])
            out, err = capsys.readouterr()
            assert status in (0, 1, 2)
            if status == 1:
                assert err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "amdl", "hier", str(corpus_path("managers"))],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout == "H(E): *emp*, empmgr(*mgr[E]*)\n"
