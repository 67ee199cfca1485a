"""The command-line surface: exit codes, output shapes, and the records format."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teijournal import cli
from teijournal.cli import ExitStatus, main, read_records, write_records

from support import article_bytes, write_corpus

BROKEN_BODY = (
    '<div type="section"><head>One</head>'
    '<p>See <ref type="bibr" target="#b9">gone</ref>.</p></div>'
)


def clean_file(tmp_path, name="alpha.xml", **kwargs):
    kwargs.setdefault("title", "Alpha Study")
    path = tmp_path / name
    path.write_bytes(article_bytes(**kwargs))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestRecordsFormat:
    def test_escaping_round_trip_examples(self):
        records = [("a", "b\tc", "d\ne", "f\\g", "h\ri")]
        text = write_records(records)
        assert "\t".join(["a", "b\\tc", "d\\ne", "f\\\\g", "h\\ri"]) + "\n" == text
        assert read_records(text) == records

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.tuples(*[st.text(max_size=20)] * 5), max_size=6))
    def test_round_trip_property(self, records):
        assert read_records(write_records(records)) == records

    def test_wrong_arity_rejected(self):
        with pytest.raises(ValueError, match="5 fields"):
            write_records([("only", "four", "fields", "here")])
        with pytest.raises(ValueError, match="malformed"):
            read_records("a\tb\n")


class TestValidate:
    def test_clean_file(self, tmp_path, capsys):
        path = clean_file(tmp_path)
        code, out, err = run(capsys, ["validate", path])
        assert code == ExitStatus.OK
        assert out == f"{path}: ok\n"
        assert err == ""

    def test_error_findings_as_records(self, tmp_path, capsys):
        path = clean_file(tmp_path, "broken.xml", body=BROKEN_BODY)
        code, out, _ = run(capsys, ["validate", path, "--format", "records"])
        assert code == ExitStatus.FINDINGS
        (record,) = read_records(out)
        assert record == (
            "error",
            path,
            "TEI[1]/text[1]/body[1]/div[1]/p[1]/ref[1]",
            "R9",
            "reference target '#b9' matches no reference-list entry",
        )

    def test_warning_findings_exit_zero(self, tmp_path, capsys):
        path = clean_file(tmp_path, keywords=())
        code, out, _ = run(capsys, ["validate", path])
        assert code == ExitStatus.OK
        assert "[R11/warning]" in out

    def test_unreadable_file(self, tmp_path, capsys):
        code, _, err = run(capsys, ["validate", str(tmp_path / "missing.xml")])
        assert code == ExitStatus.FAILURE
        assert "cannot read" in err

    def test_unparseable_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.xml"
        bad.write_bytes(b"<TEI unclosed")
        good = clean_file(tmp_path)
        code, out, err = run(capsys, ["validate", str(bad), good])
        assert code == ExitStatus.FAILURE  # parse failure dominates
        assert "cannot parse" in err
        assert f"{good}: ok" in out  # the good file is still checked

    def test_config_override_downgrades(self, tmp_path, capsys):
        path = clean_file(tmp_path, "broken.xml", body=BROKEN_BODY)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"severity_overrides": {"R9": "warning"}}))
        code, out, _ = run(capsys, ["validate", path, "--config", str(cfg)])
        assert code == ExitStatus.OK
        assert "[R9/warning]" in out

    def test_env_config_and_flag_precedence(self, tmp_path, capsys, monkeypatch):
        path = clean_file(tmp_path, "broken.xml", body=BROKEN_BODY)
        env_cfg = tmp_path / "env.json"
        env_cfg.write_text(json.dumps({"severity_overrides": {"R9": "warning"}}))
        flag_cfg = tmp_path / "flag.json"
        flag_cfg.write_text(json.dumps({}))
        monkeypatch.setenv("TJ_CONFIG", str(env_cfg))
        code, _, _ = run(capsys, ["validate", path])
        assert code == ExitStatus.OK  # env config applied
        code, _, _ = run(capsys, ["validate", path, "--config", str(flag_cfg)])
        assert code == ExitStatus.FINDINGS  # flag beats environment

    def test_bad_config_rejected(self, tmp_path, capsys):
        path = clean_file(tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"vocabulary": ["lab"]}))
        code, _, err = run(capsys, ["validate", path, "--config", str(cfg)])
        assert code == ExitStatus.FAILURE
        assert "unknown keys: vocabulary" in err
        cfg.write_text("not json")
        assert run(capsys, ["validate", path, "--config", str(cfg)])[0] == 2
        cfg.write_text(json.dumps(["a", "list"]))
        assert run(capsys, ["validate", path, "--config", str(cfg)])[0] == 2


@pytest.fixture
def schema_corpus(tmp_path):
    directory = tmp_path / "docs"
    write_corpus(
        directory,
        {
            "one.xml": b'<d><hi rend="italics">a</hi><hi rend="italic">b</hi></d>',
            "two.xml": b'<d><hi rend="italic">c</hi></d>',
        },
    )
    return directory


class TestSchemaLifecycle:
    def test_codify_writes_stable_schema(self, schema_corpus, tmp_path, capsys):
        out = tmp_path / "schema.json"
        code, text, _ = run(
            capsys, ["codify", str(schema_corpus), "--out", str(out)]
        )
        assert code == ExitStatus.OK
        assert text.startswith("codified 2 documents: ")
        assert "root 'd'" in text
        first = out.read_bytes()
        run(capsys, ["codify", str(schema_corpus), "--out", str(out)])
        assert out.read_bytes() == first

    def test_codify_empty_dir(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code, _, err = run(capsys, ["codify", str(empty), "--out", str(tmp_path / "s.json")])
        assert code == ExitStatus.FAILURE
        assert "no parseable documents" in err

    def test_codify_bad_cap(self, schema_corpus, tmp_path, capsys):
        code, _, err = run(
            capsys,
            ["codify", str(schema_corpus), "--out", str(tmp_path / "s.json"), "--cap", "0"],
        )
        assert code == ExitStatus.FAILURE
        assert "enumeration_cap" in err

    def test_schema_validate_closure(self, schema_corpus, tmp_path, capsys):
        out = tmp_path / "schema.json"
        run(capsys, ["codify", str(schema_corpus), "--out", str(out)])
        files = sorted(str(p) for p in schema_corpus.glob("*.xml"))
        code, text, _ = run(
            capsys, ["schema-validate", *files, "--schema", str(out), "--no-base"]
        )
        assert code == ExitStatus.OK
        assert text.count(": ok") == 2

    def test_schema_validate_downgrade_via_base(self, schema_corpus, tmp_path, capsys):
        narrow = tmp_path / "narrow.json"
        run(capsys, ["codify", str(schema_corpus), "--out", str(narrow)])
        wider_dir = tmp_path / "wider"
        write_corpus(
            wider_dir,
            {
                "one.xml": (schema_corpus / "one.xml").read_bytes(),
                "three.xml": b'<d><hi rend="bold">z</hi></d>',
            },
        )
        base = tmp_path / "base.json"
        run(capsys, ["codify", str(wider_dir), "--out", str(base)])
        novel = tmp_path / "novel.xml"
        novel.write_bytes(b'<d><hi rend="bold">n</hi></d>')
        code, _, _ = run(
            capsys,
            ["schema-validate", str(novel), "--schema", str(narrow), "--no-base"],
        )
        assert code == ExitStatus.FINDINGS
        code, out, _ = run(
            capsys,
            [
                "schema-validate",
                str(novel),
                "--schema",
                str(narrow),
                "--base",
                str(base),
            ],
        )
        assert code == ExitStatus.OK
        assert "[S-value/warning]" in out

    def test_schema_validate_unparseable(self, tmp_path, capsys):
        schema = tmp_path / "s.json"
        schema.write_text('{"root": "d", "elements": {"d": {}}}')
        bad = tmp_path / "bad.xml"
        bad.write_bytes(b"<d")
        code, _, err = run(capsys, ["schema-validate", str(bad), "--schema", str(schema)])
        assert code == ExitStatus.FAILURE
        assert "cannot parse" in err

    def test_variants_listing(self, schema_corpus, capsys):
        code, out, _ = run(capsys, ["variants", str(schema_corpus)])
        assert code == ExitStatus.OK
        assert out == "hi @rend ~italic: italic (2), italics (1)\n"

    def test_variants_none(self, tmp_path, capsys):
        directory = tmp_path / "plain"
        write_corpus(directory, {"one.xml": b'<d><hi rend="italic">a</hi></d>'})
        code, out, _ = run(capsys, ["variants", str(directory)])
        assert code == ExitStatus.OK
        assert out == "no variant clusters\n"


class TestArbitrate:
    def rules_file(self, tmp_path, text="hi rend italics -> italic\n"):
        rules = tmp_path / "rules.txt"
        rules.write_text(text)
        return str(rules)

    def test_out_dir_rewrite(self, schema_corpus, tmp_path, capsys):
        out_dir = tmp_path / "fixed"
        code, out, _ = run(
            capsys,
            [
                "arbitrate",
                str(schema_corpus),
                "--rules",
                self.rules_file(tmp_path),
                "--out-dir",
                str(out_dir),
            ],
        )
        assert code == ExitStatus.OK
        assert out == "1 attribute values rewritten across 2 documents\n"
        assert b"italics" not in (out_dir / "one.xml").read_bytes()
        assert (out_dir / "two.xml").read_bytes() == (
            schema_corpus / "two.xml"
        ).read_bytes()
        # inputs untouched
        assert b"italics" in (schema_corpus / "one.xml").read_bytes()

    def test_in_place_rewrite(self, schema_corpus, tmp_path, capsys):
        before_two = (schema_corpus / "two.xml").read_bytes()
        code, _, _ = run(
            capsys,
            [
                "arbitrate",
                str(schema_corpus),
                "--rules",
                self.rules_file(tmp_path),
                "--in-place",
            ],
        )
        assert code == ExitStatus.OK
        assert b"italics" not in (schema_corpus / "one.xml").read_bytes()
        assert (schema_corpus / "two.xml").read_bytes() == before_two

    def test_conflict_aborts_without_writing(self, schema_corpus, tmp_path, capsys):
        before = {p.name: p.read_bytes() for p in schema_corpus.glob("*.xml")}
        rules = self.rules_file(
            tmp_path, "hi rend italics -> italic\nhi rend italics -> i\n"
        )
        code, _, err = run(
            capsys,
            ["arbitrate", str(schema_corpus), "--rules", rules, "--in-place"],
        )
        assert code == ExitStatus.FAILURE
        assert (
            "teijournal: conflicting rules for ('hi', 'rend', 'italics'): "
            "'italic' vs 'i'" in err
        )
        assert {p.name: p.read_bytes() for p in schema_corpus.glob("*.xml")} == before

    def test_bad_rules_file(self, schema_corpus, tmp_path, capsys):
        rules = self.rules_file(tmp_path, "hi rend italics italic\n")
        code, _, err = run(
            capsys,
            ["arbitrate", str(schema_corpus), "--rules", rules, "--in-place"],
        )
        assert code == ExitStatus.FAILURE
        assert "bad rules file" in err

    def test_missing_rules_file(self, schema_corpus, tmp_path, capsys):
        code, _, err = run(
            capsys,
            [
                "arbitrate",
                str(schema_corpus),
                "--rules",
                str(tmp_path / "absent.txt"),
                "--in-place",
            ],
        )
        assert code == ExitStatus.FAILURE
        assert "cannot read rules" in err

    def test_target_flag_required(self, schema_corpus, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(
                [
                    "arbitrate",
                    str(schema_corpus),
                    "--rules",
                    self.rules_file(tmp_path),
                ]
            )
        assert exc.value.code == 2


class TestRender:
    def test_xhtml_to_stdout(self, tmp_path, capsys):
        path = clean_file(tmp_path)
        code, out, _ = run(capsys, ["render", path])
        assert code == ExitStatus.OK
        assert out.startswith('<?xml version="1.0" encoding="UTF-8"?>')
        assert "tj-title" in out and "Alpha Study" in out

    def test_text_output_and_determinism(self, tmp_path, capsys):
        path = clean_file(tmp_path)
        code, first, _ = run(capsys, ["render", path, "--to", "text"])
        assert code == ExitStatus.OK
        assert first.splitlines()[0] == "Alpha Study"
        assert first.splitlines()[1] == "=" * len("Alpha Study")
        _, second, _ = run(capsys, ["render", path, "--to", "text"])
        assert second == first

    def test_out_file(self, tmp_path, capsys):
        path = clean_file(tmp_path)
        target = tmp_path / "page.xhtml"
        code, out, _ = run(capsys, ["render", path, "--out", str(target)])
        assert code == ExitStatus.OK
        assert out == ""
        assert target.read_text(encoding="utf-8").startswith("<?xml")

    def test_bad_style(self, tmp_path, capsys):
        path = clean_file(tmp_path)
        code, _, err = run(capsys, ["render", path, "--style", "nostyle"])
        assert code == ExitStatus.FAILURE
        assert "cannot load style" in err

    def test_unparseable_article(self, tmp_path, capsys):
        bad = tmp_path / "bad.xml"
        bad.write_bytes(b"prose")
        code, _, err = run(capsys, ["render", str(bad)])
        assert code == ExitStatus.FAILURE
        assert "cannot parse" in err


@pytest.fixture
def product_corpus(tmp_path):
    directory = tmp_path / "corpus"
    ref = (
        '<biblStruct type="book" xml:id="b1"><monogr>'
        "<author><persName><forename>Bertolt</forename><surname>Brecht</surname></persName></author>"
        '<title level="m" type="main">Stories</title>'
        '<imprint><publisher>P</publisher><date when="1981"/></imprint></monogr>'
        '<idno type="DOI">10.1000/stories</idno></biblStruct>'
    )
    write_corpus(
        directory,
        {
            "alpha.xml": article_bytes(
                title="Alpha Study",
                doi="10.1/alpha",
                body='<div type="section"><head>One</head>'
                "<p><persName>Ada Lovelace</persName> in <placeName>London</placeName>.</p></div>",
                refs=ref,
            ),
            "beta.xml": article_bytes(
                title="Beta Study",
                doi="10.1/beta",
                surname="Smith",
                forename="Jane",
                date="2010-06-15",
                changes='<change when="2010-07-01">Correction: fixed legend</change>',
                refs=ref,
            ),
        },
    )
    return directory


class TestCorpusProducts:
    def test_index_records(self, product_corpus, capsys):
        code, out, _ = run(
            capsys,
            ["index", str(product_corpus), "--kinds", "person,place", "--format", "records"],
        )
        assert code == ExitStatus.OK
        records = read_records(out)
        assert ("person", "10.1/alpha") in {(r[0], r[1]) for r in records}
        assert {r[0] for r in records} == {"person", "place"}

    def test_index_xhtml_default(self, product_corpus, capsys):
        code, out, _ = run(capsys, ["index", str(product_corpus)])
        assert code == ExitStatus.OK
        assert "tj-index" in out and "Ada Lovelace" in out

    def test_index_bad_kind(self, product_corpus, capsys):
        code, _, err = run(
            capsys, ["index", str(product_corpus), "--kinds", "colour"]
        )
        assert code == ExitStatus.FAILURE
        assert "unknown index kinds: colour" in err

    def test_biblio_records(self, product_corpus, capsys):
        code, out, _ = run(
            capsys, ["biblio", str(product_corpus), "--format", "records"]
        )
        assert code == ExitStatus.OK
        (record,) = read_records(out)
        assert record[0] == "biblio"
        assert record[1] == "10.1/alpha,10.1/beta"
        assert record[3] == "doi/10.1000/stories"
        assert record[4] == (
            "Brecht, Bertolt. Stories. P, 1981. https://doi.org/10.1000/stories."
        )

    def test_corrigenda_records(self, product_corpus, capsys):
        code, out, _ = run(
            capsys, ["corrigenda", str(product_corpus), "--format", "records"]
        )
        assert code == ExitStatus.OK
        (record,) = read_records(out)
        assert record == (
            "corrigendum",
            "10.1/beta",
            "",
            "2010-07-01",
            "Correction: fixed legend",
        )

    def test_query_records_default_format(self, product_corpus, capsys):
        code, out, _ = run(
            capsys, ["query", str(product_corpus), "--in", "person-mention"]
        )
        assert code == ExitStatus.OK
        (record,) = read_records(out)
        assert record[0] == "hit"
        assert record[1] == "10.1/alpha"
        assert record[3] == ""  # hits carry no code
        assert record[4] == "Ada Lovelace"

    def test_query_date_and_cites(self, product_corpus, capsys):
        code, out, _ = run(
            capsys,
            ["query", str(product_corpus), "--in", "any", "--from", "2010-01-01"],
        )
        assert code == ExitStatus.OK
        assert all(r[1] == "10.1/beta" for r in read_records(out))
        code, out, _ = run(
            capsys,
            ["query", str(product_corpus), "--in", "any", "--cites-surname", "Brecht"],
        )
        assert {r[1] for r in read_records(out)} == {"10.1/alpha", "10.1/beta"}

    def test_query_bad_date(self, product_corpus, capsys):
        code, _, err = run(
            capsys, ["query", str(product_corpus), "--in", "any", "--from", "wrong"]
        )
        assert code == ExitStatus.FAILURE
        assert "bad --from date 'wrong'" in err

    def test_query_needs_a_filter(self, product_corpus, capsys):
        code, _, err = run(capsys, ["query", str(product_corpus)])
        assert code == ExitStatus.FAILURE
        assert "at least one filter" in err

    def test_query_xhtml_format(self, product_corpus, capsys):
        code, out, _ = run(
            capsys,
            ["query", str(product_corpus), "--in", "person-mention", "--format", "xhtml"],
        )
        assert code == ExitStatus.OK
        assert "tj-query" in out and "Ada Lovelace" in out

    def test_malformed_corpus_member_skipped(self, product_corpus, capsys):
        (product_corpus / "junk.xml").write_bytes(b"no xml here")
        code, out, err = run(capsys, ["index", str(product_corpus)])
        assert code == ExitStatus.OK
        assert "skipping junk" in err
        assert "Ada Lovelace" in out

    def test_not_a_directory(self, tmp_path, capsys):
        code, _, err = run(capsys, ["index", str(tmp_path / "nope")])
        assert code == ExitStatus.FAILURE
        assert "not a directory" in err


class TestExplain:
    def test_known_rule(self, capsys):
        code, out, _ = run(capsys, ["explain", "R9"])
        assert code == ExitStatus.OK
        assert out.startswith("R9 (error): ")
        assert len(out.rstrip("\n").split("\n")) == 2

    def test_unknown_rule(self, capsys):
        code, _, err = run(capsys, ["explain", "R0"])
        assert code == ExitStatus.FAILURE
        assert "unknown rule" in err


class TestParser:
    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_bad_query_kind_choice(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["query", str(tmp_path), "--in", "chapter"])
        assert exc.value.code == 2

    def test_console_entry_point_exists(self):
        assert callable(cli.main)
        assert int(ExitStatus.OK) == 0
        assert int(ExitStatus.FINDINGS) == 1
        assert int(ExitStatus.FAILURE) == 2
