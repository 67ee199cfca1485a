"""The ``teijournal`` command: one binary, one subcommand per pipeline stage.

Validation, schema evolution (codify / variants / arbitrate), rendering, and
the corpus products each get a subcommand so the stages can run at different
times over the same files.  All output is deterministic and sorted; the only
subcommand that ever writes to its inputs is ``arbitrate --in-place``.

Exit codes: 0 success, 1 error-severity findings (validate and
schema-validate only), 2 usage, I/O, or format problems.

Machine-readable output (``--format records``) is line-delimited UTF-8 text
with five tab-separated fields — kind, file, path, code, message — written
by :func:`write_records` and read back by :func:`read_records`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import xml.etree.ElementTree as ET
from enum import IntEnum
from pathlib import Path

from . import corpus as corpus_ops
from .model import CalendarDate
from .rawxml import RawXmlError, parse_raw
from .render import (
    BUILTIN_STYLES,
    StyleError,
    get_style,
    render_plaintext,
    render_xhtml,
)
from .schema import (
    CodifyOptions,
    arbitrate,
    codify,
    detect_variants,
    load_base_schema,
    parse_rules,
    profile_corpus,
    schema_from_json,
    schema_to_json,
    validate_against,
)
from .validator import ValidatorConfig, explain, validate
from .xmlio import parse_article


class ExitStatus(IntEnum):
    OK = 0
    FINDINGS = 1
    FAILURE = 2


class CliError(Exception):
    """Anything that should stop the command with exit status 2."""


# --------------------------------------------------------------------------
# Records format
# --------------------------------------------------------------------------

_FIELD_COUNT = 5


def _escape_field(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape_field(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def write_records(records) -> str:
    """Serialize (kind, file, path, code, message) tuples, one per line."""
    lines = []
    for record in records:
        if len(record) != _FIELD_COUNT:
            raise ValueError(f"record needs {_FIELD_COUNT} fields: {record!r}")
        lines.append("\t".join(_escape_field(str(f)) for f in record))
    return "".join(line + "\n" for line in lines)


def read_records(text: str) -> list:
    """Parse :func:`write_records` output back into 5-tuples."""
    records = []
    # Split on newlines only: unicode line separators may appear unescaped
    # inside a field and must not end the record.
    for line in text.split("\n"):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != _FIELD_COUNT:
            raise ValueError(f"malformed record line: {line!r}")
        records.append(tuple(_unescape_field(f) for f in fields))
    return records


# --------------------------------------------------------------------------
# Shared plumbing
# --------------------------------------------------------------------------


def _read_bytes(name: str) -> bytes:
    try:
        with open(name, "rb") as handle:
            return handle.read()
    except OSError as exc:
        raise CliError(f"cannot read {name}: {exc}") from None


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}") from None


def _load_validator_config(args) -> ValidatorConfig:
    path = getattr(args, "config", None) or os.environ.get("TJ_CONFIG")
    if not path:
        return ValidatorConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise CliError(f"config {path} must hold a JSON object")
    allowed = {"org_unit_vocabulary", "doc_type_vocabulary", "severity_overrides"}
    unknown = set(raw) - allowed
    if unknown:
        raise CliError(f"config {path} has unknown keys: {', '.join(sorted(unknown))}")
    kwargs: dict = {}
    for key in ("org_unit_vocabulary", "doc_type_vocabulary"):
        if key in raw:
            kwargs[key] = frozenset(raw[key])
    if "severity_overrides" in raw:
        kwargs["severity_overrides"] = dict(raw["severity_overrides"])
    try:
        return ValidatorConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad config {path}: {exc}") from None


def _xml_files(directory: str) -> list:
    root = Path(directory)
    if not root.is_dir():
        raise CliError(f"not a directory: {directory}")
    return sorted(str(p) for p in root.glob("*.xml"))


def _load_raw_dir(directory: str) -> list:
    """(name, RawDocument) pairs for each parseable file; notes the rest."""
    docs = []
    for name in _xml_files(directory):
        try:
            docs.append((name, parse_raw(_read_bytes(name))))
        except RawXmlError as exc:
            print(f"skipping {name}: {exc}", file=sys.stderr)
    return docs


def _load_corpus_dir(directory: str) -> corpus_ops.Corpus:
    corpus = corpus_ops.load_corpus(_xml_files(directory))
    for key, report in sorted(corpus.load_reports.items()):
        if not report.ok:
            for issue in report.errors():
                print(f"skipping {key}: {issue.message}", file=sys.stderr)
    return corpus


def _load_schema_file(path: str):
    try:
        return schema_from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load schema {path}: {exc}") from None


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_validate(args) -> int:
    config = _load_validator_config(args)
    failed = False
    any_error_finding = False
    records = []
    for name in args.files:
        data = _read_bytes(name)
        report = parse_article(data, name)
        if not report.ok:
            failed = True
            for issue in report.errors():
                print(f"{name}: cannot parse: {issue.message}", file=sys.stderr)
            continue
        if args.format == "text":
            for issue in report.warnings():
                print(f"{name}: parse warning at {issue.location}: {issue.message}")
        findings = validate(report.outcome, config)
        any_error_finding = any_error_finding or any(
            f.severity == "error" for f in findings
        )
        if args.format == "records":
            records.extend(
                (f.severity, name, f.location, f.rule_id, f.message) for f in findings
            )
        else:
            for f in findings:
                print(f"{name}: [{f.rule_id}/{f.severity}] {f.location}: {f.message}")
            if not findings:
                print(f"{name}: ok")
    if args.format == "records":
        sys.stdout.write(write_records(records))
    if failed:
        return ExitStatus.FAILURE
    return ExitStatus.FINDINGS if any_error_finding else ExitStatus.OK


def cmd_schema_validate(args) -> int:
    schema = _load_schema_file(args.schema)
    if args.no_base:
        base = None
    elif args.base:
        base = _load_schema_file(args.base)
    else:
        base = load_base_schema()
    failed = False
    any_error_finding = False
    records = []
    for name in args.files:
        data = _read_bytes(name)
        try:
            doc = parse_raw(data)
        except RawXmlError as exc:
            failed = True
            print(f"{name}: cannot parse: {exc}", file=sys.stderr)
            continue
        findings = validate_against(schema, doc, base)
        any_error_finding = any_error_finding or any(
            f.severity == "error" for f in findings
        )
        if args.format == "records":
            records.extend(
                (f.severity, name, f.location, f.rule_id, f.message) for f in findings
            )
        else:
            for f in findings:
                print(f"{name}: [{f.rule_id}/{f.severity}] {f.location}: {f.message}")
            if not findings:
                print(f"{name}: ok")
    if args.format == "records":
        sys.stdout.write(write_records(records))
    if failed:
        return ExitStatus.FAILURE
    return ExitStatus.FINDINGS if any_error_finding else ExitStatus.OK


def _codify_options(args) -> CodifyOptions:
    kwargs: dict = {}
    if args.enumerable is not None:
        kwargs["enumerable_attributes"] = frozenset(
            token for token in args.enumerable.split(",") if token
        )
    if args.cap is not None:
        kwargs["enumeration_cap"] = args.cap
    try:
        return CodifyOptions(**kwargs)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def cmd_codify(args) -> int:
    docs = _load_raw_dir(args.dir)
    if not docs:
        raise CliError(f"no parseable documents in {args.dir}")
    schema = codify(profile_corpus(d for _, d in docs), _codify_options(args))
    _write_text(args.out, schema_to_json(schema))
    attr_count = sum(len(rule.attributes) for rule in schema.elements.values())
    print(
        f"codified {len(docs)} documents: {len(schema.elements)} elements, "
        f"{attr_count} attributes, root {schema.root!r}"
    )
    return ExitStatus.OK


def cmd_variants(args) -> int:
    docs = _load_raw_dir(args.dir)
    clusters = detect_variants(profile_corpus(d for _, d in docs))
    for cluster in clusters:
        members = ", ".join(f"{value} ({count})" for value, count in cluster.members)
        print(f"{cluster.element} @{cluster.attribute} ~{cluster.key}: {members}")
    if not clusters:
        print("no variant clusters")
    return ExitStatus.OK


def cmd_arbitrate(args) -> int:
    try:
        rules = parse_rules(Path(args.rules).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read rules {args.rules}: {exc}") from None
    except ValueError as exc:
        raise CliError(f"bad rules file: {exc}") from None
    named = _load_raw_dir(args.dir)
    try:
        rewritten, changes = arbitrate([doc for _, doc in named], rules)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.in_place:
        for (name, old), new in zip(named, rewritten):
            if new.data != old.data:
                Path(name).write_bytes(new.data)
    else:
        out_root = Path(args.out_dir)
        out_root.mkdir(parents=True, exist_ok=True)
        for (name, _), new in zip(named, rewritten):
            (out_root / Path(name).name).write_bytes(new.data)
    print(f"{changes} attribute values rewritten across {len(named)} documents")
    return ExitStatus.OK


def cmd_render(args) -> int:
    try:
        style = get_style(args.style)
    except (StyleError, OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load style {args.style!r}: {exc}") from None
    report = parse_article(_read_bytes(args.file), args.file)
    if not report.ok:
        details = "; ".join(i.message for i in report.errors())
        raise CliError(f"cannot parse {args.file}: {details}")
    if args.to == "xhtml":
        output = render_xhtml(report.outcome, style)
    else:
        output = render_plaintext(report.outcome, style)
    _write_text(args.out, output)
    return ExitStatus.OK


def cmd_index(args) -> int:
    corpus = _load_corpus_dir(args.dir)
    kinds = None
    if args.kinds is not None:
        kinds = {token for token in args.kinds.split(",") if token}
    try:
        entries = corpus_ops.build_indexes(corpus, kinds)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.format == "records":
        sys.stdout.write(write_records(corpus_ops.index_records(entries)))
    else:
        sys.stdout.write(corpus_ops.index_xhtml(entries))
    return ExitStatus.OK


def _style_arg(args):
    try:
        return get_style(args.style)
    except (StyleError, OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load style {args.style!r}: {exc}") from None


def cmd_biblio(args) -> int:
    corpus = _load_corpus_dir(args.dir)
    items = corpus_ops.unified_bibliography(corpus)
    style = _style_arg(args)
    if args.format == "records":
        sys.stdout.write(write_records(corpus_ops.biblio_records(items, style)))
    else:
        sys.stdout.write(corpus_ops.unified_bibliography_xhtml(items, style))
    return ExitStatus.OK


def cmd_corrigenda(args) -> int:
    corpus = _load_corpus_dir(args.dir)
    entries = corpus_ops.corrigenda(corpus, kind=args.kind)
    if args.format == "records":
        sys.stdout.write(write_records(corpus_ops.corrigenda_records(entries)))
    else:
        sys.stdout.write(corpus_ops.corrigenda_xhtml(entries))
    return ExitStatus.OK


def _parse_date(raw: str | None, flag: str) -> CalendarDate | None:
    if raw is None:
        return None
    try:
        return CalendarDate.parse(raw)
    except ValueError as exc:
        raise CliError(f"bad {flag} date {raw!r}: {exc}") from None


def _query_xhtml(hits) -> str:
    html = ET.Element("html", {"xmlns": "http://www.w3.org/1999/xhtml"})
    head = ET.SubElement(html, "head")
    ET.SubElement(head, "title").text = "Query results"
    body = ET.SubElement(html, "body")
    ET.SubElement(body, "h1").text = "Query results"
    listing = ET.SubElement(ET.SubElement(body, "div", {"class": "tj-query"}), "ul")
    for doc_id, path, snippet in hits:
        ET.SubElement(listing, "li").text = f"{doc_id}:{path} — {snippet}"
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(
        html, encoding="unicode"
    ) + "\n"


def cmd_query(args) -> int:
    corpus = _load_corpus_dir(args.dir)
    try:
        q = corpus_ops.Query(
            element_kind=args.element_kind,
            text=args.text,
            date_from=_parse_date(args.date_from, "--from"),
            date_to=_parse_date(args.date_to, "--to"),
            cites_author_surname=args.cites_surname,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    hits = corpus_ops.query(corpus, q)
    if args.format == "records":
        sys.stdout.write(write_records(corpus_ops.query_records(hits)))
    else:
        sys.stdout.write(_query_xhtml(hits))
    return ExitStatus.OK


def cmd_explain(args) -> int:
    try:
        print(explain(args.rule))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return ExitStatus.OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teijournal",
        description="Validate, evolve, and publish TEI-encoded journal articles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check articles against rules R1-R12")
    p.add_argument("files", nargs="+")
    p.add_argument("--config", help="validator config JSON (default: $TJ_CONFIG)")
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "schema-validate", help="check raw documents against a restricted schema"
    )
    p.add_argument("files", nargs="+")
    p.add_argument("--schema", required=True, help="restricted schema JSON")
    p.add_argument("--base", help="base schema for downgrades (default: built-in)")
    p.add_argument(
        "--no-base", action="store_true", help="disable base-schema downgrades"
    )
    p.add_argument("--format", choices=("text", "records"), default="text")
    p.set_defaults(func=cmd_schema_validate)

    p = sub.add_parser("codify", help="infer a restricted schema from a corpus")
    p.add_argument("dir")
    p.add_argument("--out", required=True, help="schema file to write")
    p.add_argument("--enumerable", help="comma-separated enumerable attributes")
    p.add_argument("--cap", type=int, help="max distinct values for a closed list")
    p.set_defaults(func=cmd_codify)

    p = sub.add_parser("variants", help="list competing attribute-value spellings")
    p.add_argument("dir")
    p.set_defaults(func=cmd_variants)

    p = sub.add_parser("arbitrate", help="rewrite attribute values corpus-wide")
    p.add_argument("dir")
    p.add_argument("--rules", required=True, help="rewrite rules file")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--in-place", action="store_true")
    target.add_argument("--out-dir", help="write rewritten copies here")
    p.set_defaults(func=cmd_arbitrate)

    p = sub.add_parser("render", help="render one article")
    p.add_argument("file")
    p.add_argument(
        "--style",
        default="chicago",
        help=f"one of {', '.join(BUILTIN_STYLES)}, or a style JSON path",
    )
    p.add_argument("--to", choices=("xhtml", "text"), default="xhtml")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("index", help="build mention indexes over a corpus")
    p.add_argument("dir")
    p.add_argument("--kinds", help="comma-separated subset of the seven kinds")
    p.add_argument("--format", choices=("xhtml", "records"), default="xhtml")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("biblio", help="build the unified bibliography")
    p.add_argument("dir")
    p.add_argument("--style", default="chicago")
    p.add_argument("--format", choices=("xhtml", "records"), default="xhtml")
    p.set_defaults(func=cmd_biblio)

    p = sub.add_parser("corrigenda", help="collect published corrections")
    p.add_argument("dir")
    p.add_argument("--kind", default="correction", help="revision change kind")
    p.add_argument("--format", choices=("xhtml", "records"), default="xhtml")
    p.set_defaults(func=cmd_corrigenda)

    p = sub.add_parser("query", help="structural search across a corpus")
    p.add_argument("dir")
    p.add_argument("--in", dest="element_kind", choices=corpus_ops.QUERY_KINDS)
    p.add_argument("--text", help="casefolded substring to find")
    p.add_argument("--from", dest="date_from", help="earliest publication date")
    p.add_argument("--to", dest="date_to", help="latest publication date")
    p.add_argument("--cites-surname", help="require a cited author surname")
    p.add_argument("--format", choices=("xhtml", "records"), default="records")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("explain", help="describe one validator rule")
    p.add_argument("rule", help="rule id, e.g. R9")
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except CliError as exc:
        print(f"teijournal: {exc}", file=sys.stderr)
        return int(ExitStatus.FAILURE)


if __name__ == "__main__":
    sys.exit(main())
