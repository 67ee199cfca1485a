"""Cross-document products over a collection of articles.

A :class:`Corpus` is an immutable id-keyed snapshot of a set of parsed
articles.  Everything derived from it — mention indexes, the unified
bibliography, the corrigenda page, structural query hits — is a pure
function of that snapshot, so products can be rebuilt at any time and two
runs over the same files always agree.

Locators reuse the canonical model paths from
:func:`teijournal.xmlio.iter_model_paths`, so index output, validator
findings, and schema findings all address document parts the same way.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field

from . import model as m
from .render import (
    StyleGuide,
    StyleError,
    bare_entry_text,
    builtin_style,
    format_entry,
)
from .xmlio import Issue, ParseReport, iter_model_paths, parse_article

#: The seven index kinds, in output order.
INDEX_KINDS = (
    "abbreviation",
    "author",
    "keyword",
    "organization",
    "person",
    "place",
    "software",
)

_SOURCE_PREFIX = "TEI[1]/teiHeader[1]/fileDesc[1]/sourceDesc[1]/"


@dataclass(frozen=True)
class Corpus:
    """Parsed articles keyed by document id, plus per-file load reports.

    Files that failed to parse (or were rejected as id duplicates) appear
    in ``load_reports`` under their file-derived key with no article.
    """

    articles: dict = field(default_factory=dict)  # id -> Article
    load_reports: dict = field(default_factory=dict)  # id -> ParseReport
    paths: dict = field(default_factory=dict)  # id -> source path

    def ids(self) -> list:
        return sorted(self.articles)


@dataclass(frozen=True)
class IndexEntry:
    kind: str
    key: str
    display: str
    locators: tuple  # tuple[(article id, model path), ...] deduplicated, sorted


@dataclass(frozen=True)
class CorrigendaEntry:
    article_id: str
    when: m.CalendarDate
    description: str


@dataclass(frozen=True)
class Query:
    """Conjunctive structural search filters; at least one must be set.

    ``element_kind`` restricts which nodes can match (``person-mention``,
    ``org-mention``, ``place-mention``, ``term-mention``, ``abbreviation``,
    or ``any`` for mentions plus paragraph text).  ``text`` is a casefolded
    substring test on the node's text.  The date bounds apply to the
    article's header publication date; ``cites_author_surname`` keeps only
    articles whose reference list names that surname (either level).
    """

    element_kind: str | None = None
    text: str | None = None
    date_from: m.CalendarDate | None = None
    date_to: m.CalendarDate | None = None
    cites_author_surname: str | None = None

    def __post_init__(self) -> None:
        if (
            self.element_kind is None
            and self.text is None
            and self.date_from is None
            and self.date_to is None
            and self.cites_author_surname is None
        ):
            raise ValueError("a query needs at least one filter")
        if self.element_kind is not None and self.element_kind not in QUERY_KINDS:
            raise ValueError(
                f"unknown element kind {self.element_kind!r} (have {', '.join(QUERY_KINDS)})"
            )


QUERY_KINDS = (
    "any",
    "person-mention",
    "org-mention",
    "place-mention",
    "term-mention",
    "abbreviation",
)


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------


def _file_key(path: str) -> str:
    stem = path.replace("\\", "/").rsplit("/", 1)[-1]
    return stem.rsplit(".", 1)[0] if "." in stem else stem


def _free_key(reports: dict, preferred: str, fallback: str) -> str:
    if preferred and preferred not in reports:
        return preferred
    return fallback


def load_corpus(paths) -> Corpus:
    """Parse a list of files into a corpus; never aborts on a bad file.

    A file that cannot be read or parsed contributes only an error report.
    When two files derive the same document id the second is rejected with
    a duplicate-id report and the first is kept.
    """
    articles: dict = {}
    reports: dict = {}
    sources: dict = {}
    for path in paths:
        name = str(path)
        try:
            with open(name, "rb") as handle:
                data = handle.read()
        except OSError as exc:
            key = _free_key(reports, _file_key(name), name)
            reports[key] = ParseReport(
                issues=(Issue("error", "", f"cannot read {name}: {exc}"),)
            )
            continue
        report = parse_article(data, name)
        if not report.ok:
            key = _free_key(reports, _file_key(name), name)
            reports[key] = report
            continue
        article = report.outcome
        if article.id in articles:
            key = _free_key(reports, _file_key(name), name)
            reports[key] = ParseReport(
                issues=(
                    Issue(
                        "error",
                        "",
                        f"duplicate document id {article.id!r}: "
                        f"already loaded from {sources[article.id]}",
                    ),
                )
            )
            continue
        articles[article.id] = article
        reports[article.id] = report
        sources[article.id] = name
    return Corpus(articles=articles, load_reports=reports, paths=sources)


# --------------------------------------------------------------------------
# Indexes
# --------------------------------------------------------------------------


def _author_display(author: m.Author) -> str:
    forenames = " ".join(f for f in author.forenames if f)
    if forenames:
        return f"{author.surname}, {forenames}"
    return author.surname


def _mention_kind_and_text(path: str, node) -> tuple:
    """Classify one walker node for indexing; (None, "") when not indexed."""
    if isinstance(node, m.Author):
        if path.startswith(_SOURCE_PREFIX):
            return "author", _author_display(node)
        return None, ""
    if isinstance(node, m.PersonMention):
        return "person", node.text
    if isinstance(node, m.OrgMention):
        return "organization", node.text
    if isinstance(node, m.PlaceMention):
        return "place", node.text
    if isinstance(node, m.TermMention):
        if node.kind == "software":
            return "software", node.text
        return None, ""
    if isinstance(node, m.AbbrMention):
        return "abbreviation", node.abbr
    if isinstance(node, m.Keyword):
        return "keyword", node.term
    return None, ""


def _norm_key(text: str) -> str:
    return " ".join(text.split()).casefold()


def build_indexes(corpus: Corpus, kinds=None) -> list:
    """Mention indexes grouped by (kind, normalized key).

    Every indexed node contributes exactly one locator; the display form is
    the most frequent original spelling (ties resolved alphabetically).
    Entries come back sorted by kind then key.
    """
    wanted = set(INDEX_KINDS) if kinds is None else set(kinds)
    unknown = wanted - set(INDEX_KINDS)
    if unknown:
        raise ValueError(f"unknown index kinds: {', '.join(sorted(unknown))}")

    displays: dict = {}
    locators: dict = {}
    for doc_id in sorted(corpus.articles):
        article = corpus.articles[doc_id]
        for path, node in iter_model_paths(article):
            kind, raw = _mention_kind_and_text(path, node)
            if kind is None or kind not in wanted:
                continue
            key = _norm_key(raw)
            if not key:
                continue
            group = (kind, key)
            displays.setdefault(group, Counter())[" ".join(raw.split())] += 1
            locators.setdefault(group, []).append((doc_id, path))

    entries = []
    for kind, key in sorted(displays):
        counts = displays[(kind, key)]
        display = sorted(counts, key=lambda t: (-counts[t], t))[0]
        locs = tuple(sorted(set(locators[(kind, key)])))
        entries.append(IndexEntry(kind=kind, key=key, display=display, locators=locs))
    return entries


# --------------------------------------------------------------------------
# Unified bibliography
# --------------------------------------------------------------------------


def _dedup_key(record: m.BiblStruct) -> tuple:
    """DOI when present; else (lead surname, year, normalized title).

    The two key families are kept disjoint by a leading tag, which also
    gives the pooled list a total order.
    """
    doi = record.identifier("doi")
    if doi:
        return ("doi", doi.casefold())
    authors = record.authors()
    surname = authors[0].surname.casefold() if authors else ""
    date = record.monogr.imprint.date
    year = f"{date.year:04d}" if date else ""
    title = record.main_title()
    title_text = m.normalize_title(title.text).casefold() if title else ""
    return ("meta", surname, year, title_text)


def unified_bibliography(corpus: Corpus) -> list:
    """Pool all reference lists, merging duplicates.

    Returns ``(BiblStruct, citing article ids)`` pairs sorted by the
    deduplication key; the first-encountered record wins for a merged
    entry and citing ids are sorted.
    """
    pooled: dict = {}
    citing: dict = {}
    for doc_id in sorted(corpus.articles):
        article = corpus.articles[doc_id]
        listbibl = article.reference_list
        if listbibl is None:
            continue
        for record in listbibl.entries:
            key = _dedup_key(record)
            pooled.setdefault(key, record)
            citing.setdefault(key, set()).add(doc_id)
    return [(pooled[key], tuple(sorted(citing[key]))) for key in sorted(pooled)]


# --------------------------------------------------------------------------
# Corrigenda
# --------------------------------------------------------------------------


def corrigenda(corpus: Corpus, kind: str = "correction") -> list:
    """All revision changes of the given kind, newest first.

    Ties on date are broken by article id so the page is stable.
    """
    entries = []
    for doc_id in sorted(corpus.articles):
        article = corpus.articles[doc_id]
        for change in article.header.revision_desc.changes:
            if change.kind == kind:
                entries.append(
                    CorrigendaEntry(
                        article_id=doc_id,
                        when=change.when,
                        description=change.description,
                    )
                )
    entries.sort(key=lambda e: (tuple(-part for part in e.when.sort_key()), e.article_id))
    return entries


# --------------------------------------------------------------------------
# Structural query
# --------------------------------------------------------------------------


def _query_nodes(article: m.Article, element_kind: str | None):
    """(path, text) pairs for nodes a query may match."""
    kind = element_kind or "any"
    for path, node in iter_model_paths(article):
        if isinstance(node, m.PersonMention):
            if kind in ("any", "person-mention"):
                yield path, node.text
        elif isinstance(node, m.OrgMention):
            if kind in ("any", "org-mention"):
                yield path, node.text
        elif isinstance(node, m.PlaceMention):
            if kind in ("any", "place-mention"):
                yield path, node.text
        elif isinstance(node, m.TermMention):
            if kind in ("any", "term-mention"):
                yield path, node.text
        elif isinstance(node, m.AbbrMention):
            if kind in ("any", "abbreviation"):
                yield path, node.abbr
        elif isinstance(node, m.Paragraph):
            if kind == "any":
                yield path, m.plain_text(node.content)


def _date_in_range(article: m.Article, q: Query) -> bool:
    if q.date_from is None and q.date_to is None:
        return True
    date = m.document_date(article)
    if date is None:
        return False
    if q.date_from is not None and date.sort_key() < q.date_from.sort_key():
        return False
    if q.date_to is not None and date.sort_key() > q.date_to.end_key():
        return False
    return True


def _cites_surname(article: m.Article, surname: str) -> bool:
    listbibl = article.reference_list
    if listbibl is None:
        return False
    wanted = surname.casefold()
    for record in listbibl.entries:
        analytic_authors = record.analytic.authors if record.analytic else ()
        for author in (*analytic_authors, *record.monogr.authors):
            if author.surname.casefold() == wanted:
                return True
    return False


def query(corpus: Corpus, q: Query) -> list:
    """Run one structural query; hits are (article id, path, snippet).

    All filters are conjunctive.  The snippet is the matched node's
    whitespace-normalized text.
    """
    hits = []
    needle = q.text.casefold() if q.text is not None else None
    for doc_id in sorted(corpus.articles):
        article = corpus.articles[doc_id]
        if not _date_in_range(article, q):
            continue
        if q.cites_author_surname is not None and not _cites_surname(
            article, q.cites_author_surname
        ):
            continue
        for path, text in _query_nodes(article, q.element_kind):
            if needle is not None and needle not in text.casefold():
                continue
            hits.append((doc_id, path, " ".join(text.split())))
    hits.sort(key=lambda h: (h[0], h[1]))
    return hits


# --------------------------------------------------------------------------
# Product pages (XHTML) and machine-readable records
# --------------------------------------------------------------------------


def _page(title: str, body_class: str) -> tuple:
    html = ET.Element("html", {"xmlns": "http://www.w3.org/1999/xhtml"})
    head = ET.SubElement(html, "head")
    ET.SubElement(head, "title").text = title
    body = ET.SubElement(html, "body")
    ET.SubElement(body, "h1").text = title
    container = ET.SubElement(body, "div", {"class": body_class})
    return html, container


def _page_markup(html: ET.Element) -> str:
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(
        html, encoding="unicode"
    ) + "\n"


def index_xhtml(entries) -> str:
    """The index as a standalone page (``tj-index``)."""
    html, container = _page("Index", "tj-index")
    current_kind = None
    listing = None
    for entry in entries:
        if entry.kind != current_kind:
            ET.SubElement(container, "h2").text = entry.kind
            listing = ET.SubElement(container, "ul")
            current_kind = entry.kind
        li = ET.SubElement(listing, "li")
        li.text = f"{entry.display} — "
        refs = ", ".join(f"{doc_id}:{path}" for doc_id, path in entry.locators)
        ET.SubElement(li, "span", {"class": "tj-locators"}).text = refs
    return _page_markup(html)


def _entry_line(record: m.BiblStruct, style: StyleGuide) -> str:
    try:
        return format_entry(record, style).plain()
    except StyleError:
        return bare_entry_text(record) or "(unciteable record)"


def unified_bibliography_xhtml(items, style: StyleGuide | None = None) -> str:
    """The pooled bibliography as a standalone page (``tj-unibib``)."""
    style = style or builtin_style("chicago")
    html, container = _page("Unified Bibliography", "tj-unibib")
    listing = ET.SubElement(container, "ul")
    for record, citing in items:
        li = ET.SubElement(listing, "li")
        li.text = _entry_line(record, style) + " "
        cite = ET.SubElement(li, "span", {"class": "tj-citing"})
        cite.text = f"(cited by: {', '.join(citing)})"
    return _page_markup(html)


def corrigenda_xhtml(entries) -> str:
    """The corrigenda as a standalone page (``tj-corrigenda``)."""
    html, container = _page("Corrigenda", "tj-corrigenda")
    listing = ET.SubElement(container, "ul")
    for entry in entries:
        li = ET.SubElement(listing, "li")
        li.text = f"{entry.when.iso()} — {entry.article_id}: {entry.description}"
    return _page_markup(html)


def index_records(entries) -> list:
    """Index as (kind, file, path, code, message) record tuples."""
    out = []
    for entry in entries:
        for doc_id, path in entry.locators:
            out.append((entry.kind, doc_id, path, entry.key, entry.display))
    return out


def biblio_records(items, style: StyleGuide | None = None) -> list:
    style = style or builtin_style("chicago")
    out = []
    for record, citing in items:
        key = "/".join(_dedup_key(record))
        out.append(("biblio", ",".join(citing), "", key, _entry_line(record, style)))
    return out


def corrigenda_records(entries) -> list:
    return [
        ("corrigendum", e.article_id, "", e.when.iso(), e.description) for e in entries
    ]


def query_records(hits) -> list:
    return [("hit", doc_id, path, "", snippet) for doc_id, path, snippet in hits]
