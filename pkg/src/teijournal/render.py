"""Citation-style rendering: bibliography entries, XHTML, and plain text.

A style is a small declarative table (:class:`StyleGuide`) loaded from JSON.
It fixes four things: how in-text markers look (numeric brackets vs
author-date), how the reference list is ordered, how personal names are
written, and — per record type — the ordered field segments that make up a
formatted entry.  Three styles ship with the package (``apa``, ``chicago``,
``mla``); callers may load their own from a file with the same shape.

Entry formatting is pure: the same article and style always produce the same
bytes, and rendering with one style leaves the article available, unchanged,
for the next.
"""

from __future__ import annotations

import json
import textwrap
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources

from .model import (
    AbbrMention,
    Article,
    Author,
    BiblRef,
    BiblStruct,
    CitBlock,
    Division,
    Emph,
    FigureBlock,
    FormulaBlock,
    Link,
    ListBlock,
    OpaqueBlock,
    OpaqueInline,
    OrgMention,
    Paragraph,
    PersonMention,
    PlaceMention,
    QuoteBlock,
    RichText,
    TableBlock,
    TermMention,
    TextRun,
    Title,
    normalize_title,
    plain_text,
)

XHTML_NS = "http://www.w3.org/1999/xhtml"

MARKER_SCHEMES = ("numeric-bracket", "author-date")
LIST_ORDERS = ("alphabetical", "citation-order")
NAME_FORMATS = ("surname-first-initials", "surname-first-full", "as-encoded")
TYPOGRAPHY = ("plain", "italic", "quoted")

#: Field paths a layout segment may address.  ``identifiers.<kind>`` is open
#: (the kind is matched case-insensitively against the record's identifiers).
SEGMENT_PATHS = frozenset(
    {
        "authors",
        "monogr.authors",
        "title",
        "analytic.title",
        "monogr.title",
        "imprint.publisher",
        "imprint.pub_place",
        "year",
        "pages",
        "issn",
    }
    | {f"scopes.{kind}" for kind in ("vol", "issue", "fpage", "lpage", "pp")}
)

BUILTIN_STYLES = ("apa", "chicago", "mla")


class StyleError(ValueError):
    """A style table is malformed or references unknown fields."""


@dataclass(frozen=True)
class Segment:
    """One field of an entry layout: where the value comes from and how it
    is dressed.  ``prefix`` and ``suffix`` are emitted as plain text around
    the (possibly italicised or quoted) value."""

    path: str
    typography: str = "plain"
    prefix: str = ""
    suffix: str = ""
    omit_if_absent: bool = True


@dataclass(frozen=True)
class StyleGuide:
    id: str
    marker_scheme: str
    list_order: str
    author_name_format: str
    layouts: dict = field(default_factory=dict)  # doc type -> tuple[Segment, ...]

    def layout_for(self, doc_type: str) -> tuple:
        """The segment list for a record type, falling back to ``unknown``."""
        return self.layouts.get(doc_type, self.layouts["unknown"])


@dataclass(frozen=True)
class Span:
    """A run of entry text with one typography applied."""

    text: str
    typography: str = "plain"


@dataclass(frozen=True)
class RenderedEntry:
    """A formatted bibliography entry.

    ``spans`` carry the typography; :meth:`plain` flattens them and
    :meth:`marked` writes italics as ``*...*`` and quoted runs with double
    quotes.  ``sort_key`` orders entries alphabetically; ``cite_text`` is the
    author-date in-text form without its parentheses (e.g. ``Dean 2009``).
    """

    ref_id: str | None
    spans: tuple  # tuple[Span, ...]
    sort_key: tuple
    cite_text: str

    def plain(self) -> str:
        return "".join(s.text for s in self.spans)

    def marked(self) -> str:
        parts = []
        for s in self.spans:
            if s.typography == "italic":
                parts.append(f"*{s.text}*")
            elif s.typography == "quoted":
                parts.append(f'"{s.text}"')
            else:
                parts.append(s.text)
        return "".join(parts)


# --------------------------------------------------------------------------
# Style loading
# --------------------------------------------------------------------------


def style_from_dict(raw: dict) -> StyleGuide:
    """Build and validate a :class:`StyleGuide` from parsed JSON."""
    try:
        style_id = raw["id"]
        scheme = raw["marker_scheme"]
        order = raw["list_order"]
        name_format = raw["author_name_format"]
        layouts_raw = raw["layouts"]
    except KeyError as exc:
        raise StyleError(f"style table is missing key {exc.args[0]!r}") from None
    if scheme not in MARKER_SCHEMES:
        raise StyleError(f"unknown marker scheme {scheme!r}")
    if order not in LIST_ORDERS:
        raise StyleError(f"unknown list order {order!r}")
    if name_format not in NAME_FORMATS:
        raise StyleError(f"unknown author name format {name_format!r}")
    if "unknown" not in layouts_raw:
        raise StyleError("style table must provide an 'unknown' layout")
    layouts = {}
    for doc_type, segments_raw in layouts_raw.items():
        segments = []
        for seg in segments_raw:
            path = seg.get("path", "")
            if path not in SEGMENT_PATHS and not path.startswith("identifiers."):
                raise StyleError(f"layout {doc_type!r} addresses unknown field {path!r}")
            typography = seg.get("typography", "plain")
            if typography not in TYPOGRAPHY:
                raise StyleError(f"unknown typography {typography!r}")
            segments.append(
                Segment(
                    path=path,
                    typography=typography,
                    prefix=seg.get("prefix", ""),
                    suffix=seg.get("suffix", ""),
                    omit_if_absent=bool(seg.get("omit_if_absent", True)),
                )
            )
        layouts[doc_type] = tuple(segments)
    return StyleGuide(
        id=style_id,
        marker_scheme=scheme,
        list_order=order,
        author_name_format=name_format,
        layouts=layouts,
    )


def builtin_style(style_id: str) -> StyleGuide:
    """One of the shipped styles: ``apa``, ``chicago``, or ``mla``."""
    if style_id not in BUILTIN_STYLES:
        raise StyleError(f"no built-in style {style_id!r} (have {', '.join(BUILTIN_STYLES)})")
    data = resources.files(__package__).joinpath(f"styles/{style_id}.json").read_text("utf-8")
    return style_from_dict(json.loads(data))


def load_style(path: str) -> StyleGuide:
    """Read a style table from a JSON file."""
    with open(path, encoding="utf-8") as handle:
        return style_from_dict(json.load(handle))


def get_style(name: str) -> StyleGuide:
    """Resolve a built-in style id, or treat ``name`` as a file path."""
    if name in BUILTIN_STYLES:
        return builtin_style(name)
    return load_style(name)


# --------------------------------------------------------------------------
# Names and field values
# --------------------------------------------------------------------------


def _one_name(author: Author, name_format: str, first: bool) -> str:
    forenames = [f for f in author.forenames if f]
    surname = author.surname
    if not forenames:
        # Organisations and mononyms are written as encoded in every format.
        return surname
    if name_format == "surname-first-initials":
        initials = " ".join(f"{part[0]}." for f in forenames for part in f.split() if part)
        return f"{surname}, {initials}" if initials else surname
    if name_format == "surname-first-full":
        if first:
            return f"{surname}, {' '.join(forenames)}"
        return f"{' '.join(forenames)} {surname}"
    return f"{' '.join(forenames)} {surname}"


def format_authors(authors: tuple, name_format: str) -> str:
    """Join a tuple of authors in the style's name format.

    Initial-style lists use the serial ampersand (``, & `` before the last
    name); full-name lists use ``and``.
    """
    names = [_one_name(a, name_format, i == 0) for i, a in enumerate(authors)]
    names = [n for n in names if n]
    if not names:
        return ""
    if len(names) == 1:
        return names[0]
    if name_format == "surname-first-initials":
        return ", ".join(names[:-1]) + ", & " + names[-1]
    if name_format == "surname-first-full":
        if len(names) == 2:
            return f"{names[0]} and {names[1]}"
        return ", ".join(names[:-1]) + ", and " + names[-1]
    return ", ".join(names)


def _forward_names(authors: tuple) -> str:
    """Container authors (editors) written in forward order."""
    names = []
    for a in authors:
        forenames = " ".join(f for f in a.forenames if f)
        names.append(f"{forenames} {a.surname}".strip())
    names = [n for n in names if n]
    if not names:
        return ""
    if len(names) == 1:
        return names[0]
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ", ".join(names[:-1]) + ", and " + names[-1]


def _level_title(titles: tuple) -> str | None:
    for title in titles:
        if title.type == "main":
            text = normalize_title(title.text)
            if text:
                return text
    return None


def _segment_value(record: BiblStruct, path: str, name_format: str) -> str | None:
    """The text for one layout segment, or ``None`` when the record lacks it."""
    if path == "authors":
        return format_authors(record.authors(), name_format) or None
    if path == "monogr.authors":
        return _forward_names(record.monogr.authors) or None
    if path == "title":
        title = record.main_title()
        return normalize_title(title.text) or None if title else None
    if path == "analytic.title":
        return _level_title(record.analytic.titles) if record.analytic else None
    if path == "monogr.title":
        return _level_title(record.monogr.titles)
    if path == "imprint.publisher":
        return record.monogr.imprint.publisher
    if path == "imprint.pub_place":
        return record.monogr.imprint.pub_place
    if path == "year":
        date = record.monogr.imprint.date
        return str(date.year) if date else None
    if path == "pages":
        fpage = record.scope("fpage")
        lpage = record.scope("lpage")
        if fpage and lpage:
            return f"{fpage}–{lpage}"
        if fpage:
            return fpage
        return record.scope("pp")
    if path == "issn":
        return record.monogr.issn
    if path.startswith("scopes."):
        return record.scope(path.split(".", 1)[1])
    if path.startswith("identifiers."):
        return record.identifier(path.split(".", 1)[1])
    raise StyleError(f"unknown segment path {path!r}")


def entry_sort_key(record: BiblStruct) -> tuple:
    """(lead surname, year, title) — the alphabetical ordering key.

    Style-independent, so reference numbering does not shift when the
    rendering style changes.
    """
    authors = record.authors()
    surname = authors[0].surname.casefold() if authors else ""
    date = record.monogr.imprint.date
    year = date.year if date else 0
    title = record.main_title()
    title_text = normalize_title(title.text).casefold() if title else ""
    return (surname, year, title_text)


def _cite_text(record: BiblStruct) -> str:
    """Author-date in-text form, without parentheses."""
    authors = record.authors()
    if authors:
        surnames = [a.surname for a in authors if a.surname]
        if len(surnames) == 1:
            who = surnames[0]
        elif len(surnames) == 2:
            who = f"{surnames[0]} and {surnames[1]}"
        else:
            who = f"{surnames[0]} et al."
    else:
        title = record.main_title()
        words = normalize_title(title.text).split() if title else []
        who = " ".join(words[:3])
    date = record.monogr.imprint.date
    if date:
        return f"{who} {date.year}".strip()
    return who


# --------------------------------------------------------------------------
# Entry formatting
# --------------------------------------------------------------------------


def format_entry(record: BiblStruct, style: StyleGuide) -> RenderedEntry:
    """Format one record per the style's layout for its type.

    Raises :class:`StyleError` for a record with no main title at either
    level — there is nothing to cite.
    """
    title = record.main_title()
    if title is None or not normalize_title(title.text):
        raise StyleError(
            f"record {record.xml_id or '<no id>'} has no main title and cannot be formatted"
        )
    spans: list[Span] = []
    for seg in style.layout_for(record.doc_type.value):
        value = _segment_value(record, seg.path, style.author_name_format)
        if not value:
            if seg.omit_if_absent:
                continue
            value = ""
        if seg.prefix:
            spans.append(Span(seg.prefix))
        if value:
            spans.append(Span(value, seg.typography))
        if seg.suffix:
            spans.append(Span(seg.suffix))

    spans = _tidy_spans(spans)
    return RenderedEntry(
        ref_id=record.xml_id,
        spans=tuple(spans),
        sort_key=entry_sort_key(record),
        cite_text=_cite_text(record),
    )


def _tidy_spans(spans: list) -> list:
    """Trim outer whitespace, drop empties, merge adjacent plain runs."""
    merged: list[Span] = []
    for span in spans:
        if not span.text:
            continue
        if merged and merged[-1].typography == span.typography == "plain":
            merged[-1] = Span(merged[-1].text + span.text)
        else:
            merged.append(span)
    while merged:
        lead = merged[0].text.lstrip()
        if lead:
            merged[0] = Span(lead, merged[0].typography)
            break
        merged.pop(0)
    while merged:
        tail = merged[-1].text.rstrip()
        if tail:
            merged[-1] = Span(tail, merged[-1].typography)
            break
        merged.pop()
    return merged


# --------------------------------------------------------------------------
# Reference lists and marker numbering
# --------------------------------------------------------------------------


def citation_order(article: Article) -> list:
    """xml:ids of bibliography entries in order of first citation.

    Walks the running text in document order; pointers that do not resolve
    to an entry are skipped.
    """
    from .xmlio import iter_model_paths

    known = set()
    listbibl = article.reference_list
    if listbibl:
        known = {e.xml_id for e in listbibl.entries if e.xml_id}
    seen: list = []
    for _, node in iter_model_paths(article):
        target = None
        if isinstance(node, BiblRef):
            target = node.target
        elif isinstance(node, CitBlock) and isinstance(node.source, str):
            target = node.source
        if not target or not target.startswith("#"):
            continue
        ref_id = target[1:]
        if ref_id in known and ref_id not in seen:
            seen.append(ref_id)
    return seen


def _ordered_entries(entries: tuple, style: StyleGuide, cited: list) -> tuple:
    """Shared ordering/numbering for reference lists.

    Returns ``(display_order, numbers)`` where ``display_order`` is a list of
    (key, RenderedEntry) in list order and ``numbers`` maps entry key to its
    1-based citation number (first-appearance order, uncited entries after
    the cited ones in alphabetical order).
    """
    rendered: dict = {}
    for i, record in enumerate(entries):
        key = record.xml_id if record.xml_id else f"\x00{i}"
        if key in rendered:
            continue
        rendered[key] = format_entry(record, style)
    cited_keys = [k for k in dict.fromkeys(cited) if k in rendered]
    uncited = sorted(
        (k for k in rendered if k not in set(cited_keys)),
        key=lambda k: (rendered[k].sort_key, k),
    )
    numbering_order = cited_keys + uncited
    numbers = {k: n for n, k in enumerate(numbering_order, start=1)}
    if style.list_order == "alphabetical":
        display = sorted(rendered, key=lambda k: (rendered[k].sort_key, k))
    else:
        display = numbering_order
    return [(k, rendered[k]) for k in display], numbers


def format_reference_list(
    entries, style: StyleGuide, citation_order: list | tuple = ()
) -> list:
    """Format a whole reference list.

    Returns ``(label, RenderedEntry)`` pairs in display order.  Labels are
    ``[n]`` strings for numeric marker schemes (numbered by first citation,
    uncited entries appended) and ``None`` for author-date schemes.
    """
    display, numbers = _ordered_entries(tuple(entries), style, list(citation_order))
    out = []
    for key, entry in display:
        label = f"[{numbers[key]}]" if style.marker_scheme == "numeric-bracket" else None
        out.append((label, entry))
    return out


# --------------------------------------------------------------------------
# XHTML
# --------------------------------------------------------------------------


def _append_text(element: ET.Element, text: str) -> None:
    if not text:
        return
    if len(element):
        element[-1].tail = (element[-1].tail or "") + text
    else:
        element.text = (element.text or "") + text


class _HtmlContext:
    """Marker resolution shared across the page: entry lookup + numbering."""

    def __init__(self, article: Article, style: StyleGuide):
        self.style = style
        entries = article.reference_list.entries if article.reference_list else ()
        self.cited = citation_order(article)
        self.display, self.numbers = (
            _ordered_entries(entries, style, self.cited) if entries else ([], {})
        )
        self.entry_by_id = {e.ref_id: e for _, e in self.display if e.ref_id}

    def marker(self, target: str, fallback: str) -> ET.Element | str:
        ref_id = target[1:] if target.startswith("#") else None
        entry = self.entry_by_id.get(ref_id) if ref_id else None
        if entry is None:
            span = ET.Element("span", {"class": "tj-ref"})
            span.text = fallback or target
            return span
        link = ET.Element("a", {"class": "tj-ref", "href": f"#ref-{ref_id}"})
        if self.style.marker_scheme == "numeric-bracket":
            link.text = f"[{self.numbers[ref_id]}]"
        else:
            link.text = f"({entry.cite_text})"
        return link


def _rich_to_html(parent: ET.Element, content: RichText, ctx: _HtmlContext) -> None:
    for node in content:
        if isinstance(node, TextRun):
            _append_text(parent, node.text)
        elif isinstance(node, Emph):
            tag = "b" if "bold" in node.rend else "i"
            child = ET.SubElement(parent, tag)
            _rich_to_html(child, node.content, ctx)
        elif isinstance(node, BiblRef):
            parent.append(ctx.marker(node.target, node.text))
        elif isinstance(node, Link):
            a = ET.SubElement(parent, "a", {"href": node.target})
            a.text = node.text or node.target
        elif isinstance(node, PersonMention):
            ET.SubElement(parent, "span", {"class": "tj-person"}).text = node.text
        elif isinstance(node, OrgMention):
            ET.SubElement(parent, "span", {"class": "tj-org"}).text = node.text
        elif isinstance(node, PlaceMention):
            ET.SubElement(parent, "span", {"class": "tj-place"}).text = node.text
        elif isinstance(node, TermMention):
            ET.SubElement(parent, "span", {"class": "tj-term"}).text = node.text
        elif isinstance(node, AbbrMention):
            attrs = {"title": node.expansion} if node.expansion else {}
            ET.SubElement(parent, "abbr", attrs).text = node.abbr
        elif isinstance(node, OpaqueInline):
            code = ET.SubElement(parent, "code", {"class": "tj-opaque"})
            code.text = node.markup


def _spans_to_html(parent: ET.Element, entry: RenderedEntry) -> None:
    for span in entry.spans:
        if span.typography == "italic":
            ET.SubElement(parent, "i").text = span.text
        elif span.typography == "quoted":
            _append_text(parent, f'"{span.text}"')
        else:
            _append_text(parent, span.text)


def _block_to_html(parent: ET.Element, block, ctx: _HtmlContext) -> None:
    if isinstance(block, Paragraph):
        p = ET.SubElement(parent, "p")
        _rich_to_html(p, block.content, ctx)
    elif isinstance(block, CitBlock):
        quote = ET.SubElement(parent, "blockquote", {"class": "tj-cit"})
        p = ET.SubElement(quote, "p")
        _rich_to_html(p, block.quote, ctx)
        if isinstance(block.source, str):
            _append_text(p, " ")
            p.append(ctx.marker(block.source, block.source))
        elif isinstance(block.source, BiblStruct):
            src = ET.SubElement(quote, "p", {"class": "tj-cit-source"})
            try:
                _spans_to_html(src, format_entry(block.source, ctx.style))
            except StyleError:
                _append_text(src, bare_entry_text(block.source))
        if block.qualifiers:
            q = ET.SubElement(quote, "p", {"class": "tj-cit-note"})
            _rich_to_html(q, block.qualifiers, ctx)
    elif isinstance(block, FigureBlock):
        figure = ET.SubElement(parent, "div", {"class": "tj-figure"})
        if block.graphic_url:
            ET.SubElement(figure, "img", {"alt": "", "src": block.graphic_url})
        if block.caption:
            cap = ET.SubElement(figure, "p")
            _rich_to_html(cap, block.caption, ctx)
    elif isinstance(block, TableBlock):
        div = ET.SubElement(parent, "div", {"class": "tj-table"})
        if block.caption:
            cap = ET.SubElement(div, "p")
            _rich_to_html(cap, block.caption, ctx)
        ET.SubElement(div, "pre").text = block.markup
    elif isinstance(block, FormulaBlock):
        ET.SubElement(parent, "pre", {"class": "tj-formula"}).text = block.markup
    elif isinstance(block, ListBlock):
        ul = ET.SubElement(parent, "ul")
        for item in block.items:
            li = ET.SubElement(ul, "li")
            _rich_to_html(li, item, ctx)
    elif isinstance(block, QuoteBlock):
        quote = ET.SubElement(parent, "blockquote")
        p = ET.SubElement(quote, "p")
        _rich_to_html(p, block.content, ctx)
    elif isinstance(block, OpaqueBlock):
        ET.SubElement(parent, "pre", {"class": "tj-opaque"}).text = block.markup


def _division_to_html(parent: ET.Element, division: Division, depth: int, ctx) -> None:
    css = "tj-abstract" if division.kind == "abstract" else "tj-section"
    section = ET.SubElement(parent, "section", {"class": css})
    if division.head:
        heading = ET.SubElement(section, f"h{min(depth + 1, 6)}")
        _rich_to_html(heading, division.head, ctx)
    for block in division.blocks:
        _block_to_html(section, block, ctx)
    for child in division.children:
        _division_to_html(section, child, depth + 1, ctx)


def _affiliation_text(author: Author) -> str:
    if author.affiliation is None:
        return ""
    parts = [u.name for u in author.affiliation.org_units if u.name]
    address = author.affiliation.address
    if address:
        for piece in (address.settlement, address.country):
            if piece:
                parts.append(piece)
    return ", ".join(parts)


def render_xhtml(article: Article, style: StyleGuide) -> str:
    """Render the whole article as a standalone XHTML page.

    The output is well-formed XML.  Stable CSS hooks: ``tj-title``,
    ``tj-author``, ``tj-affiliation``, ``tj-keywords``, ``tj-abstract``,
    ``tj-section``, ``tj-cit``, ``tj-ref``, ``tj-biblio-entry``.
    """
    ctx = _HtmlContext(article, style)
    fd = article.header.file_desc
    title_text = normalize_title(fd.main_title) or article.id or "Untitled"

    html = ET.Element("html", {"xmlns": XHTML_NS})
    head = ET.SubElement(html, "head")
    ET.SubElement(head, "title").text = title_text
    body = ET.SubElement(html, "body")

    h1 = ET.SubElement(body, "h1", {"class": "tj-title"})
    if fd.main_title:
        _rich_to_html(h1, fd.main_title, ctx)
    else:
        h1.text = title_text

    source = fd.source
    for author in source.authors() if source else ():
        name = " ".join([*author.forenames, author.surname]).strip() or author.surname
        p = ET.SubElement(body, "p", {"class": "tj-author"})
        p.text = name
        affiliation = _affiliation_text(author)
        if affiliation:
            ET.SubElement(body, "p", {"class": "tj-affiliation"}).text = affiliation

    keywords = article.header.profile_desc.keywords
    if keywords:
        ul = ET.SubElement(body, "ul", {"class": "tj-keywords"})
        for kw in keywords:
            ET.SubElement(ul, "li").text = kw.term

    for division in article.front:
        _division_to_html(body, division, 1, ctx)
    for division in article.body:
        _division_to_html(body, division, 1, ctx)
    for division in article.back.divisions:
        _division_to_html(body, division, 1, ctx)

    if ctx.display:
        section = ET.SubElement(body, "section", {"class": "tj-biblio"})
        ET.SubElement(section, "h2").text = "References"
        ul = ET.SubElement(section, "ul")
        for key, entry in ctx.display:
            attrs = {"class": "tj-biblio-entry"}
            if entry.ref_id:
                attrs["id"] = f"ref-{entry.ref_id}"
            li = ET.SubElement(ul, "li", attrs)
            if style.marker_scheme == "numeric-bracket":
                _append_text(li, f"[{ctx.numbers[key]}] ")
            _spans_to_html(li, entry)

    markup = ET.tostring(html, encoding="unicode")
    return f'<?xml version="1.0" encoding="UTF-8"?>\n{markup}\n'


# --------------------------------------------------------------------------
# Plain text
# --------------------------------------------------------------------------

_WIDTH = 78


def _wrap(text: str, indent: str = "", hang: str = "") -> list:
    text = " ".join(text.split())
    if not text:
        return []
    return textwrap.wrap(
        text,
        width=_WIDTH,
        initial_indent=indent,
        subsequent_indent=hang or indent,
        break_long_words=False,
        break_on_hyphens=False,
    )


class _TextContext:
    """Numbering for plain-text output: citations are always ``[n]``."""

    def __init__(self, article: Article, style: StyleGuide | None):
        self.style = style or builtin_style("chicago")
        entries = article.reference_list.entries if article.reference_list else ()
        cited = citation_order(article)
        if entries:
            # Plain text always numbers; order entries by citation number.
            numeric = StyleGuide(
                id=self.style.id,
                marker_scheme="numeric-bracket",
                list_order="citation-order",
                author_name_format=self.style.author_name_format,
                layouts=self.style.layouts,
            )
            self.display, self.numbers = _ordered_entries(entries, numeric, cited)
        else:
            self.display, self.numbers = [], {}
        self.known = {e.ref_id for _, e in self.display if e.ref_id}

    def marker(self, target: str, fallback: str) -> str:
        ref_id = target[1:] if target.startswith("#") else None
        if ref_id in self.known:
            return f"[{self.numbers[ref_id]}]"
        return fallback or target


def _rich_to_text(content: RichText, ctx: _TextContext) -> str:
    parts = []
    for node in content:
        if isinstance(node, TextRun):
            parts.append(node.text)
        elif isinstance(node, Emph):
            parts.append(_rich_to_text(node.content, ctx))
        elif isinstance(node, BiblRef):
            parts.append(ctx.marker(node.target, node.text))
        elif isinstance(node, (PersonMention, OrgMention, PlaceMention, TermMention)):
            parts.append(node.text)
        elif isinstance(node, AbbrMention):
            parts.append(node.abbr)
        elif isinstance(node, Link):
            parts.append(node.text or node.target)
        elif isinstance(node, OpaqueInline):
            pass
    return "".join(parts)


def bare_entry_text(record: BiblStruct) -> str:
    """Last-resort one-liner for records a style cannot format."""
    bits = []
    authors = format_authors(record.authors(), "as-encoded")
    if authors:
        bits.append(authors + ".")
    title = record.main_title()
    if title:
        text = normalize_title(title.text)
        if text:
            bits.append(text + ".")
    date = record.monogr.imprint.date
    if date:
        bits.append(f"{date.year}.")
    return " ".join(bits)


def _heading_lines(text: str, depth: int) -> list:
    underline = "=" if depth <= 1 else "-"
    text = " ".join(text.split())
    return [text, underline * max(len(text), 1)]


def _block_to_text(block, ctx: _TextContext) -> list:
    lines: list = []
    if isinstance(block, Paragraph):
        lines.extend(_wrap(_rich_to_text(block.content, ctx)))
    elif isinstance(block, CitBlock):
        quote = _rich_to_text(block.quote, ctx)
        if isinstance(block.source, str):
            quote = f"{quote} {ctx.marker(block.source, block.source)}"
        lines.extend(_wrap(quote, indent="    "))
        if isinstance(block.source, BiblStruct):
            lines.extend(_wrap("-- " + bare_entry_text(block.source), indent="    "))
        if block.qualifiers:
            lines.extend(_wrap(_rich_to_text(block.qualifiers, ctx), indent="    "))
    elif isinstance(block, FigureBlock):
        caption = _rich_to_text(block.caption, ctx).strip()
        lines.extend(_wrap(f"[Figure: {caption}]" if caption else "[Figure]"))
    elif isinstance(block, TableBlock):
        caption = _rich_to_text(block.caption, ctx).strip()
        lines.extend(_wrap(f"[Table: {caption}]" if caption else "[Table]"))
    elif isinstance(block, ListBlock):
        for item in block.items:
            lines.extend(_wrap(_rich_to_text(item, ctx), indent="  - ", hang="    "))
    elif isinstance(block, QuoteBlock):
        lines.extend(_wrap(_rich_to_text(block.content, ctx), indent="    "))
    # Formula and opaque blocks carry no flowable text and are skipped.
    return lines


def _division_to_text(division: Division, depth: int, ctx: _TextContext) -> list:
    lines: list = []
    head = _rich_to_text(division.head, ctx).strip()
    if head:
        lines.extend(_heading_lines(head, depth))
        lines.append("")
    for block in division.blocks:
        block_lines = _block_to_text(block, ctx)
        if block_lines:
            lines.extend(block_lines)
            lines.append("")
    for child in division.children:
        lines.extend(_division_to_text(child, depth + 1, ctx))
    return lines


def render_plaintext(article: Article, style: StyleGuide | None = None) -> str:
    """Render the article as wrapped plain text (78 columns).

    Citations appear as ``[n]`` numbered by first appearance regardless of
    the style's marker scheme; page ranges use a plain hyphen.  When no
    style is given the reference entries use the built-in ``chicago``
    layout.
    """
    ctx = _TextContext(article, style)
    fd = article.header.file_desc
    lines: list = []

    title = normalize_title(fd.main_title) or article.id or "Untitled"
    lines.extend([title, "=" * max(len(title), 1), ""])

    source = fd.source
    authors = source.authors() if source else ()
    if authors:
        names = ", ".join(
            " ".join([*a.forenames, a.surname]).strip() or a.surname for a in authors
        )
        lines.extend(_wrap(names))
        lines.append("")

    for division in (*article.front, *article.body, *article.back.divisions):
        lines.extend(_division_to_text(division, 1, ctx))

    if ctx.display:
        lines.extend(_heading_lines("References", 1))
        lines.append("")
        for key, entry in ctx.display:
            text = f"[{ctx.numbers[key]}] {entry.plain()}"
            lines.extend(_wrap(text, hang="    "))
        lines.append("")

    while lines and lines[-1] == "":
        lines.pop()
    text = "\n".join(lines) + "\n"
    return text.replace("–", "-")
