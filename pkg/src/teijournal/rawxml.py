"""Low-level XML tree with source byte spans.

Built directly on ``xml.parsers.expat`` so that every element records the
byte range it occupies in the input. Those spans let higher layers carry
unrecognized markup through a parse/serialize cycle verbatim, and let the
rewrite machinery splice attribute values without disturbing anything else.

Hardening: entity declarations of any kind and external DTD subsets are
rejected outright, as are UTF-16/32 inputs and non-UTF-8 encoding
declarations. Only the five built-in character entities and numeric
character references ever reach the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from xml.parsers import expat

TEI_NS = "http://www.tei-c.org/ns/1.0"
XML_NS = "http://www.w3.org/XML/1998/namespace"


class RawXmlError(Exception):
    """Input rejected: not well-formed, wrong encoding, or unsafe."""


@dataclass(eq=False)
class RawNode:
    """One element: resolved name, attributes, children, and byte span.

    Identity equality: nodes are positions in one parsed document, not
    values.
    """

    name: str
    ns: str = ""
    attrs: dict = field(default_factory=dict)
    children: list = field(default_factory=list)  # RawNode | str
    start: int = 0
    end: int = 0
    parent: "RawNode | None" = field(default=None, repr=False)
    ordinal: int = 1  # 1-based position among same-named siblings
    ns_decls: tuple = ()  # prefixed declarations carried by this element
    foreign: bool = False  # namespace differs from the document element's

    def element_children(self) -> list:
        return [c for c in self.children if isinstance(c, RawNode)]

    def find(self, name: str) -> "RawNode | None":
        for child in self.children:
            if isinstance(child, RawNode) and child.name == name:
                return child
        return None

    def find_all(self, name: str) -> list:
        return [
            c for c in self.children if isinstance(c, RawNode) and c.name == name
        ]

    def direct_text(self) -> str:
        return "".join(c for c in self.children if isinstance(c, str))

    def text_content(self) -> str:
        parts = []
        for child in self.children:
            if isinstance(child, str):
                parts.append(child)
            else:
                parts.append(child.text_content())
        return "".join(parts)

    def has_text(self) -> bool:
        """True when any direct text child is more than whitespace."""
        return any(
            isinstance(c, str) and c.strip() for c in self.children
        )


@dataclass
class RawDocument:
    data: bytes
    root: RawNode

    def slice(self, node: RawNode) -> str:
        return self.data[node.start : node.end].decode("utf-8")


def source_path(node: RawNode) -> str:
    """Slash-joined path with 1-based same-name sibling indexes."""
    parts = []
    cur: RawNode | None = node
    while cur is not None:
        parts.append(f"{cur.name}[{cur.ordinal}]")
        cur = cur.parent
    return "/".join(reversed(parts))


_ENC_DECL_RE = re.compile(
    rb"<\?xml[^>]*?encoding\s*=\s*[\"']([A-Za-z0-9._-]+)[\"']"
)


def _check_prolog(data: bytes) -> None:
    if data[:4] in (b"\x00\x00\xfe\xff", b"\xff\xfe\x00\x00"):
        raise RawXmlError("UTF-32 input is not supported; supply UTF-8")
    if data[:2] in (b"\xfe\xff", b"\xff\xfe"):
        raise RawXmlError("UTF-16 input is not supported; supply UTF-8")
    m = _ENC_DECL_RE.match(data[:256].lstrip(b"\xef\xbb\xbf"))
    if m:
        encoding = m.group(1).decode("ascii").lower()
        if encoding not in ("utf-8", "utf8"):
            raise RawXmlError(f"unsupported encoding {encoding!r}; supply UTF-8")


def _resolve_name(expat_name: str) -> tuple[str, str]:
    """Map expat's ``uri local`` form to a display name and namespace URI."""
    if " " not in expat_name:
        return expat_name, ""
    uri, local = expat_name.split(" ", 1)
    if uri == TEI_NS:
        return local, uri
    if uri == XML_NS:
        return f"xml:{local}", uri
    return "{%s}%s" % (uri, local), uri


def parse_raw(data: bytes) -> RawDocument:
    """Parse bytes into a span-annotated tree, or raise ``RawXmlError``."""
    if not data.strip():
        raise RawXmlError("empty input")
    _check_prolog(data)

    parser = expat.ParserCreate(namespace_separator=" ")
    parser.ordered_attributes = True
    parser.buffer_text = True

    root_holder: list[RawNode] = []
    stack: list[RawNode] = []
    counters: list[dict] = []  # same-name sibling counters per open element
    pending_ns: list[tuple] = []

    def fail(message: str) -> None:
        raise RawXmlError(
            f"{message} (line {parser.CurrentLineNumber},"
            f" column {parser.CurrentColumnNumber + 1})"
        )

    def scan_start_tag(start: int) -> tuple[int, bool]:
        """Find the end of the start tag beginning at ``start``.

        Walks byte-by-byte honouring quotes, since attribute values may
        legally contain ``>``. Returns (offset past '>', self-closed).
        """
        i = start + 1
        quote = 0
        while True:
            c = data[i]
            if quote:
                if c == quote:
                    quote = 0
            elif c in (0x22, 0x27):  # " or '
                quote = c
            elif c == 0x3E:  # >
                return i + 1, data[i - 1] == 0x2F  # preceding /
            i += 1

    def on_entity_decl(*args) -> None:
        fail("entity declarations are not allowed")

    def on_doctype(name, sysid, pubid, has_internal) -> None:
        if sysid or pubid:
            fail("external DTD references are not allowed")

    def on_ns_decl(prefix, uri) -> None:
        if prefix:
            pending_ns.append((prefix, uri or ""))

    def on_start(expat_name, attr_list) -> None:
        name, uri = _resolve_name(expat_name)
        attrs = {}
        for i in range(0, len(attr_list), 2):
            attr_name, _ = _resolve_name(attr_list[i])
            attrs[attr_name] = attr_list[i + 1]
        start = parser.CurrentByteIndex
        end, self_closed = scan_start_tag(start)
        parent = stack[-1] if stack else None
        root_ns = root_holder[0].ns if root_holder else uri
        node = RawNode(
            name=name,
            ns=uri,
            attrs=attrs,
            start=start,
            end=end if self_closed else 0,
            parent=parent,
            ns_decls=tuple(pending_ns),
            foreign=(uri != root_ns) or (parent.foreign if parent else False),
        )
        pending_ns.clear()
        if parent is None:
            root_holder.append(node)
        else:
            parent.children.append(node)
            siblings = counters[-1]
            node.ordinal = siblings[name] = siblings.get(name, 0) + 1
        stack.append(node)
        counters.append({})

    def on_end(expat_name) -> None:
        node = stack.pop()
        counters.pop()
        if node.end == 0:  # paired tags; end tags contain no quotes
            node.end = data.index(b">", parser.CurrentByteIndex) + 1

    def on_text(text) -> None:
        if not stack:
            return
        children = stack[-1].children
        if children and isinstance(children[-1], str):
            children[-1] += text
        else:
            children.append(text)

    parser.EntityDeclHandler = on_entity_decl
    parser.StartDoctypeDeclHandler = on_doctype
    parser.StartNamespaceDeclHandler = on_ns_decl
    parser.StartElementHandler = on_start
    parser.EndElementHandler = on_end
    parser.CharacterDataHandler = on_text
    parser.ExternalEntityRefHandler = lambda *args: 0

    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise RawXmlError(f"not well-formed: {exc}") from None

    if not root_holder:
        raise RawXmlError("no document element")
    return RawDocument(data=data, root=root_holder[0])
