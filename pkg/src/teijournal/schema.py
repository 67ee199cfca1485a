"""Corpus-driven schema inference, variant detection, and arbitration.

The lifecycle: profile a corpus of parsed trees, codify the observations
into a restricted schema (everything observed is allowed, nothing more),
detect competing attribute-value spellings, rewrite the corpus once a
spelling has been chosen, and codify again. Content models are unordered
on purpose — inferring element order from a small corpus would overfit,
so only vocabulary is restricted.

Schemas serialize to JSON with sorted keys so that consecutive schema
generations diff cleanly.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field

from .rawxml import RawDocument, RawNode, source_path
from .validator import Finding

DEFAULT_ENUMERABLE_ATTRIBUTES = frozenset({"type", "level", "rend", "unit"})


# --------------------------------------------------------------------------
# Usage profiles
# --------------------------------------------------------------------------


@dataclass
class ElementUsage:
    """Aggregated observations for one element name."""

    count: int = 0
    children: Counter = field(default_factory=Counter)
    child_coverage: Counter = field(default_factory=Counter)
    attributes: dict = field(default_factory=dict)  # name -> Counter(values)
    text_count: int = 0  # instances with non-whitespace direct text


@dataclass
class UsageProfile:
    doc_count: int = 0
    roots: Counter = field(default_factory=Counter)
    elements: dict = field(default_factory=dict)  # name -> ElementUsage
    foreign: Counter = field(default_factory=Counter)  # boundary names


def profile_document(doc: RawDocument) -> UsageProfile:
    """Profile a single tree; foreign subtrees are recorded as boundaries."""
    profile = UsageProfile(doc_count=1)
    profile.roots[doc.root.name] += 1

    def visit(node: RawNode) -> None:
        usage = profile.elements.setdefault(node.name, ElementUsage())
        usage.count += 1
        if node.has_text():
            usage.text_count += 1
        for name, value in node.attrs.items():
            usage.attributes.setdefault(name, Counter())[value] += 1
        seen_here = set()
        for child in node.element_children():
            if child.foreign:
                profile.foreign[child.name] += 1
                continue
            usage.children[child.name] += 1
            seen_here.add(child.name)
        for name in seen_here:
            usage.child_coverage[name] += 1
        for child in node.element_children():
            if not child.foreign:
                visit(child)

    if not doc.root.foreign:
        visit(doc.root)
    return profile


def merge_profiles(a: UsageProfile, b: UsageProfile) -> UsageProfile:
    """Commutative, associative merge of two profiles."""
    merged = UsageProfile(doc_count=a.doc_count + b.doc_count)
    merged.roots = a.roots + b.roots
    merged.foreign = a.foreign + b.foreign
    for source in (a, b):
        for name, usage in source.elements.items():
            target = merged.elements.setdefault(name, ElementUsage())
            target.count += usage.count
            target.children += usage.children
            target.child_coverage += usage.child_coverage
            target.text_count += usage.text_count
            for attr, values in usage.attributes.items():
                target.attributes[attr] = (
                    target.attributes.get(attr, Counter()) + values
                )
    return merged


def profile_corpus(docs) -> UsageProfile:
    """Aggregate observations over a collection of parsed trees."""
    profile = UsageProfile()
    for doc in docs:
        profile = merge_profiles(profile, profile_document(doc))
    return profile


# --------------------------------------------------------------------------
# Codification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CodifyOptions:
    enumerable_attributes: frozenset = DEFAULT_ENUMERABLE_ATTRIBUTES
    enumeration_cap: int = 20
    required_child_threshold: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "enumerable_attributes",
            frozenset(self.enumerable_attributes),
        )
        if self.enumeration_cap < 1:
            raise ValueError("enumeration_cap must be >= 1")
        if not 0 < self.required_child_threshold <= 1:
            raise ValueError("required_child_threshold must be in (0, 1]")


@dataclass(frozen=True)
class AttributeRule:
    required: bool = False
    values: tuple | None = None  # sorted closed list, or None when open


@dataclass(frozen=True)
class ElementRule:
    children: frozenset = frozenset()
    required_children: frozenset = frozenset()
    attributes: dict = field(default_factory=dict)  # name -> AttributeRule
    text: bool = False


@dataclass(frozen=True)
class RestrictedSchema:
    root: str = ""
    elements: dict = field(default_factory=dict)  # name -> ElementRule
    foreign: frozenset = frozenset()


def codify(
    profile: UsageProfile, options: CodifyOptions | None = None
) -> RestrictedSchema:
    """Formalize a profile: exactly the observed practice becomes legal."""
    options = options or CodifyOptions()
    if not profile.elements:
        return RestrictedSchema()
    root = min(
        profile.roots, key=lambda name: (-profile.roots[name], name)
    )
    elements: dict = {}
    for name, usage in profile.elements.items():
        required_children = frozenset(
            child
            for child, covered in usage.child_coverage.items()
            if covered >= options.required_child_threshold * usage.count
        )
        attributes: dict = {}
        for attr, values in usage.attributes.items():
            closed = (
                attr in options.enumerable_attributes
                and len(values) <= options.enumeration_cap
            )
            attributes[attr] = AttributeRule(
                required=values.total() >= usage.count,
                values=tuple(sorted(values)) if closed else None,
            )
        elements[name] = ElementRule(
            children=frozenset(usage.children),
            required_children=required_children,
            attributes=attributes,
            text=usage.text_count > 0,
        )
    return RestrictedSchema(
        root=root,
        elements=elements,
        foreign=frozenset(profile.foreign),
    )


# --------------------------------------------------------------------------
# Schema files
# --------------------------------------------------------------------------


def schema_to_json(schema: RestrictedSchema) -> str:
    payload = {
        "content_model": "unordered",
        "root": schema.root,
        "foreign": sorted(schema.foreign),
        "elements": {
            name: {
                "children": sorted(rule.children),
                "required_children": sorted(rule.required_children),
                "attributes": {
                    attr: {
                        "required": arule.required,
                        "values": (
                            list(arule.values)
                            if arule.values is not None
                            else None
                        ),
                    }
                    for attr, arule in rule.attributes.items()
                },
                "text": rule.text,
            }
            for name, rule in schema.elements.items()
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_base_schema() -> RestrictedSchema:
    """The shipped permissive superset used as the escape hatch."""
    from importlib import resources

    text = (
        resources.files("teijournal")
        .joinpath("data/base_schema.json")
        .read_text("utf-8")
    )
    return schema_from_json(text)


def schema_from_json(text: str) -> RestrictedSchema:
    payload = json.loads(text)
    elements: dict = {}
    for name, entry in payload.get("elements", {}).items():
        attributes = {
            attr: AttributeRule(
                required=bool(arule.get("required", False)),
                values=(
                    tuple(arule["values"])
                    if arule.get("values") is not None
                    else None
                ),
            )
            for attr, arule in entry.get("attributes", {}).items()
        }
        elements[name] = ElementRule(
            children=frozenset(entry.get("children", ())),
            required_children=frozenset(entry.get("required_children", ())),
            attributes=attributes,
            text=bool(entry.get("text", False)),
        )
    return RestrictedSchema(
        root=payload.get("root", ""),
        elements=elements,
        foreign=frozenset(payload.get("foreign", ())),
    )


# --------------------------------------------------------------------------
# Validation against a schema
# --------------------------------------------------------------------------


def validate_against(
    schema: RestrictedSchema,
    doc: RawDocument,
    base: RestrictedSchema | None = None,
) -> list:
    """Report constructs the schema does not permit, in document order.

    With a base schema, constructs absent from ``schema`` but permitted
    by ``base`` are downgraded to warnings; absences of required parts
    stay errors.
    """
    findings: list = []

    def emit(rule_id, node, message, downgrade_if):
        severity = "warning" if (base is not None and downgrade_if) else "error"
        findings.append(
            Finding(rule_id, severity, source_path(node), message)
        )

    def base_rule(name: str) -> ElementRule | None:
        if base is None:
            return None
        return base.elements.get(name)

    def visit(node: RawNode) -> None:
        rule = schema.elements.get(node.name)
        brule = base_rule(node.name)
        if rule is None:
            emit(
                "S-element",
                node,
                f"element '{node.name}' not in the schema",
                brule is not None,
            )
        else:
            for attr, value in node.attrs.items():
                arule = rule.attributes.get(attr)
                battr = brule.attributes.get(attr) if brule else None
                if arule is None:
                    emit(
                        "S-attribute",
                        node,
                        f"attribute '{attr}' not allowed on '{node.name}'",
                        battr is not None,
                    )
                elif arule.values is not None and value not in arule.values:
                    base_allows = battr is not None and (
                        battr.values is None or value in battr.values
                    )
                    emit(
                        "S-value",
                        node,
                        f"value '{value}' of '{node.name}/@{attr}' outside "
                        f"the closed list {sorted(arule.values)}",
                        base_allows,
                    )
            for attr, arule in rule.attributes.items():
                if arule.required and attr not in node.attrs:
                    findings.append(
                        Finding(
                            "S-required-attribute",
                            "error",
                            source_path(node),
                            f"required attribute '{attr}' missing on "
                            f"'{node.name}'",
                        )
                    )
            if node.has_text() and not rule.text:
                emit(
                    "S-text",
                    node,
                    f"text content not allowed in '{node.name}'",
                    brule is not None and brule.text,
                )
        present = set()
        for child in node.element_children():
            if child.foreign:
                if child.name in schema.foreign:
                    continue
                emit(
                    "S-element",
                    child,
                    f"foreign element '{child.name}' not in the schema",
                    base is not None and child.name in base.foreign,
                )
                continue
            present.add(child.name)
            if rule is not None and child.name not in rule.children:
                base_allows = brule is not None and child.name in brule.children
                emit(
                    "S-child",
                    child,
                    f"element '{child.name}' not permitted inside "
                    f"'{node.name}'",
                    base_allows,
                )
            visit(child)
        if rule is not None:
            for required in sorted(rule.required_children - present):
                findings.append(
                    Finding(
                        "S-required-child",
                        "error",
                        source_path(node),
                        f"required child '{required}' missing in "
                        f"'{node.name}'",
                    )
                )

    root = doc.root
    if root.foreign:
        findings.append(
            Finding(
                "S-root",
                "error",
                source_path(root),
                f"document element '{root.name}' is foreign",
            )
        )
        return findings
    if schema.root and root.name != schema.root:
        findings.append(
            Finding(
                "S-root",
                "error",
                source_path(root),
                f"document element '{root.name}' differs from schema root "
                f"'{schema.root}'",
            )
        )
    visit(root)
    return findings


# --------------------------------------------------------------------------
# Variant detection
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VariantCluster:
    element: str
    attribute: str
    key: str
    members: tuple  # ((value, count), ...) by count desc then value
    total: int


def normalize_variant(value: str) -> str:
    """Collapse spelling variation: case, plural -s, separator style."""
    value = value.casefold()
    if len(value) > 1 and value.endswith("s"):
        value = value[:-1]
    return re.sub(r"[-_ ]+", "-", value)


def detect_variants(
    profile: UsageProfile, enumerable_attributes=None
) -> list:
    """Find attribute values that are competing spellings of one key."""
    if enumerable_attributes is None:
        enumerable_attributes = DEFAULT_ENUMERABLE_ATTRIBUTES
    clusters: list = []
    for element in profile.elements:
        usage = profile.elements[element]
        for attr, values in usage.attributes.items():
            if attr not in enumerable_attributes:
                continue
            by_key: dict = {}
            for value, count in values.items():
                by_key.setdefault(normalize_variant(value), {})[value] = count
            for key, members in by_key.items():
                if len(members) < 2:
                    continue
                ordered = tuple(
                    sorted(members.items(), key=lambda kv: (-kv[1], kv[0]))
                )
                clusters.append(
                    VariantCluster(
                        element=element,
                        attribute=attr,
                        key=key,
                        members=ordered,
                        total=sum(members.values()),
                    )
                )
    clusters.sort(
        key=lambda c: (-c.total, c.element, c.attribute, c.key)
    )
    return clusters


# --------------------------------------------------------------------------
# Arbitration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RewriteRule:
    element: str  # element name or "*"
    attribute: str
    from_value: str
    to_value: str

    def __post_init__(self) -> None:
        if self.from_value == self.to_value:
            raise ValueError(
                f"rewrite rule maps '{self.from_value}' to itself"
            )


def parse_rules(text: str) -> list:
    """Read rules, one per line: ``element attribute from -> to``."""
    rules: list = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if " -> " not in line:
            raise ValueError(f"line {lineno}: missing ' -> ' separator")
        left, to_value = line.split(" -> ", 1)
        parts = left.split(None, 2)
        if len(parts) != 3:
            raise ValueError(
                f"line {lineno}: expected 'element attribute from -> to'"
            )
        element, attribute, from_value = parts
        rules.append(
            RewriteRule(element, attribute, from_value, to_value.strip())
        )
    return rules


_ENTITY_RE = re.compile(r"&(amp|lt|gt|quot|apos|#x?[0-9A-Fa-f]+);")


def _decode_entities(raw: str) -> str:
    def sub(match):
        token = match.group(1)
        if token == "amp":
            return "&"
        if token == "lt":
            return "<"
        if token == "gt":
            return ">"
        if token == "quot":
            return '"'
        if token == "apos":
            return "'"
        if token.startswith("#x") or token.startswith("#X"):
            return chr(int(token[2:], 16))
        return chr(int(token[1:]))

    return _ENTITY_RE.sub(sub, raw)


def _encode_attr(value: str) -> str:
    return (
        value.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace('"', "&quot;")
        .replace("'", "&#39;")
    )


def _attr_value_spans(data: bytes, node: RawNode) -> list:
    """Lexical (name, value_start, value_end) triples for a start tag."""
    spans: list = []
    i = node.start + 1
    # skip the element qname
    while data[i] not in (0x20, 0x09, 0x0A, 0x0D, 0x3E, 0x2F):
        i += 1
    while True:
        while data[i] in (0x20, 0x09, 0x0A, 0x0D):
            i += 1
        if data[i] == 0x3E or (data[i] == 0x2F and data[i + 1] == 0x3E):
            return spans
        name_start = i
        while data[i] not in (0x3D, 0x20, 0x09, 0x0A, 0x0D):
            i += 1
        name = data[name_start:i].decode("utf-8")
        while data[i] in (0x20, 0x09, 0x0A, 0x0D):
            i += 1
        assert data[i] == 0x3D  # '='
        i += 1
        while data[i] in (0x20, 0x09, 0x0A, 0x0D):
            i += 1
        quote = data[i]
        i += 1
        value_start = i
        while data[i] != quote:
            i += 1
        spans.append((name, value_start, i))
        i += 1


def arbitrate(docs, rules) -> tuple:
    """Apply rewrite rules across trees; returns (new trees, change count).

    Conflicting rules — the same (element, attribute, from) mapped to two
    targets — raise before anything is touched. A rule naming an element
    outranks a "*" rule for the same attribute and value.
    """
    from .rawxml import parse_raw

    table: dict = {}
    for rule in rules:
        key = (rule.element, rule.attribute, rule.from_value)
        if key in table and table[key] != rule.to_value:
            raise ValueError(
                f"conflicting rules for {key}: "
                f"'{table[key]}' vs '{rule.to_value}'"
            )
        table[key] = rule.to_value

    def lookup(element: str, attribute: str, value: str) -> str | None:
        target = table.get((element, attribute, value))
        if target is None:
            target = table.get(("*", attribute, value))
        return target

    rewritten: list = []
    changes = 0
    for doc in docs:
        edits: list = []  # (start, end, replacement bytes)

        def visit(node: RawNode) -> None:
            hits = {
                attr: lookup(node.name, attr, value)
                for attr, value in node.attrs.items()
            }
            if any(target is not None for target in hits.values()):
                for raw_name, start, end in _attr_value_spans(doc.data, node):
                    display = raw_name.split(":")[-1] if ":" in raw_name else raw_name
                    if raw_name == "xml:id":
                        display = "xml:id"
                    target = hits.get(display)
                    if target is None:
                        continue
                    decoded = _decode_entities(
                        doc.data[start:end].decode("utf-8")
                    )
                    if decoded == node.attrs.get(display):
                        edits.append(
                            (start, end, _encode_attr(target).encode("utf-8"))
                        )
            for child in node.element_children():
                visit(child)

        visit(doc.root)
        if not edits:
            rewritten.append(doc)
            continue
        data = doc.data
        for start, end, replacement in sorted(edits, reverse=True):
            data = data[:start] + replacement + data[end:]
        changes += len(edits)
        rewritten.append(parse_raw(data))
    return rewritten, changes
