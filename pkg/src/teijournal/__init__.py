"""A TEI-subset toolkit for scholarly journal articles.

Parse and serialize article files, validate them against editorial rules,
infer and evolve a restricted schema from a corpus, render styled outputs
(bibliographies, XHTML, plain text), and build cross-document products:
indexes, a unified bibliography, corrigenda, and structural query results.
"""

from .model import Article, BiblStruct, CalendarDate
from .validator import ValidatorConfig, validate
from .xmlio import ParseReport, parse_article, serialize_article

__version__ = "0.1.0"

__all__ = [
    "Article",
    "BiblStruct",
    "CalendarDate",
    "ParseReport",
    "ValidatorConfig",
    "__version__",
    "parse_article",
    "serialize_article",
    "validate",
]
