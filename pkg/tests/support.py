"""Shared fixtures: a fully completed article that passes every rule,
plus builders the suites use to derive corpora and mutations from it."""

from __future__ import annotations

import dataclasses

from teijournal import model as m
from teijournal.xmlio import parse_article, serialize_article

TEI_NS = "http://www.tei-c.org/ns/1.0"

# A complete article: header with all publication details, source record
# with volume/issue/pages/DOI, one body division citing the single
# reference-list entry.  The validator must report nothing at all on it.
SKELETON = b"""<?xml version="1.0" encoding="UTF-8"?>
<TEI xmlns="http://www.tei-c.org/ns/1.0">
  <teiHeader>
    <fileDesc>
      <titleStmt>
        <title level="a" type="main">Multilocus Analysis of Age Related Macular Degeneration</title>
      </titleStmt>
      <publicationStmt>
        <availability><p>Copyright \xc2\xa9 The Animal Consortium 2009</p></availability>
        <date when="2009-06-01"/>
        <authority>The Animal Consortium</authority>
      </publicationStmt>
      <sourceDesc>
        <biblStruct type="journalArticle">
          <analytic>
            <title level="a" type="main">Multilocus Analysis of Age Related Macular Degeneration</title>
            <author type="corresp">
              <idno type="ORCID">0000-0002-0000-0000</idno>
              <persName>
                <forename>Michael</forename>
                <surname>Dean</surname>
              </persName>
              <affiliation>
                <orgName type="laboratory">CSA Department</orgName>
                <orgName type="institution">Indian Institute of Science</orgName>
                <address>
                  <settlement>Bangalore</settlement>
                  <postCode>560012</postCode>
                  <country>India</country>
                  <addrLine type="phone">+91-80-22932386</addrLine>
                  <addrLine type="fax">+91-80-23602911</addrLine>
                </address>
              </affiliation>
              <email>dean@ncifcrf.gov</email>
            </author>
          </analytic>
          <monogr>
            <title level="j" type="main">European Journal of Human Genetics</title>
            <title level="j" type="nlm-ta">Eur J Hum Genet</title>
            <idno type="ISSN">1018-4813</idno>
            <imprint>
              <date when="2009"/>
              <biblScope type="vol">17</biblScope>
              <biblScope type="issue">6</biblScope>
              <biblScope type="fpage">774</biblScope>
              <biblScope type="lpage">780</biblScope>
            </imprint>
          </monogr>
          <idno type="DOI">10.1038/ejhg.2009.77</idno>
        </biblStruct>
      </sourceDesc>
    </fileDesc>
    <profileDesc>
      <langUsage>
        <language ident="en"/>
      </langUsage>
      <textClass>
        <keywords scheme="free">
          <list>
            <item><term>foetal development</term></item>
          </list>
        </keywords>
      </textClass>
    </profileDesc>
    <revisionDesc>
      <change when="2008-08-27">Received</change>
      <change when="2008-12-01">Accepted</change>
    </revisionDesc>
  </teiHeader>
  <text>
    <front>
      <div type="abstract">
        <p>A short abstract describing the study.</p>
      </div>
    </front>
    <body>
      <div type="section">
        <head>Background</head>
        <p>Earlier work <ref type="bibr" target="#b1">(Brecht 1981)</ref> framed the question.</p>
      </div>
    </body>
    <back>
      <div type="bibliography">
        <listBibl>
          <biblStruct type="book" xml:id="b1">
            <monogr>
              <author>
                <persName>
                  <forename>Bertolt</forename>
                  <surname>Brecht</surname>
                </persName>
              </author>
              <title level="m" type="main">Der Jasager und der Neinsager - Vorlagen, Fassungen und Materialien</title>
              <imprint>
                <publisher>Edition Suhrkamp</publisher>
                <date when="1981"/>
              </imprint>
            </monogr>
            <idno type="ISBN">9783518101711</idno>
          </biblStruct>
        </listBibl>
      </div>
    </back>
  </text>
</TEI>
"""


def parse_skeleton() -> m.Article:
    report = parse_article(SKELETON, "skeleton.xml")
    assert report.ok, report.issues
    assert not report.issues, report.issues
    return report.outcome


def roundtrip(article: m.Article) -> m.Article:
    report = parse_article(serialize_article(article), "roundtrip.xml")
    assert report.ok, report.issues
    return report.outcome


# --------------------------------------------------------------------------
# Frozen-tree rebuilding helpers
# --------------------------------------------------------------------------


def with_file_desc(article: m.Article, **changes) -> m.Article:
    fd = dataclasses.replace(article.header.file_desc, **changes)
    header = dataclasses.replace(article.header, file_desc=fd)
    return dataclasses.replace(article, header=header)


def with_profile_desc(article: m.Article, **changes) -> m.Article:
    pd = dataclasses.replace(article.header.profile_desc, **changes)
    header = dataclasses.replace(article.header, profile_desc=pd)
    return dataclasses.replace(article, header=header)


def with_changes(article: m.Article, changes: tuple) -> m.Article:
    rd = dataclasses.replace(article.header.revision_desc, changes=changes)
    header = dataclasses.replace(article.header, revision_desc=rd)
    return dataclasses.replace(article, header=header)


def with_source(article: m.Article, source) -> m.Article:
    return with_file_desc(article, source=source)


def replace_source(article: m.Article, **changes) -> m.Article:
    return with_source(
        article, dataclasses.replace(article.header.file_desc.source, **changes)
    )


def with_entries(article: m.Article, entries: tuple) -> m.Article:
    listbibl = m.ListBibl(entries=entries)
    back = dataclasses.replace(article.back, reference_list=listbibl)
    return dataclasses.replace(article, back=back)


# --------------------------------------------------------------------------
# Reference records used by the renderer suites
# --------------------------------------------------------------------------


def dean_article_record() -> m.BiblStruct:
    """The journal-article record from the completed skeleton's source."""
    return parse_skeleton().header.file_desc.source


def brecht_book_record() -> m.BiblStruct:
    return parse_skeleton().reference_list.entries[0]


def schmidt_chapter_record() -> m.BiblStruct:
    """An invented book chapter exercising the bookSection layouts."""
    return m.BiblStruct(
        doc_type=m.DocumentType("bookSection"),
        analytic=m.Analytic(
            titles=(
                m.Title((m.TextRun("Editorial Workflows for Journals"),), "a", "main"),
            ),
            authors=(m.Author(surname="Schmidt", forenames=("Anna",)),),
        ),
        monogr=m.Monogr(
            titles=(
                m.Title((m.TextRun("Handbook of Journal Publishing"),), "m", "main"),
            ),
            authors=(m.Author(surname="Wilson", forenames=("Janet",)),),
            imprint=m.Imprint(
                publisher="Academic Press",
                date=m.CalendarDate(2005, raw="2005"),
                scopes=(m.Scope("fpage", "45"), m.Scope("lpage", "67")),
            ),
        ),
        xml_id="b7",
    )


# --------------------------------------------------------------------------
# Corpus-on-disk builder
# --------------------------------------------------------------------------


def article_bytes(
    *,
    title: str,
    date: str = "2009-05-01",
    year: str = "2009",
    doi: str | None = None,
    surname: str = "Dean",
    forename: str = "Michael",
    keywords: tuple = ("foetal development",),
    body: str = "<div type=\"section\"><head>One</head><p>Prose.</p></div>",
    changes: str = "",
    refs: str = "",
) -> bytes:
    """A minimal valid article assembled from text fragments."""
    idno = f'<idno type="DOI">{doi}</idno>' if doi else ""
    keyword_items = "".join(f"<item><term>{k}</term></item>" for k in keywords)
    back = (
        f'<back><div type="bibliography"><listBibl>{refs}</listBibl></div></back>'
        if refs
        else ""
    )
    text = f"""<?xml version="1.0" encoding="UTF-8"?>
<TEI xmlns="http://www.tei-c.org/ns/1.0">
  <teiHeader>
    <fileDesc>
      <titleStmt><title level="a" type="main">{title}</title></titleStmt>
      <publicationStmt>
        <availability><p>Open.</p></availability>
        <date when="{date}"/>
        <authority>The Press</authority>
      </publicationStmt>
      <sourceDesc><biblStruct type="journalArticle">
        <analytic>
          <title level="a" type="main">{title}</title>
          <author><persName><forename>{forename}</forename><surname>{surname}</surname></persName></author>
        </analytic>
        <monogr>
          <title level="j" type="main">Journal of Trials</title>
          <imprint><date when="{year}"/></imprint>
        </monogr>
        {idno}
      </biblStruct></sourceDesc>
    </fileDesc>
    <profileDesc><textClass><keywords><list>{keyword_items}</list></keywords></textClass></profileDesc>
    <revisionDesc><change when="2008-01-05">Received</change>{changes}</revisionDesc>
  </teiHeader>
  <text>
    <body>{body}</body>
    {back}
  </text>
</TEI>
"""
    return text.encode("utf-8")


def write_corpus(directory, files: dict) -> list:
    """Write {name: bytes} into a directory; returns sorted paths."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, data in files.items():
        target = directory / name
        target.write_bytes(data)
        paths.append(str(target))
    return sorted(paths)
