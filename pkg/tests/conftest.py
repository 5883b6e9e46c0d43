import hypothesis
import pytest

from kgqagen.kg_store import KnowledgeGraph, parse_ntriples

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None)
hypothesis.settings.load_profile("ci")


E = "http://example.org/entity/"
P = "http://example.org/prop/"


def ent(name: str) -> str:
    return f"<{E}{name}>"


def prop(name: str) -> str:
    return f"<{P}{name}>"


def nt(lines: list[str]) -> bytes:
    return ("\n".join(lines) + "\n").encode("utf-8")


@pytest.fixture
def small_kg() -> KnowledgeGraph:
    """Hand-checkable 12-triple graph with labels.

    Layout (entity-entity edges, direction as written):
        Alba -> Brin -> Cora -> Dunn
        Alba -> Cora
        Erma -> Brin
        Erma -> Dunn
        Faye -> Gorn          (island, reachable only through each other)
        Gorn -> Hale
        Iris                  (isolated: mentioned only via literal triple)
    """
    lines = [
        f"{ent('Alba')} {prop('knows')} {ent('Brin')} .",
        f"{ent('Brin')} {prop('knows')} {ent('Cora')} .",
        f"{ent('Cora')} {prop('mentored')} {ent('Dunn')} .",
        f"{ent('Alba')} {prop('visited')} {ent('Cora')} .",
        f"{ent('Erma')} {prop('knows')} {ent('Brin')} .",
        f"{ent('Erma')} {prop('visited')} {ent('Dunn')} .",
        f"{ent('Faye')} {prop('knows')} {ent('Gorn')} .",
        f"{ent('Gorn')} {prop('mentored')} {ent('Hale')} .",
        f'{ent("Alba")} {prop("established_in")} "1901"^^<http://www.w3.org/2001/XMLSchema#gYear> .',
        f'{ent("Iris")} {prop("established_in")} "1902"^^<http://www.w3.org/2001/XMLSchema#gYear> .',
        f"{ent('Dunn')} {prop('knows')} {ent('Alba')} .",
        f"{ent('Hale')} {prop('visited')} {ent('Faye')} .",
    ]
    kg = parse_ntriples(nt(lines))
    labels = [
        (f"{E}Alba", "Alba"),
        (f"{E}Brin", "Brin"),
        (f"{E}Cora", "Cora"),
        (f"{E}Dunn", "Dunn"),
        (f"{E}Erma", "Erma"),
        (f"{E}Faye", "Faye"),
        (f"{E}Gorn", "Gorn"),
        (f"{E}Hale", "Hale"),
        (f"{E}Iris", "Iris"),
    ]
    kg.attach_labels(labels)
    kg.build_label_index()
    return kg
