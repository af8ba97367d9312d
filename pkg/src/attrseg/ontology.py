"""Category/attribute ontology: loading, queries, validation, co-occurrence."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import GeometryError, OntologyError

SUPERCATEGORIES = ("outerwear", "parts", "accessory")
RELATION_TYPES = ("is-a", "part-of")
MAX_HYPONYMY_DEPTH = 4


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    supercategory: str
    synset: str = ""


@dataclass(frozen=True)
class Attribute:
    id: int
    name: str
    superclass: str


@dataclass(frozen=True)
class Relation:
    type: str
    source: int
    target: int


@dataclass(frozen=True)
class ExternalMapping:
    """Decomposition of an external class into categories plus attributes."""

    categories: frozenset[int]
    attributes: frozenset[int] = frozenset()


@dataclass(frozen=True)
class Ontology:
    categories: Mapping[int, Category]
    attributes: Mapping[int, Attribute]
    applicability: Mapping[int, frozenset[str]] = field(default_factory=dict)
    relations: tuple[Relation, ...] = ()
    external_mappings: Mapping[str, Mapping[str, ExternalMapping]] = field(default_factory=dict)
    name: str = ""

    @property
    def superclasses(self) -> frozenset[str]:
        return frozenset(a.superclass for a in self.attributes.values())

    @property
    def num_attributes(self) -> int:
        return len(self.attributes)

    def category(self, category_id: int) -> Category:
        try:
            return self.categories[category_id]
        except KeyError:
            raise OntologyError(f"unknown category id {category_id}") from None

    def category_by_name(self, name: str) -> Category:
        for c in self.categories.values():
            if c.name == name:
                return c
        raise OntologyError(f"unknown category name {name!r}")

    def attribute_by_name(self, name: str) -> Attribute:
        for a in self.attributes.values():
            if a.name == name:
                return a
        raise OntologyError(f"unknown attribute name {name!r}")

    def attributes_of_superclass(self, superclass: str) -> frozenset[int]:
        return frozenset(a.id for a in self.attributes.values() if a.superclass == superclass)

    def has_attributes(self, category_id: int) -> bool:
        return bool(applicable_attributes(self, category_id))

    def to_json(self) -> dict:
        maps = {
            tax: {
                label: {"categories": sorted(m.categories), "attributes": sorted(m.attributes)}
                for label, m in labels.items()
            }
            for tax, labels in self.external_mappings.items()
        }
        return {
            "name": self.name,
            "categories": [
                {"id": c.id, "name": c.name, "supercategory": c.supercategory, "synset": c.synset}
                for c in self.categories.values()
            ],
            "attributes": [
                {"id": a.id, "name": a.name, "superclass": a.superclass}
                for a in self.attributes.values()
            ],
            "applicability": {str(k): sorted(v) for k, v in self.applicability.items()},
            "relations": [{"type": r.type, "from": r.source, "to": r.target} for r in self.relations],
            "external_mappings": maps,
        }


def _hyponymy_problems(relations: Iterable[Relation]) -> list[str]:
    children: dict[int, list[int]] = {}
    for r in relations:
        if r.type == "is-a":
            children.setdefault(r.target, []).append(r.source)
    problems = []
    done: dict[int, int] = {}  # node -> longest chain (in nodes) hanging below it

    def depth(node: int, stack: tuple[int, ...]) -> int:
        if node in stack:
            raise OntologyError(f"is-a cycle through {' -> '.join(map(str, stack + (node,)))}")
        if node not in done:
            done[node] = 1 + max((depth(c, stack + (node,)) for c in children.get(node, ())), default=0)
        return done[node]

    for root in sorted(children):
        try:
            levels = depth(root, ())
        except OntologyError as exc:
            problems.append(str(exc))
            break
        if levels > MAX_HYPONYMY_DEPTH:
            problems.append(f"is-a chain below {root} has {levels} levels (max {MAX_HYPONYMY_DEPTH})")
    return problems


def check_ontology(o: Ontology) -> list[str]:
    """Return every broken invariant as a message; empty when the ontology is sound."""
    problems = []
    superclasses = o.superclasses
    for cid, targets in o.applicability.items():
        if cid not in o.categories:
            problems.append(f"applicability for unknown category {cid}")
        for sc in sorted(targets):
            if sc not in superclasses:
                problems.append(f"category {cid}: applicability superclass {sc!r} does not exist")
    for c in o.categories.values():
        if c.supercategory not in SUPERCATEGORIES:
            problems.append(f"category {c.id}: unknown supercategory {c.supercategory!r}")
    for r in o.relations:
        if r.type not in RELATION_TYPES:
            problems.append(f"unknown relation type {r.type!r}")
        elif r.type == "part-of" and not (r.source in o.categories and r.target in o.categories):
            problems.append(f"part-of {r.source} -> {r.target} references unknown category")
    problems.extend(_hyponymy_problems(o.relations))
    for tax, labels in o.external_mappings.items():
        for label, m in labels.items():
            for cid in sorted(m.categories - o.categories.keys()):
                problems.append(f"{tax}:{label} maps to unknown category {cid}")
            for aid in sorted(m.attributes - o.attributes.keys()):
                problems.append(f"{tax}:{label} maps to unknown attribute {aid}")
    return problems


def ontology_from_json(doc: dict) -> Ontology:
    problems = []
    categories: dict[int, Category] = {}
    for raw in doc.get("categories", []):
        c = Category(int(raw["id"]), raw["name"], raw.get("supercategory", ""), raw.get("synset", ""))
        if c.id in categories:
            problems.append(f"duplicate category id {c.id}")
        categories[c.id] = c
    attributes: dict[int, Attribute] = {}
    for raw in doc.get("attributes", []):
        a = Attribute(int(raw["id"]), raw["name"], raw["superclass"])
        if a.id in attributes:
            problems.append(f"duplicate attribute id {a.id}")
        attributes[a.id] = a
    applicability = {int(k): frozenset(v) for k, v in doc.get("applicability", {}).items()}
    relations = tuple(
        Relation(r["type"], int(r["from"]), int(r["to"])) for r in doc.get("relations", [])
    )
    mappings = {
        tax: {
            label: ExternalMapping(frozenset(m.get("categories", ())), frozenset(m.get("attributes", ())))
            for label, m in labels.items()
        }
        for tax, labels in doc.get("external_mappings", {}).items()
    }
    o = Ontology(
        dict(sorted(categories.items())),
        dict(sorted(attributes.items())),
        applicability,
        relations,
        mappings,
        doc.get("name", ""),
    )
    problems.extend(check_ontology(o))
    if problems:
        shown = "\n  ".join(problems[:20])
        raise OntologyError(f"{len(problems)} ontology violation(s):\n  {shown}")
    return o


def load_ontology(path: str | Path | None = None) -> Ontology:
    """Load an ontology JSON file; ``None`` loads the bundled Fashionpedia ontology."""
    try:
        if path is None:
            text = resources.files("attrseg.data").joinpath("fashionpedia_ontology.json").read_text()
        else:
            text = Path(path).read_text()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise OntologyError(f"cannot read ontology: {exc}") from exc
    try:
        return ontology_from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, OntologyError):
            raise
        raise OntologyError(f"malformed ontology: {exc!r}") from exc


def applicable_attributes(o: Ontology, category_id: int) -> frozenset[int]:
    """Attribute ids a category may carry (union over its applicable superclasses)."""
    o.category(category_id)
    superclasses = o.applicability.get(category_id, frozenset())
    return frozenset(a.id for a in o.attributes.values() if a.superclass in superclasses)


def map_external(o: Ontology, taxonomy: str, external_label: str) -> ExternalMapping:
    """Translate a class of an external taxonomy into this ontology.

    The pseudo-taxonomy ``"fashionpedia"`` maps a category name (or id) to
    itself.
    """
    if taxonomy == "fashionpedia":
        try:
            c = o.categories[int(external_label)]
        except (ValueError, KeyError):
            c = o.category_by_name(external_label)
        return ExternalMapping(frozenset({c.id}))
    if taxonomy not in o.external_mappings:
        raise OntologyError(f"unknown taxonomy {taxonomy!r}")
    labels = o.external_mappings[taxonomy]
    if external_label not in labels:
        raise OntologyError(f"unknown {taxonomy} label {external_label!r}")
    return labels[external_label]


# -- validation --------------------------------------------------------------


class ViolationKind(enum.Enum):
    UNKNOWN_CATEGORY = "unknown-category"
    UNKNOWN_ATTRIBUTE = "unknown-attribute"
    INAPPLICABLE_ATTRIBUTE = "inapplicable-attribute"
    GEOMETRY_ERROR = "geometry-error"
    DUPLICATE_ID = "duplicate-id"


_KIND_ORDER = {k: i for i, k in enumerate(ViolationKind)}


@dataclass(frozen=True)
class Violation:
    instance_id: int
    kind: ViolationKind
    message: str

    def sort_key(self):
        return (self.instance_id, _KIND_ORDER[self.kind], self.message)

    def __str__(self) -> str:
        return f"annotation {self.instance_id}: {self.kind.value}: {self.message}"


def sort_violations(violations: Iterable[Violation]) -> list[Violation]:
    return sorted(violations, key=Violation.sort_key)


def validate(instances: Sequence, o: Ontology, images: Mapping | None = None) -> list[Violation]:
    """Check ground-truth instances against the ontology.

    Problems are returned, never raised, so an audit sees everything in one
    pass. Output is sorted by instance id, then kind.

    Args:
        instances: ``GroundTruthInstance``-like objects.
        o: the ontology.
        images: optional image table (id -> object with ``height``/``width``)
            used to check mask sizes.
    """
    from .dataset import check_instance_geometry

    out = []
    seen: set[int] = set()
    for inst in instances:
        if inst.id in seen:
            out.append(Violation(inst.id, ViolationKind.DUPLICATE_ID, "annotation id repeated"))
        seen.add(inst.id)
        if inst.category_id not in o.categories:
            out.append(Violation(inst.id, ViolationKind.UNKNOWN_CATEGORY,
                                 f"category {inst.category_id} not in ontology"))
            allowed = None
        else:
            allowed = applicable_attributes(o, inst.category_id)
        for aid in sorted(inst.attributes):
            if aid not in o.attributes:
                out.append(Violation(inst.id, ViolationKind.UNKNOWN_ATTRIBUTE,
                                     f"attribute {aid} not in ontology"))
            elif allowed is not None and aid not in allowed:
                cat = o.categories[inst.category_id].name
                attr = o.attributes[aid]
                out.append(Violation(
                    inst.id, ViolationKind.INAPPLICABLE_ATTRIBUTE,
                    f"{attr.superclass} attribute {attr.name!r} ({aid}) not applicable to {cat!r}",
                ))
        image = images.get(inst.image_id) if images is not None else None
        try:
            check_instance_geometry(inst, image)
        except GeometryError as exc:
            out.append(Violation(inst.id, ViolationKind.GEOMETRY_ERROR, str(exc)))
    return sort_violations(out)


# -- co-occurrence -----------------------------------------------------------


@dataclass(frozen=True, order=True)
class Node:
    kind: str  # "category" or "attribute"
    id: int


@dataclass(frozen=True)
class Edge:
    source: Node
    target: Node
    weight: int


def cooccurrence_graph(images: Mapping[int, Sequence], o: Ontology) -> list[Edge]:
    """Aggregate per-image apparel graphs into one weighted edge list.

    Category pairs are weighted by the number of images containing both;
    category-attribute pairs by the number of instances carrying both.

    Args:
        images: image id -> instances in that image.
    """
    counts: Counter = Counter()
    for instances in images.values():
        cats = sorted({inst.category_id for inst in instances})
        for a, b in combinations(cats, 2):
            counts[(Node("category", a), Node("category", b))] += 1
        for inst in instances:
            for aid in sorted(set(inst.attributes)):
                counts[(Node("category", inst.category_id), Node("attribute", aid))] += 1
    return [Edge(u, v, w) for (u, v), w in sorted(counts.items())]


def node_name(o: Ontology, node: Node) -> str:
    table = o.categories if node.kind == "category" else o.attributes
    item = table.get(node.id)
    return item.name if item is not None else str(node.id)
