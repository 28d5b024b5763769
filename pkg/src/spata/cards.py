"""Pattern-card serialisation: canonical JSON, projected CSV and markdown.

The JSON document has a fixed key order and compact separators, and every
real is written as its shortest round-trip decimal, so importing and
re-exporting a card reproduces the file byte for byte.

Layout (``spata-card/1``)::

    {"version": "spata-card/1",
     "config": {"bins": 9, "levels": 8, "min_frequency": 0.01},
     "features": [{"name": ..., "tree": NODE}, ...],
     "classes": [{"label": ..., "n_instances": ...,
                  "combinations": [{"codes": [...], "count": ..., "overlap_classes": ...}]}],
     "code_stats": [{"feature": ..., "code": ..., "per_class_counts": {label: n},
                     "overlap_classes": ...}]}

    NODE = {"mean": ..., "std": ..., "min": ..., "max": ..., "count": ...,
            "children": {"<bin>": NODE, ...}}

Tree nodes carry summary statistics of the training values that reached
them.  Deep levels describe few values, so a card with many levels discloses
correspondingly precise information about the source data.
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

from .binning import BinSpec
from .pattern import ClassPattern, CodeStats, PatternCard, validate_card
from .projection import FeatureTree, PatternModel, ProjectedDataset, format_code, pack_code, parse_code, unpack_code

__all__ = [
    "CARD_VERSION",
    "SchemaError",
    "card_to_json",
    "export_card_json",
    "export_projected_csv",
    "import_card_json",
    "projected_to_csv",
    "render_markdown_card",
]

CARD_VERSION = "spata-card/1"


class SchemaError(ValueError):
    """A card file that does not follow the expected schema."""


def _s(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def _real(x: float) -> str:
    return repr(float(x))


def _write_tree(out: io.TextIOBase, tree: FeatureTree) -> None:
    mean = [_real(v) for v in tree.mean.tolist()]
    std = [_real(v) for v in tree.std.tolist()]
    lo = [_real(v) for v in tree.min.tolist()]
    hi = [_real(v) for v in tree.max.tolist()]
    count = tree.count.tolist()
    bins = tree.bin.tolist()
    parents = tree.parent[1:]
    first = (np.searchsorted(parents, np.arange(tree.n_nodes), side="left") + 1).tolist()
    last = (np.searchsorted(parents, np.arange(tree.n_nodes), side="right") + 1).tolist()

    def node(i: int) -> None:
        out.write(
            f'{{"mean":{mean[i]},"std":{std[i]},"min":{lo[i]},"max":{hi[i]},'
            f'"count":{count[i]},"children":{{'
        )
        for k, c in enumerate(range(first[i], last[i])):
            if k:
                out.write(",")
            out.write(f'"{bins[c]}":')
            node(c)
        out.write("}}")

    node(0)


def _write_card(out: io.TextIOBase, card: PatternCard) -> None:
    model = card.model
    b, levels = model.spec.b, model.depth_limit

    fmt_cache: dict[int, str] = {}

    def code_str(packed: int) -> str:
        s = fmt_cache.get(packed)
        if s is None:
            s = fmt_cache[packed] = _s(format_code(card.unpack(packed), b))
        return s

    min_freq = "null" if card.min_frequency is None else _real(card.min_frequency)
    out.write(f'{{"version":{_s(CARD_VERSION)},')
    out.write(f'"config":{{"bins":{b},"levels":{levels},"min_frequency":{min_freq}}},')

    out.write('"features":[')
    for j, (name, tree) in enumerate(zip(model.feature_names, model.trees)):
        if j:
            out.write(",")
        out.write(f'{{"name":{_s(name)},"tree":')
        _write_tree(out, tree)
        out.write("}")
    out.write("],")

    out.write('"classes":[')
    for k, cp in enumerate(card.classes):
        if k:
            out.write(",")
        out.write(f'{{"label":{_s(cp.label)},"n_instances":{cp.n_instances},"combinations":[')
        counts = cp.combo_counts.tolist()
        overlaps = cp.combo_overlaps.tolist()
        for r, row in enumerate(cp.combinations.tolist()):
            if r:
                out.write(",")
            codes = ",".join(code_str(p) for p in row)
            out.write(f'{{"codes":[{codes}],"count":{counts[r]},"overlap_classes":{overlaps[r]}}}')
        out.write("]}")
    out.write("],")

    out.write('"code_stats":[')
    first = True
    for j, name in enumerate(model.feature_names):
        per_class = []
        for cp in card.classes:
            st = cp.code_stats[j]
            per_class.append((cp.label, st.codes.tolist(), st.counts.tolist(), st.overlaps.tolist()))
        all_codes = sorted({p for _, codes, _, _ in per_class for p in codes})
        lookup = [dict(zip(codes, zip(cnts, ovs))) for _, codes, cnts, ovs in per_class]
        for p in all_codes:
            entries = []
            overlap = 0
            for (label, *_), table in zip(per_class, lookup):
                hit = table.get(p)
                if hit is not None:
                    entries.append(f"{_s(label)}:{hit[0]}")
                    overlap = hit[1]
            if not first:
                out.write(",")
            first = False
            out.write(
                f'{{"feature":{_s(name)},"code":{code_str(p)},'
                f'"per_class_counts":{{{",".join(entries)}}},"overlap_classes":{overlap}}}'
            )
    out.write("]}\n")


def card_to_json(card: PatternCard) -> str:
    buf = io.StringIO()
    _write_card(buf, card)
    return buf.getvalue()


def export_card_json(card: PatternCard, path: str | os.PathLike) -> None:
    if not card.classes:
        raise ValueError("pattern cards require labelled data")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _write_card(fh, card)


def _expect(obj, key: str, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing key {key!r}")
    value = obj[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise SchemaError(f"key {key!r} has the wrong type")
    return value


def _read_tree(doc: dict, spec: BinSpec, levels: int) -> FeatureTree:
    cols = {k: [] for k in ("mean", "std", "min", "max", "count", "parent", "bin")}
    queue = [(doc, -1, 0)]
    head = 0
    while head < len(queue):
        node, parent, s = queue[head]
        idx = head
        head += 1
        for key in ("mean", "std", "min", "max"):
            cols[key].append(float(_expect(node, key, float)))
        cols["count"].append(_expect(node, "count", int))
        cols["parent"].append(parent)
        cols["bin"].append(s)
        children = _expect(node, "children", dict)
        try:
            ordered = sorted(((int(k), v) for k, v in children.items()), key=lambda kv: kv[0])
        except ValueError:
            raise SchemaError("tree child keys must be bin numbers") from None
        for bin_no, child in ordered:
            if not 1 <= bin_no <= spec.b:
                raise SchemaError(f"tree child bin {bin_no} outside 1..{spec.b}")
            queue.append((child, idx, bin_no))
    tree = FeatureTree(
        spec=spec,
        depth_limit=levels,
        mean=np.array(cols["mean"], dtype=np.float64),
        std=np.array(cols["std"], dtype=np.float64),
        min=np.array(cols["min"], dtype=np.float64),
        max=np.array(cols["max"], dtype=np.float64),
        count=np.array(cols["count"], dtype=np.int64),
        parent=np.array(cols["parent"], dtype=np.int64),
        bin=np.array(cols["bin"], dtype=np.int64),
    )
    if int(tree.depth.max()) > levels:
        raise SchemaError("tree deeper than the configured levels")
    return tree


def import_card_json(path: str | os.PathLike) -> PatternCard:
    """Load a card, rebuilding its model and checking every statistic."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a JSON document: {exc}") from None
    version = doc.get("version") if isinstance(doc, dict) else None
    if version != CARD_VERSION:
        raise SchemaError(f"unsupported card version {version!r} (expected {CARD_VERSION!r})")
    config = _expect(doc, "config", dict)
    try:
        spec = BinSpec(_expect(config, "bins", int))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    levels = _expect(config, "levels", int)
    min_freq = config.get("min_frequency")
    if min_freq is not None and not isinstance(min_freq, (int, float)):
        raise SchemaError("min_frequency must be a number or null")

    names, trees = [], []
    for feat in _expect(doc, "features", list):
        names.append(_expect(feat, "name", str))
        trees.append(_read_tree(_expect(feat, "tree", dict), spec, levels))
    model = PatternModel(spec, levels, tuple(names), tuple(trees))
    m = len(names)

    def pack(text: str) -> int:
        try:
            return pack_code(parse_code(text, spec.b), spec, levels)
        except ValueError as exc:
            raise SchemaError(f"bad code {text!r}: {exc}") from None

    raw_classes = _expect(doc, "classes", list)
    labels = [_expect(c, "label", str) for c in raw_classes]
    code_rows: dict[str, list[list[tuple[int, int, int]]]] = {k: [[] for _ in range(m)] for k in labels}
    name_index = {n: j for j, n in enumerate(names)}
    for entry in _expect(doc, "code_stats", list):
        j = name_index.get(_expect(entry, "feature", str))
        if j is None:
            raise SchemaError(f"code_stats refers to unknown feature {entry['feature']!r}")
        packed = pack(_expect(entry, "code", str))
        overlap = _expect(entry, "overlap_classes", int)
        for label, count in _expect(entry, "per_class_counts", dict).items():
            if label not in code_rows or not isinstance(count, int):
                raise SchemaError(f"code_stats refers to unknown class {label!r}")
            code_rows[label][j].append((packed, count, overlap))

    classes = []
    for c, label in zip(raw_classes, labels):
        combos = _expect(c, "combinations", list)
        rows = np.zeros((len(combos), m), dtype=np.int64)
        counts = np.zeros(len(combos), dtype=np.int64)
        overlaps = np.zeros(len(combos), dtype=np.int64)
        for r, combo in enumerate(combos):
            codes = _expect(combo, "codes", list)
            if len(codes) != m:
                raise SchemaError(f"class {label!r}: combination has {len(codes)} codes, expected {m}")
            rows[r] = [pack(t) for t in codes]
            counts[r] = _expect(combo, "count", int)
            overlaps[r] = _expect(combo, "overlap_classes", int)
        stats = []
        for j in range(m):
            entries = sorted(code_rows[label][j])
            arr = np.array(entries, dtype=np.int64).reshape(-1, 3)
            stats.append(CodeStats(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()))
        classes.append(
            ClassPattern(label, _expect(c, "n_instances", int), rows, counts, overlaps, tuple(stats))
        )
    n_rows = sum(cp.n_instances for cp in classes)
    card = PatternCard(model, tuple(classes), n_rows, None if min_freq is None else float(min_freq))
    validate_card(card)
    return card


def projected_to_csv(projected: ProjectedDataset) -> str:
    buf = io.StringIO()
    _write_projected(buf, projected)
    return buf.getvalue()


def _write_projected(out, projected: ProjectedDataset) -> None:
    b = projected.spec.b
    header = list(projected.feature_names)
    cols = []
    for j in range(projected.codes.shape[1]):
        uniq, inverse = np.unique(projected.codes[:, j], return_inverse=True)
        text = np.array(
            [format_code(unpack_code(p, projected.spec, projected.depth_limit), b) for p in uniq.tolist()], dtype=object
        )
        cols.append(text[inverse].tolist())
    if projected.labels is not None:
        header.append("label")
        cols.append([str(v) for v in projected.labels])
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(zip(*cols))


def export_projected_csv(projected: ProjectedDataset, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_projected(fh, projected)


def render_markdown_card(card: PatternCard, top: int = 10) -> str:
    model = card.model
    b = model.spec.b
    lines = [
        "# SPATA pattern card",
        "",
        "## Dataset summary",
        "",
        "| rows | features | classes | bins | levels |",
        "|---:|---:|---:|---:|---:|",
        f"| {card.n_rows} | {card.n_features} | {card.n_classes} | {b} | {model.depth_limit} |",
        "",
        "## Unique combinations per class",
        "",
        "A combination overlaps when at least one of its codes also occurs in another class; "
        "it is shared when the whole combination occurs in another class.",
        "",
        "| class | instances | unique combinations | overlapping | shared |",
        "|---|---:|---:|---:|---:|",
    ]
    total_unique = total_shared = 0
    for cp in card.classes:
        n_overlap = int(np.count_nonzero(_has_shared_code(cp)))
        n_shared = int(np.count_nonzero(cp.combo_overlaps > 1))
        total_unique += cp.n_unique
        total_shared += n_shared
        lines.append(f"| {_md(cp.label)} | {cp.n_instances} | {cp.n_unique} | {n_overlap} | {n_shared} |")

    lines += ["", f"## Most frequent combinations (top {top})", ""]
    for cp in card.classes:
        lines += [f"### Class {_md(cp.label)}", "", "| rank | combination | count | classes sharing |", "|---:|---|---:|---:|"]
        order = np.lexsort((np.arange(cp.n_unique), -cp.combo_counts))[:top]
        for rank, r in enumerate(order.tolist(), start=1):
            combo = ", ".join(format_code(card.unpack(p), b) for p in cp.combinations[r].tolist())
            lines.append(f"| {rank} | ({combo}) | {int(cp.combo_counts[r])} | {int(cp.combo_overlaps[r])} |")
        lines.append("")

    fraction = total_shared / total_unique if total_unique else 0.0
    lines += [
        "## Overlap summary",
        "",
        f"Combinations shared by more than one class: {total_shared} of {total_unique} "
        f"({fraction:.4f}).",
        "",
        "## Distinct codes per feature",
        "",
        "| feature | distinct codes | shared by >1 class |",
        "|---|---:|---:|",
    ]
    for j, name in enumerate(model.feature_names):
        seen: dict[int, int] = {}
        for cp in card.classes:
            st = cp.code_stats[j]
            seen.update(zip(st.codes.tolist(), st.overlaps.tolist()))
        shared = sum(1 for v in seen.values() if v > 1)
        lines.append(f"| {_md(name)} | {len(seen)} | {shared} |")
    lines += [
        "",
        "Tree statistics stored in the JSON card grow more specific with every level; "
        "review them before sharing a card built with many levels.",
        "",
    ]
    return "\n".join(lines)


def _has_shared_code(cp: ClassPattern) -> np.ndarray:
    shared = np.zeros(cp.n_unique, dtype=bool)
    for j, st in enumerate(cp.code_stats):
        pos = np.searchsorted(st.codes, cp.combinations[:, j])
        shared |= st.overlaps[pos] > 1
    return shared


def _md(text: str) -> str:
    return text.replace("|", "\\|")
