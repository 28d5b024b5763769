"""Domain-independent projection of tabular data into hierarchical bin codes.

Typical use::

    from spata import BinSpec, load_csv, encode_categoricals, project_dataset, build_pattern_card

    table = load_csv("flows.csv", label_column="label")
    dataset = encode_categoricals(table)
    model, projected = project_dataset(dataset, BinSpec(9), depth_limit=8)
    card = build_pattern_card(projected, model)
"""

from .binning import BinInterval, BinSpec, FeatureStats, feature_stats, map_value, subdomain_bounds
from .cards import (
    export_card_json,
    export_projected_csv,
    import_card_json,
    render_markdown_card,
)
from .ingest import ColumnKind, DataError, Dataset, encode_categoricals, load_csv, stratified_split
from .pattern import (
    PatternCard,
    build_pattern_card,
    class_partition,
    code_overlaps,
    combo_overlaps,
    unique_combinations,
)
from .projection import (
    FeatureTree,
    PatternModel,
    ProjectedDataset,
    build_feature_tree,
    project_dataset,
    project_with_model,
    rmap_value,
)
from .viz import PlotOptions, code_to_ordinate, render_pattern_svg

__version__ = "0.1.0"

__all__ = [
    "BinInterval",
    "BinSpec",
    "ColumnKind",
    "DataError",
    "Dataset",
    "FeatureStats",
    "FeatureTree",
    "PatternCard",
    "PatternModel",
    "PlotOptions",
    "ProjectedDataset",
    "build_feature_tree",
    "build_pattern_card",
    "class_partition",
    "code_overlaps",
    "code_to_ordinate",
    "combo_overlaps",
    "encode_categoricals",
    "export_card_json",
    "export_projected_csv",
    "feature_stats",
    "import_card_json",
    "load_csv",
    "map_value",
    "project_dataset",
    "project_with_model",
    "render_markdown_card",
    "render_pattern_svg",
    "rmap_value",
    "stratified_split",
    "subdomain_bounds",
    "unique_combinations",
]
