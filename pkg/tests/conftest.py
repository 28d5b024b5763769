import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spata.binning import BinSpec  # noqa: E402
from spata.ingest import Dataset  # noqa: E402
from spata.pattern import build_pattern_card  # noqa: E402
from spata.projection import ProjectedDataset, pack_code, parse_code, project_dataset  # noqa: E402


def make_projected(rows, labels, names=("f0", "f1"), b=9, levels=2) -> ProjectedDataset:
    spec = BinSpec(b)
    codes = np.array(
        [[pack_code(parse_code(c, b), spec, levels) for c in row] for row in rows], dtype=np.int64
    ).reshape(len(rows), len(names))
    return ProjectedDataset(tuple(names), codes, spec, levels, np.array(labels, dtype=object))


def dummy_model(names=("f0", "f1"), b=9, levels=2):
    rng = np.random.default_rng(0)
    data = Dataset(tuple(names), tuple(rng.normal(size=20) for _ in names), None)
    model, _ = project_dataset(data, BinSpec(b), levels)
    return model


@pytest.fixture
def toy_projected():
    rows = [("54", "3"), ("54", "3"), ("46", "3"), ("54", "7")]
    return make_projected(rows, ["A", "A", "A", "B"])


@pytest.fixture
def toy_card(toy_projected):
    return build_pattern_card(toy_projected, dummy_model(), min_frequency=0.01)


@pytest.fixture
def labelled_csv(tmp_path):
    """Small mixed-type labelled CSV."""
    rng = np.random.default_rng(42)
    path = tmp_path / "data.csv"
    protos = ["tcp", "udp", "icmp"]
    lines = ["duration,bytes,proto,label"]
    for i in range(120):
        label = "attack" if i % 3 == 0 else "benign"
        dur = rng.exponential(2.0 if label == "attack" else 5.0)
        size = int(rng.integers(40, 1500))
        proto = protos[int(rng.integers(0, 3))] if i % 17 else "gre"
        lines.append(f"{dur!r},{size},{proto},{label}")
    path.write_text("\n".join(lines) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(f"criterion {k}: {RESULTS[k]}")
