"""Dataset export/import: graph.json, series.csv, ground_truth.json, manifest.json.

Floats are serialized via shortest round-trip repr, so import is lossless
and re-exporting imported data reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .graph_encoder import DiffusionGraph, Edge, Node
from .synth import (
    AD_FEATURES,
    CONSUMER_FEATURES,
    SCHEMA_VERSION,
    SOCIAL_FEATURES,
    DatasetBundle,
    GroundTruth,
    TimeSeriesDataset,
)

GRAPH_FILE = "graph.json"
SERIES_FILE = "series.csv"
TRUTH_FILE = "ground_truth.json"
MANIFEST_FILE = "manifest.json"

_COLUMNS = ["series", "t", *SOCIAL_FEATURES, *AD_FEATURES, *CONSUMER_FEATURES, "y", "anomaly"]


def _jwrite(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _jread(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _floats(rows) -> list:
    return np.asarray(rows, dtype=np.float64).tolist()


def export_dataset(bundle: DatasetBundle, directory: str | Path) -> list[Path]:
    """Write the four dataset files; returns the paths written."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    graph = bundle.graph
    _jwrite(
        out / GRAPH_FILE,
        {
            "schema_version": SCHEMA_VERSION,
            "nodes": [{"id": n.id, "kind": n.kind} for n in graph.nodes],
            "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind} for e in graph.edges],
            "node_attrs": _floats(bundle.node_attrs),
            "series_seeds": [list(map(int, s)) for s in bundle.series_seeds],
        },
    )

    data = bundle.data
    with (out / SERIES_FILE).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for s in range(data.n_series):
            for t in range(data.steps):
                row = [s, t]
                row += [repr(float(v)) for v in data.social[s, t]]
                row += [repr(float(v)) for v in data.ad[s, t]]
                row += [repr(float(v)) for v in data.consumer[s, t]]
                row.append(repr(float(data.y[s, t])))
                row.append(int(data.anomaly[s, t]))
                writer.writerow(row)

    paths = [out / GRAPH_FILE, out / SERIES_FILE, out / MANIFEST_FILE]
    if bundle.truth is not None:
        truth = bundle.truth
        _jwrite(
            out / TRUTH_FILE,
            {
                "schema_version": SCHEMA_VERSION,
                "planted_ate": float(truth.planted_ate),
                "a0": float(truth.a0),
                "a1": float(truth.a1),
                "treatment": truth.treatment,
                "confounder": truth.confounder,
                "cf_low": _floats(truth.cf_low),
                "cf_high": _floats(truth.cf_high),
                "anomaly_steps": truth.anomaly_steps,
                "reach": _floats(truth.reach),
            },
        )
        paths.insert(2, out / TRUTH_FILE)

    _jwrite(out / MANIFEST_FILE, bundle.manifest)
    return paths


def _check_version(payload: dict, path: Path) -> None:
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path.name}: schema version {version!r}, expected {SCHEMA_VERSION}")


def load_dataset(directory: str | Path) -> DatasetBundle:
    """Exact inverse of export_dataset."""
    root = Path(directory)
    graph_payload = _jread(root / GRAPH_FILE)
    _check_version(graph_payload, root / GRAPH_FILE)
    graph = DiffusionGraph(
        nodes=[Node(id=n["id"], kind=n["kind"]) for n in graph_payload["nodes"]],
        edges=[Edge(src=e["src"], dst=e["dst"], kind=e["kind"]) for e in graph_payload["edges"]],
    )
    node_attrs = np.asarray(graph_payload["node_attrs"], dtype=np.float64)
    series_seeds = [list(map(int, s)) for s in graph_payload["series_seeds"]]

    manifest = _jread(root / MANIFEST_FILE)
    _check_version(manifest, root / MANIFEST_FILE)
    n_series = manifest["series"]
    steps = manifest["steps"]

    social = np.zeros((n_series, steps, len(SOCIAL_FEATURES)))
    ad = np.zeros((n_series, steps, len(AD_FEATURES)))
    consumer = np.zeros((n_series, steps, len(CONSUMER_FEATURES)))
    y = np.zeros((n_series, steps))
    anomaly = np.zeros((n_series, steps), dtype=np.int64)
    with (root / SERIES_FILE).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _COLUMNS:
            raise SchemaError(f"series.csv columns {header} do not match {_COLUMNS}")
        ns, na, nc = len(SOCIAL_FEATURES), len(AD_FEATURES), len(CONSUMER_FEATURES)
        for row in reader:
            s, t = int(row[0]), int(row[1])
            vals = row[2:]
            social[s, t] = [float(v) for v in vals[:ns]]
            ad[s, t] = [float(v) for v in vals[ns : ns + na]]
            consumer[s, t] = [float(v) for v in vals[ns + na : ns + na + nc]]
            y[s, t] = float(vals[ns + na + nc])
            anomaly[s, t] = int(vals[ns + na + nc + 1])
    data = TimeSeriesDataset(social=social, ad=ad, consumer=consumer, y=y, anomaly=anomaly)

    truth = None
    truth_path = root / TRUTH_FILE
    if truth_path.exists():
        payload = _jread(truth_path)
        _check_version(payload, truth_path)
        truth = GroundTruth(
            planted_ate=payload["planted_ate"],
            cf_low=np.asarray(payload["cf_low"], dtype=np.float64),
            cf_high=np.asarray(payload["cf_high"], dtype=np.float64),
            anomaly_steps=[list(map(int, s)) for s in payload["anomaly_steps"]],
            a0=payload["a0"],
            a1=payload["a1"],
            treatment=payload["treatment"],
            confounder=payload["confounder"],
            reach=np.asarray(payload["reach"], dtype=np.float64),
        )

    return DatasetBundle(
        graph=graph,
        node_attrs=node_attrs,
        series_seeds=series_seeds,
        data=data,
        truth=truth,
        manifest=manifest,
    )
