"""Telemetry and knowledge-graph ingestion, snapshot slicing, synthetic data.

A dataset is a telemetry table (time samples x data fields), a typed edge
list over the fields supplied by domain experts, and one class label per
field. The telemetry is imputed and min-max normalized, then cut into
fixed-length windows; each window becomes one static snapshot whose node
features are that node's samples within the window. The expert adjacency is
time-shared across snapshots: dynamics enter through the features.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError, SchemaError
from .rng import substream

SPEED_OF_LIGHT_MPS = 2.9979e8
DEFAULT_SAMPLE_RATE = 40.0
MIN_WINDOW_ROWS = 8


@dataclass
class TelemetryTable:
    field_names: list[str]
    rows: np.ndarray  # R x n float64, NaN marks a missing cell
    sample_rate: float = DEFAULT_SAMPLE_RATE

    @property
    def n_fields(self) -> int:
        return len(self.field_names)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


@dataclass
class TypedEdgeList:
    src: np.ndarray  # int node ids
    dst: np.ndarray
    etype: np.ndarray  # 1..n_types
    weight: np.ndarray  # [0, 1]
    n_nodes: int
    n_types: int

    def __len__(self) -> int:
        return len(self.src)

    def pairs(self) -> set[tuple[int, int]]:
        return {(int(s), int(d)) for s, d in zip(self.src, self.dst)}


@dataclass
class NodeLabelTable:
    labels: np.ndarray  # int class id per node
    class_names: list[str]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class HeteroSnapshot:
    features: np.ndarray  # n x d
    slices: list[np.ndarray]  # S matrices, each n x n in [0, 1], zero diagonal


@dataclass
class SnapshotSequence:
    snapshots: list[HeteroSnapshot]
    labels: np.ndarray
    class_names: list[str]
    field_names: list[str]
    provenance: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.snapshots[0].features.shape[0]

    @property
    def n_steps(self) -> int:
        return len(self.snapshots)

    @property
    def feature_dim(self) -> int:
        return self.snapshots[0].features.shape[1]

    @property
    def n_edge_types(self) -> int:
        return len(self.snapshots[0].slices)

    @property
    def slices(self) -> list[np.ndarray]:
        """The time-shared expert adjacency slices."""
        return self.snapshots[0].slices


def load_telemetry(path, sample_rate: float = DEFAULT_SAMPLE_RATE) -> TelemetryTable:
    """Read a telemetry CSV: header of field names, numeric body, empty = missing."""
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if not header or header == [""]:
            raise SchemaError(f"{path}: header row has zero columns")
        n = len(header)
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != n:
                raise ParseError(f"{path}:{lineno}: expected {n} cells, got {len(cells)}")
            parsed = np.empty(n, dtype=np.float64)
            for j, cell in enumerate(cells):
                cell = cell.strip()
                if cell == "":
                    parsed[j] = np.nan
                    continue
                try:
                    parsed[j] = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: cannot parse {cell!r} as a number")
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return TelemetryTable(field_names=header, rows=np.vstack(rows), sample_rate=float(sample_rate))


def impute_and_normalize(table: TelemetryTable) -> TelemetryTable:
    """Forward-fill gaps (column mean for leading ones), then min-max to [0,1].

    Constant columns map to 0.5. Idempotent: a second application is a no-op.
    """
    rows = table.rows.copy()
    for j, name in enumerate(table.field_names):
        col = rows[:, j]
        observed = col[~np.isnan(col)]
        if observed.size == 0:
            raise DataError(f"field {name!r} has no observed values")
        missing = np.isnan(col)
        if missing.any():
            idx = np.where(~missing, np.arange(col.size), -1)
            idx = np.maximum.accumulate(idx)
            filled = np.where(idx >= 0, col[np.maximum(idx, 0)], observed.mean())
            col = filled
        lo, hi = col.min(), col.max()
        rows[:, j] = 0.5 if hi == lo else (col - lo) / (hi - lo)
    return TelemetryTable(field_names=list(table.field_names), rows=rows, sample_rate=table.sample_rate)


def coherence_time(carrier_hz: float, speed_mps: float) -> float:
    """Channel coherence time via Clarke's rule: 9 / (16 pi f_d), f_d = v f / c.

    Note the unit pitfall: carrier frequencies are often quoted in MHz. A
    value like 3500 passed here means 3.5 kHz; a 3.5 GHz carrier is 3.5e9.
    """
    if speed_mps == 0:
        raise DataError("infinite coherence time; supply explicit window")
    if carrier_hz <= 0 or speed_mps < 0:
        raise DataError(f"carrier_hz and speed_mps must be positive, got {carrier_hz}, {speed_mps}")
    doppler_hz = speed_mps * carrier_hz / SPEED_OF_LIGHT_MPS
    return 9.0 / (16.0 * math.pi * doppler_hz)


def doppler_shift(carrier_hz: float, speed_mps: float) -> float:
    return speed_mps * carrier_hz / SPEED_OF_LIGHT_MPS


def slices_from_edges(edges: TypedEdgeList) -> list[np.ndarray]:
    """One n x n weight matrix per edge type."""
    out = []
    for s in range(1, edges.n_types + 1):
        a = np.zeros((edges.n_nodes, edges.n_nodes), dtype=np.float64)
        sel = edges.etype == s
        a[edges.src[sel], edges.dst[sel]] = edges.weight[sel]
        out.append(a)
    return out


def slice_snapshots(
    table: TelemetryTable,
    edges: TypedEdgeList,
    labels: NodeLabelTable,
    window_rows: int,
    min_window: int = MIN_WINDOW_ROWS,
    provenance: dict | None = None,
) -> SnapshotSequence:
    """Cut the telemetry into windows of `window_rows` samples.

    Snapshot t's feature matrix is the transpose of window t, so node i's
    feature vector is its window_rows samples. Trailing remainder rows are
    dropped. All snapshots share the expert adjacency slices.
    """
    if window_rows < min_window:
        raise ConfigError(
            f"window_rows={window_rows} is below the minimum {min_window}; the coherence time is "
            "shorter than the sampling interval supports, supply an explicit row count"
        )
    r = table.n_rows
    if r < window_rows:
        raise DataError(f"table has {r} rows, fewer than window_rows={window_rows}")
    if edges.n_nodes != table.n_fields:
        raise SchemaError(f"edge list covers {edges.n_nodes} nodes but table has {table.n_fields} fields")
    if labels.labels.shape[0] != table.n_fields:
        raise SchemaError(f"{labels.labels.shape[0]} labels for {table.n_fields} fields")
    shared = slices_from_edges(edges)
    t_count = r // window_rows
    snapshots = []
    for t in range(t_count):
        window = table.rows[t * window_rows : (t + 1) * window_rows]
        snapshots.append(HeteroSnapshot(features=np.ascontiguousarray(window.T), slices=shared))
    return SnapshotSequence(
        snapshots=snapshots,
        labels=labels.labels.copy(),
        class_names=list(labels.class_names),
        field_names=list(table.field_names),
        provenance=provenance or {},
    )


def load_edges(path, field_names: list[str], n_types: int | None = None) -> TypedEdgeList:
    """Read an edge CSV with header src,dst,type,weight; names resolve to header order."""
    path = Path(path)
    index = {name: i for i, name in enumerate(field_names)}
    src, dst, etype, weight = [], [], [], []
    seen = set()
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = [h.strip() for h in next(reader, [])]
        if header != ["src", "dst", "type", "weight"]:
            raise SchemaError(f"{path}: expected header src,dst,type,weight, got {header}")
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 cells, got {len(cells)}")
            s_name, d_name, t_str, w_str = (c.strip() for c in cells)
            if s_name not in index:
                raise SchemaError(f"{path}:{lineno}: unknown node name {s_name!r}")
            if d_name not in index:
                raise SchemaError(f"{path}:{lineno}: unknown node name {d_name!r}")
            try:
                t = int(t_str)
                w = float(w_str)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: cannot parse type/weight {t_str!r},{w_str!r}")
            if t < 1:
                raise SchemaError(f"{path}:{lineno}: edge type {t} must be >= 1")
            if not 0.0 <= w <= 1.0:
                raise SchemaError(f"{path}:{lineno}: weight {w} outside [0, 1]")
            i, j = index[s_name], index[d_name]
            if i == j:
                raise SchemaError(f"{path}:{lineno}: self-loop on {s_name!r} not allowed")
            key = (i, j, t)
            if key in seen:
                raise SchemaError(f"{path}:{lineno}: duplicate edge ({s_name},{d_name},{t})")
            seen.add(key)
            src.append(i)
            dst.append(j)
            etype.append(t)
            weight.append(w)
    if not src:
        raise DataError(f"{path}: no edges")
    max_type = max(etype)
    if n_types is not None and max_type > n_types:
        raise SchemaError(f"{path}: edge type {max_type} exceeds declared edge-type count {n_types}")
    return TypedEdgeList(
        src=np.asarray(src, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        etype=np.asarray(etype, dtype=np.int64),
        weight=np.asarray(weight, dtype=np.float64),
        n_nodes=len(field_names),
        n_types=n_types if n_types is not None else max_type,
    )


def load_labels(path, field_names: list[str]) -> NodeLabelTable:
    """Read a label CSV with header node,class; every node labeled exactly once."""
    path = Path(path)
    index = {name: i for i, name in enumerate(field_names)}
    by_node: dict[int, str] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = [h.strip() for h in next(reader, [])]
        if header != ["node", "class"]:
            raise SchemaError(f"{path}: expected header node,class, got {header}")
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 cells, got {len(cells)}")
            name, cls = cells[0].strip(), cells[1].strip()
            if name not in index:
                raise SchemaError(f"{path}:{lineno}: unknown node name {name!r}")
            i = index[name]
            if i in by_node:
                raise SchemaError(f"{path}:{lineno}: node {name!r} labeled twice")
            by_node[i] = cls
    missing = [name for name, i in index.items() if i not in by_node]
    if missing:
        raise DataError(f"{path}: unlabeled nodes {missing[:5]}")
    class_names = sorted(set(by_node.values()))
    if len(class_names) < 2:
        raise DataError(f"{path}: need at least 2 classes, got {len(class_names)}")
    class_id = {c: k for k, c in enumerate(class_names)}
    labels = np.asarray([class_id[by_node[i]] for i in range(len(field_names))], dtype=np.int64)
    return NodeLabelTable(labels=labels, class_names=class_names)


def load_kg(edges_path, labels_path, field_names: list[str], n_types: int | None = None):
    return load_edges(edges_path, field_names, n_types=n_types), load_labels(labels_path, field_names)


def synthetic_tables(
    seed: int,
    n: int = 82,
    classes: int = 10,
    edge_types: int = 3,
    snapshots: int = 8,
    dim: int = 32,
    planted: int = 133,
    noise: float = 0.01,
    coupling: float = 0.5,
    drive_amp: float = 0.15,
) -> tuple[TelemetryTable, TypedEdgeList, NodeLabelTable]:
    """Build the synthetic telemetry table, planted edges, and labels.

    Classes are assigned round-robin. Each field follows an AR(1) recurrence
    x(tau+1) = 0.9 x(tau) + 0.1 drive_c(tau) + eta driven by its class's
    signal: a class level plus a slow class-specific oscillation. The
    oscillation gives every class a distinctive temporal shape that survives
    the per-column min-max normalization (a constant level would not: the
    rescaling maps every column onto [0, 1]). Each planted edge (u, v) feeds
    half of u's centered fluctuation into v one sample later, so planted
    pairs carry lagged correlation beyond the shared class shape. The table
    comes back already normalized, so ingestion reproduces it exactly.
    """
    if n < classes:
        raise ConfigError(f"need n >= classes, got n={n}, classes={classes}")
    if snapshots < 1 or dim < 1:
        raise ConfigError(f"snapshots and dim must be >= 1, got {snapshots}, {dim}")
    labels = np.arange(n, dtype=np.int64) % classes
    class_names = [f"c{c:02d}" for c in range(classes)]
    field_names = [f"field_{i:03d}" for i in range(n)]

    # plant directed edges among same-class pairs, canonical order, no repeats
    pairs = [
        (i, j)
        for c in range(classes)
        for i in np.flatnonzero(labels == c)
        for j in np.flatnonzero(labels == c)
        if i != j
    ]
    if planted > len(pairs):
        raise ConfigError(f"cannot plant {planted} edges, only {len(pairs)} same-class pairs exist")
    rng_e = substream(seed, "synthetic-edges")
    chosen = np.sort(rng_e.choice(len(pairs), size=planted, replace=False))
    src = np.asarray([pairs[i][0] for i in chosen], dtype=np.int64)
    dst = np.asarray([pairs[i][1] for i in chosen], dtype=np.int64)
    etype = rng_e.integers(1, edge_types + 1, size=planted).astype(np.int64)
    edges = TypedEdgeList(
        src=src,
        dst=dst,
        etype=etype,
        weight=np.ones(planted, dtype=np.float64),
        n_nodes=n,
        n_types=edge_types,
    )

    # AR(1) fluctuations with burn-in; one extra sample feeds the unit lag
    rng_f = substream(seed, "synthetic-features")
    r = snapshots * dim
    burn = 100
    a = np.zeros((burn + r + 1, n), dtype=np.float64)
    eta = rng_f.normal(0.0, noise, size=(burn + r, n))
    for tau in range(burn + r):
        a[tau + 1] = 0.9 * a[tau] + eta[tau]
    a = a[burn:]

    # class drives: level + slow random trajectory, filtered through the
    # recurrence. Knot interpolation keeps the drive nearly constant within
    # one window, so a single snapshot pins a class down poorly while the
    # whole trajectory separates classes cleanly.
    amp = drive_amp
    knots = 5
    mu = np.linspace(0.15, 0.85, classes)
    knot_vals = rng_f.uniform(-1.0, 1.0, size=(classes, knots))
    taus = np.arange(r, dtype=np.float64)
    knot_pos = np.linspace(0.0, r - 1.0, knots)
    drive = mu[None, :] + amp * np.column_stack(
        [np.interp(taus, knot_pos, knot_vals[c]) for c in range(classes)]
    )
    det = np.empty((r + 1, classes), dtype=np.float64)
    det[0] = mu
    for tau in range(r):
        det[tau + 1] = 0.9 * det[tau] + 0.1 * drive[tau]

    couple = np.zeros((n, n), dtype=np.float64)
    couple[src, dst] = coupling
    x = det[1:, labels] + a[1:] + a[:-1] @ couple

    table = TelemetryTable(field_names=field_names, rows=x, sample_rate=DEFAULT_SAMPLE_RATE)
    table = impute_and_normalize(table)
    label_table = NodeLabelTable(labels=labels, class_names=class_names)
    return table, edges, label_table


def generate_synthetic(
    seed: int,
    n: int = 82,
    classes: int = 10,
    edge_types: int = 3,
    snapshots: int = 8,
    dim: int = 32,
    planted: int = 133,
    noise: float = 0.01,
    coupling: float = 0.5,
    drive_amp: float = 0.15,
) -> tuple[SnapshotSequence, TypedEdgeList]:
    """Deterministic synthetic snapshot sequence plus ground-truth edges.

    The planted edges double as the expert adjacency slices: the expert
    view is what structure learning starts from, and here it is exact.
    """
    table, edges, label_table = synthetic_tables(
        seed, n, classes, edge_types, snapshots, dim, planted, noise, coupling, drive_amp
    )
    provenance = {
        "source": "synthetic",
        "seed": int(seed),
        "nodes": n,
        "classes": classes,
        "edge_types": edge_types,
        "snapshots": snapshots,
        "dim": dim,
        "planted": planted,
    }
    seq = slice_snapshots(table, edges, label_table, window_rows=dim, min_window=1, provenance=provenance)
    return seq, edges


def _format_value(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_dataset(
    out_dir,
    table: TelemetryTable,
    edges: TypedEdgeList,
    labels: NodeLabelTable,
    window_rows: int,
    truth: TypedEdgeList | None = None,
) -> None:
    """Write the three-file dataset format (plus ground truth when known)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "telemetry.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(table.field_names)
        for row in table.rows:
            w.writerow([_format_value(v) for v in row])
    _write_edges(out / "edges.csv", edges, table.field_names)
    if truth is not None:
        _write_edges(out / "truth_edges.csv", truth, table.field_names)
    with open(out / "labels.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["node", "class"])
        for i, name in enumerate(table.field_names):
            w.writerow([name, labels.class_names[labels.labels[i]]])
    meta = {
        "edge_types": edges.n_types,
        "sample_rate": table.sample_rate,
        "window_rows": int(window_rows),
    }
    with open(out / "dataset.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_edges(path, edges: TypedEdgeList, field_names: list[str]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["src", "dst", "type", "weight"])
        for s, d, t, wt in zip(edges.src, edges.dst, edges.etype, edges.weight):
            w.writerow([field_names[s], field_names[d], int(t), repr(float(wt))])


def load_dataset(data_dir) -> SnapshotSequence:
    """Load a dataset directory written by write_dataset (or the synth command)."""
    data_dir = Path(data_dir)
    meta_path = data_dir / "dataset.json"
    if not meta_path.exists():
        raise DataError(f"{data_dir}: missing dataset.json; not a dataset directory")
    with open(meta_path) as f:
        meta = json.load(f)
    table = load_telemetry(data_dir / "telemetry.csv", sample_rate=meta.get("sample_rate", DEFAULT_SAMPLE_RATE))
    table = impute_and_normalize(table)
    edges, labels = load_kg(
        data_dir / "edges.csv",
        data_dir / "labels.csv",
        table.field_names,
        n_types=meta.get("edge_types"),
    )
    provenance = {"source": str(data_dir)}
    return slice_snapshots(table, edges, labels, window_rows=int(meta["window_rows"]), provenance=provenance)
