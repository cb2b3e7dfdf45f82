"""Dataset ingestion, synthetic generators and artifact file formats."""

from __future__ import annotations

import csv
import itertools
import json
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .graph import Hypergraph, LineGraph, canonical_edges

KARATE_NODES = 34


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def read_edges(path, node_count: int | None = None) -> tuple[tuple[int, int], ...]:
    """Tab-separated ``src dst [weight]`` lines; the weight column is ignored here."""
    pairs = []
    for lineno, line in _data_lines(Path(path)):
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 'src<TAB>dst[<TAB>weight]'")
        try:
            u, v = int(parts[0]), int(parts[1])
            if len(parts) == 3:
                float(parts[2])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric field") from None
        if u < 0 or v < 0 or (node_count is not None and max(u, v) >= node_count):
            raise DataError(f"{path}:{lineno}: node id out of range")
        pairs.append((u, v))
    return canonical_edges(pairs)


def write_edges(path, edges) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in canonical_edges(edges):
            fh.write(f"{u}\t{v}\n")


def read_features(path, header: bool = False) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: no feature rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"{path}:{i + 1 + int(header)}: expected {width} columns, got {len(r)}")
        try:
            out[i] = [float(x) for x in r]
        except ValueError:
            raise DataError(f"{path}:{i + 1 + int(header)}: non-numeric feature") from None
    return out


def read_hyperedges(path, node_count: int | None = None) -> list[frozenset[int]]:
    out = []
    for lineno, line in _data_lines(Path(path)):
        try:
            ids = [int(x) for x in line.split()]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer node id") from None
        if any(i < 0 or (node_count is not None and i >= node_count) for i in ids):
            raise DataError(f"{path}:{lineno}: node id out of range")
        out.append(frozenset(ids))
    return out


def write_hyperedges(path, hyperedges) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in hyperedges:
            fh.write(" ".join(str(u) for u in sorted(e)) + "\n")


def write_line_graph(path, lg: LineGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in lg.edges:
            fh.write(f"{i}\t{j}\n")


def read_line_graph(path, node_count: int) -> LineGraph:
    return LineGraph(node_count, read_edges(path, node_count))


def degree_bucket_features(node_count: int, edges) -> np.ndarray:
    """One-hot of floor(log2(degree + 1))."""
    deg = np.zeros(node_count, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    buckets = np.floor(np.log2(deg + 1)).astype(np.int64)
    X = np.zeros((node_count, int(buckets.max()) + 1))
    X[np.arange(node_count), buckets] = 1.0
    return X


def load_dataset(edges, features=None, hyperedges=None, node_count: int | None = None,
                 feature_header: bool = False) -> Hypergraph:
    E = read_edges(edges)
    X = read_features(features, header=feature_header) if features else None
    if node_count is None:
        node_count = X.shape[0] if X is not None else (max(max(e) for e in E) + 1 if E else 0)
    if E and max(max(e) for e in E) >= node_count:
        raise DataError(f"{edges}: node id out of range for N={node_count}")
    if X is None:
        X = degree_bucket_features(node_count, E)
    elif X.shape[0] != node_count:
        raise DataError(f"feature rows ({X.shape[0]}) do not match N={node_count}")
    H = read_hyperedges(hyperedges, node_count) if hyperedges else ()
    return Hypergraph(X, tuple(H), E, node_count=node_count)


def karate_club() -> Hypergraph:
    ref = resources.files("hyperflow") / "data" / "karate_club.tsv"
    with resources.as_file(ref) as path:
        return load_dataset(path, node_count=KARATE_NODES)


@dataclass
class PlantedSpec:
    cliques: int = 2
    size: int = 8
    inter_p: float = 0.0
    noise: float = 0.1
    feature_dim: int | None = None


def generate_planted(spec: PlantedSpec, seed: int = 0) -> Hypergraph:
    """Disjoint cliques, Bernoulli(inter_p) cross edges, block features plus noise."""
    from .rng import stream

    rng = stream(seed, "data.planted")
    n = spec.cliques * spec.size
    block = np.repeat(np.arange(spec.cliques), spec.size)
    edges = []
    for c in range(spec.cliques):
        members = range(c * spec.size, (c + 1) * spec.size)
        edges.extend(itertools.combinations(members, 2))
    for u, v in itertools.combinations(range(n), 2):
        if block[u] != block[v] and rng.random() < spec.inter_p:
            edges.append((u, v))
    per = max(1, (spec.feature_dim or 4 * spec.cliques) // spec.cliques)
    X = np.zeros((n, per * spec.cliques))
    for u in range(n):
        X[u, block[u] * per:(block[u] + 1) * per] = 1.0
    X += spec.noise * rng.standard_normal(X.shape)
    return Hypergraph(X, (), tuple(edges), node_count=n)


def planted_blocks(spec: PlantedSpec) -> list[frozenset[int]]:
    return [frozenset(range(c * spec.size, (c + 1) * spec.size)) for c in range(spec.cliques)]


# checkpoint layout: 8-byte little-endian header length, UTF-8 JSON header,
# then every tensor as little-endian float64 in header order
def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries, offset = [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = json.dumps({"format": "hyperflow-checkpoint", "version": 1, "dtype": "<f8",
                         "tensors": entries, "meta": meta or {}}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    (hlen,) = struct.unpack_from("<Q", raw, 0)
    header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    body = raw[8 + hlen:]
    out = {}
    for e in header["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=e["offset"])
        out[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    return out, header.get("meta", {})


def write_embeddings(path, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(matrix):
            w.writerow([i, *(repr(float(x)) for x in row)])


def read_embeddings(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    rows.sort(key=lambda r: int(r[0]))
    return np.array([[float(x) for x in r[1:]] for r in rows])


def write_loss_history(path, history: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "pos_term", "neg_term"])
        for row in history:
            w.writerow([row["epoch"], repr(row["loss"]), repr(row["pos_term"]),
                        repr(row["neg_term"])])


def read_edge_weights(path) -> dict[tuple[int, int], float]:
    """Third-column weights of an edge file, keyed by canonical pair."""
    out = {}
    for lineno, line in _data_lines(Path(path)):
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) == 3:
            u, v = int(parts[0]), int(parts[1])
            out[(min(u, v), max(u, v))] = float(parts[2])
    return out


def write_pairs(path, pairs) -> None:
    """Ordered pairs, one ``u<TAB>v`` per line (no canonicalization)."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in np.asarray(pairs, dtype=np.int64).reshape(-1, 2):
            fh.write(f"{u}\t{v}\n")


def read_pairs(path) -> np.ndarray:
    rows = [tuple(int(x) for x in line.split("\t")) for _, line in _data_lines(Path(path))]
    return np.array(rows, dtype=np.int64).reshape(-1, 2)
