"""File formats: signed edge lists, label and matrix files, fitted-model
JSON documents, and construction of the trade/sanctions network."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from sbbm.model import Membership, NodeParams, SignedAdjacency

MODEL_FORMAT = "sbbm-model"
MODEL_VERSION = 1

_SIGNS = {"+1": 1, "1": 1, "+": 1, "-1": -1, "-": -1}


class EdgeListError(ValueError):
    """Malformed or inconsistent edge list; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def load_edge_list(path, diagonal_policy: str = "exclude") -> SignedAdjacency:
    """Read a tab-separated signed edge list ``node_a  node_b  sign``.

    Node ids are opaque strings indexed by first appearance. Blank lines and
    lines starting with ``#`` are skipped. Repeating a pair with the same
    sign is allowed; a conflicting sign is an error, as is a self-loop under
    ``diagonal_policy="exclude"``.
    """
    index: dict[str, int] = {}
    edges: dict[tuple[int, int], tuple[int, int]] = {}
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != 3:
                raise EdgeListError(f"expected 3 fields, got {len(fields)}", lineno)
            a, b, s = (f.strip() for f in fields)
            if s not in _SIGNS:
                raise EdgeListError(f"sign must be +1 or -1, got {s!r}", lineno)
            sign = _SIGNS[s]
            if a == b and diagonal_policy == "exclude":
                raise EdgeListError(f"self-loop on {a!r} with diagonal_policy='exclude'", lineno)
            i = index.setdefault(a, len(index))
            j = index.setdefault(b, len(index))
            key = (min(i, j), max(i, j))
            if key in edges and edges[key][0] != sign:
                raise EdgeListError(
                    f"conflicting sign for pair ({a!r}, {b!r}); first given on line {edges[key][1]}", lineno)
            edges.setdefault(key, (sign, lineno))
    if not index:
        raise EdgeListError("edge list is empty; a graph needs at least one node")
    n = len(index)
    entries = np.zeros((n, n), dtype=np.int8)
    for (i, j), (sign, _) in edges.items():
        entries[i, j] = entries[j, i] = sign
    return SignedAdjacency(entries, diagonal_policy, list(index))


def _node_names(adjacency: SignedAdjacency) -> list:
    if adjacency.node_ids is not None:
        return [str(x) for x in adjacency.node_ids]
    return [str(i) for i in range(adjacency.n)]


def write_edge_list(adjacency: SignedAdjacency, path) -> None:
    names = _node_names(adjacency)
    a = adjacency.entries
    k = 0 if adjacency.include_diagonal else 1
    rows, cols = np.nonzero(np.triu(a, k=k))
    with open(path, "w", newline="") as fh:
        for i, j in zip(rows, cols):
            fh.write(f"{names[i]}\t{names[j]}\t{'+1' if a[i, j] > 0 else '-1'}\n")


def write_labels(labels, path, node_ids=None) -> None:
    labels = np.asarray(labels)
    names = node_ids if node_ids is not None else range(labels.size)
    with open(path, "w", newline="") as fh:
        for name, lab in zip(names, labels):
            fh.write(f"{name}\t{int(lab)}\n")


def read_labels(path) -> dict[str, int]:
    out = {}
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != 2:
                raise EdgeListError(f"expected 'node<TAB>label', got {len(fields)} fields", lineno)
            try:
                out[fields[0]] = int(fields[1])
            except ValueError:
                raise EdgeListError(f"label must be an integer, got {fields[1]!r}", lineno) from None
    return out


def align_labels(mapping: dict, node_ids) -> np.ndarray:
    """Labels from ``mapping`` in ``node_ids`` order, renumbered densely."""
    missing = [v for v in node_ids if str(v) not in mapping]
    if missing:
        raise ValueError(f"no label for {len(missing)} node(s), e.g. {missing[0]!r}")
    raw = np.array([mapping[str(v)] for v in node_ids])
    _, dense = np.unique(raw, return_inverse=True)
    return dense


def write_matrix(mat, path) -> None:
    np.savetxt(path, np.asarray(mat, dtype=float), delimiter=",", fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


@dataclass
class ModelFile:
    """Fitted model document.

    The four parameter vectors and the labels are stored per node in the
    order of ``node_ids``; floats are written with full round-trip
    precision.
    """

    node_ids: list
    K: int
    params: NodeParams
    labels: np.ndarray
    nll: float
    diagonal_policy: str = "exclude"
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    version: int = MODEL_VERSION

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def membership(self) -> Membership:
        return Membership(self.labels, self.K)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "format": MODEL_FORMAT,
            "version": self.version,
            "n": self.n,
            "K": int(self.K),
            "diagonal_policy": self.diagonal_policy,
            "node_ids": [str(v) for v in self.node_ids],
            "labels": [int(v) for v in self.labels],
            "gamma_plus": [float(v) for v in p.gamma_plus],
            "eta_plus": [float(v) for v in p.eta_plus],
            "gamma_minus": [float(v) for v in p.gamma_minus],
            "eta_minus": [float(v) for v in p.eta_minus],
            "nll": float(self.nll),
            "diagnostics": self.diagnostics,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelFile":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a fitted-model document")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        n = doc["n"]
        params = NodeParams(*(np.asarray(doc[k], dtype=float)
                              for k in ("gamma_plus", "eta_plus", "gamma_minus", "eta_minus")))
        if params.n != n or len(doc["labels"]) != n or len(doc["node_ids"]) != n:
            raise ValueError("model document has inconsistent lengths")
        return cls(node_ids=list(doc["node_ids"]), K=int(doc["K"]), params=params,
                   labels=np.asarray(doc["labels"], dtype=np.int64), nll=float(doc["nll"]),
                   diagonal_policy=doc["diagonal_policy"], diagnostics=doc.get("diagnostics", {}),
                   config=doc.get("config", {}), version=doc["version"])


def save_model(model: ModelFile, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelFile:
    with open(path) as fh:
        return ModelFile.from_dict(json.load(fh))


@dataclass(frozen=True)
class IngestSpec:
    """Inputs for the trade/sanctions network.

    ``trade_path`` has columns ``economy_a, economy_b, year, trade_value``;
    ``sanctions_path`` has ``economy_a, economy_b, year_start, year_end``
    (an empty ``year_end`` means ongoing).
    """

    trade_path: str
    sanctions_path: str
    window: tuple = (2015, 2023)
    top_fraction: float = 1.0 / 30.0

    def __post_init__(self):
        lo, hi = self.window
        if lo > hi:
            raise ValueError(f"empty window {lo}:{hi}")
        if not 0 < self.top_fraction <= 1:
            raise ValueError("top_fraction must be in (0, 1]")


_TRADE_COLS = ("economy_a", "economy_b", "year", "trade_value")
_SANCTION_COLS = ("economy_a", "economy_b", "year_start", "year_end")


def _read_table(path, columns) -> pd.DataFrame:
    df = pd.read_csv(path, sep=None, engine="python", dtype={"economy_a": str, "economy_b": str})
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    return df


def _unordered(df: pd.DataFrame) -> pd.DataFrame:
    a, b = df["economy_a"].str.strip(), df["economy_b"].str.strip()
    out = df.assign(u=np.where(a <= b, a, b), v=np.where(a <= b, b, a))
    return out[out["u"] != out["v"]]


@dataclass
class IngestResult:
    adjacency: SignedAdjacency
    n_trading_pairs: int
    threshold_rank: int
    threshold_value: float

    @property
    def counts(self) -> dict:
        m_plus, m_minus = self.adjacency.edge_counts()
        return {"nodes": self.adjacency.n, "positive_edges": m_plus, "negative_edges": m_minus}


def build_real_network(spec: IngestSpec) -> IngestResult:
    """Signed network of economies from bilateral trade and sanctions.

    A pair is negative if any sanction record overlaps the window. Otherwise
    it is positive when its total trade over the window ranks within the top
    ``top_fraction`` of all pairs with positive trade; the rank threshold is
    ``ceil(top_fraction * #trading pairs)`` and pairs tied with the
    threshold value are kept. Nodes without edges are dropped; the rest are
    sorted by name.
    """
    lo, hi = spec.window
    trade = _unordered(_read_table(spec.trade_path, _TRADE_COLS))
    sanctions = _unordered(_read_table(spec.sanctions_path, _SANCTION_COLS))
    values = pd.to_numeric(trade["trade_value"], errors="raise")
    if (values < 0).any():
        raise ValueError("trade_value must be non-negative")

    in_window = trade[(trade["year"] >= lo) & (trade["year"] <= hi)]
    totals = in_window.groupby(["u", "v"])["trade_value"].sum()
    totals = totals[totals > 0]

    end = pd.to_numeric(sanctions["year_end"], errors="coerce").fillna(math.inf)
    start = pd.to_numeric(sanctions["year_start"], errors="raise")
    active = sanctions[(start <= hi) & (end >= lo)]
    negative = set(zip(active["u"], active["v"]))

    rank = threshold = 0
    positive = set()
    if len(totals):
        rank = math.ceil(spec.top_fraction * len(totals))
        threshold = float(np.sort(totals.to_numpy())[::-1][rank - 1])
        positive = {pair for pair, val in totals.items() if val >= threshold} - negative
    if not positive and not negative:
        raise ValueError("no pair qualifies for an edge in the window")

    nodes = sorted({x for pair in positive | negative for x in pair})
    index = {name: k for k, name in enumerate(nodes)}
    entries = np.zeros((len(nodes), len(nodes)), dtype=np.int8)
    for pairs, sign in ((positive, 1), (negative, -1)):
        for u, v in pairs:
            entries[index[u], index[v]] = entries[index[v], index[u]] = sign
    return IngestResult(SignedAdjacency(entries, "exclude", nodes), len(totals), rank, threshold)


def write_table(rows: list[dict], fmt: str, stream) -> None:
    """Emit a list of flat records as CSV or JSON."""
    if fmt == "json":
        json.dump(rows, stream, indent=1, default=_json_scalar)
        stream.write("\n")
        return
    if not rows:
        return
    writer = csv.DictWriter(stream, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})


def _json_scalar(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v

