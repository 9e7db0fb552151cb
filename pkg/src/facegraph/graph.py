"""Face graphs over five fiducial points and per-person bunch graphs.

A face graph labels each fiducial point with a jet and each of the ten node
pairs with a displacement vector.  A bunch graph stacks the jets of several
model graphs of one person per node; matching a new face against it picks,
node by node, the best-fitting stack entry.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BankMismatch, DataError, DegenerateJet, InvalidInput, OutOfBounds
from .gabor import (
    GaborBank,
    Jet,
    compensated_similarity_matrix,
    wave_vectors,
)
from .raster import PixelFormat, RasterImage

log = logging.getLogger(__name__)

FIDUCIAL_NAMES = ("left_iris", "right_iris", "nose_tip", "upper_lip_tip", "chin_tip")
EDGE_PAIRS = tuple(
    (FIDUCIAL_NAMES[i], FIDUCIAL_NAMES[j])
    for i in range(len(FIDUCIAL_NAMES))
    for j in range(i + 1, len(FIDUCIAL_NAMES))
)
DEFAULT_WINDOW = 5
DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class FiducialSet:
    """The five named landmark positions inside a normalized face crop."""

    points: dict[str, tuple[int, int]]

    def __post_init__(self):
        if set(self.points) != set(FIDUCIAL_NAMES):
            raise InvalidInput(f"fiducial set must name exactly {FIDUCIAL_NAMES}")

    def __getitem__(self, name: str) -> tuple[int, int]:
        return self.points[name]


@dataclass(frozen=True)
class GraphNode:
    name: str
    position: tuple[int, int]
    jet: Jet


@dataclass(frozen=True)
class GraphEdge:
    pair: tuple[str, str]
    vector: tuple[float, float]  # position(second) - position(first)


@dataclass(frozen=True)
class FaceGraph:
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    bank_params: dict

    def node(self, name: str) -> GraphNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


@dataclass(frozen=True)
class FaceBunchGraph:
    person_id: str
    node_stacks: dict[str, tuple[Jet, ...]]
    mean_positions: dict[str, tuple[float, float]]
    edge_refs: tuple[GraphEdge, ...]
    bank_params: dict

    @property
    def stack_height(self) -> int:
        return len(self.node_stacks[FIDUCIAL_NAMES[0]])


def _edges_from_positions(positions: dict[str, tuple[float, float]]) -> tuple[GraphEdge, ...]:
    out = []
    for a, b in EDGE_PAIRS:
        (ax, ay), (bx, by) = positions[a], positions[b]
        out.append(GraphEdge((a, b), (float(bx - ax), float(by - ay))))
    return tuple(out)


def build_face_graph(face: RasterImage, fiducials: FiducialSet, bank: GaborBank) -> FaceGraph:
    """Extract a jet at every fiducial point and record all edge vectors."""
    face.require(PixelFormat.GRAY8)
    for name in FIDUCIAL_NAMES:
        x, y = fiducials[name]
        if not (0 <= x < face.width and 0 <= y < face.height):
            raise OutOfBounds(f"fiducial {name} at ({x}, {y}) outside {face.width}x{face.height} crop")
    from .gabor import extract_jets

    positions = [fiducials[name] for name in FIDUCIAL_NAMES]
    jets = extract_jets(face, positions, bank)
    nodes = tuple(
        GraphNode(name, tuple(int(v) for v in fiducials[name]), jet)
        for name, jet in zip(FIDUCIAL_NAMES, jets)
    )
    placed = {n.name: n.position for n in nodes}
    return FaceGraph(nodes=nodes, edges=_edges_from_positions(placed), bank_params=bank.fingerprint)


def build_bunch_graph(person_id: str, graphs: list[FaceGraph]) -> FaceBunchGraph:
    """Stack per-node jets of several model graphs of one person.

    Mean positions and mean edge vectors become the geometric reference the
    localization search and the edge term of the similarity measure use.
    """
    if not graphs:
        raise InvalidInput("need at least one model graph")
    params = graphs[0].bank_params
    for g in graphs[1:]:
        if g.bank_params != params:
            raise BankMismatch("model graphs come from different bank configurations")
    stacks = {
        name: tuple(g.node(name).jet for g in graphs) for name in FIDUCIAL_NAMES
    }
    mean_positions = {
        name: (
            float(np.mean([g.node(name).position[0] for g in graphs])),
            float(np.mean([g.node(name).position[1] for g in graphs])),
        )
        for name in FIDUCIAL_NAMES
    }
    return FaceBunchGraph(
        person_id=person_id,
        node_stacks=stacks,
        mean_positions=mean_positions,
        edge_refs=_edges_from_positions(mean_positions),
        bank_params=params,
    )


def _stack_arrays(stack: tuple[Jet, ...]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.stack([j.magnitudes for j in stack]),
        np.stack([j.phases for j in stack]),
    )


def localize_nodes(
    face: RasterImage,
    bunch: FaceBunchGraph,
    bank: GaborBank,
    window: int = DEFAULT_WINDOW,
) -> FaceGraph:
    """Fit the bunch graph's nodes to a new face.

    Every node is searched on the integer grid within ``window`` pixels
    (Chebyshev) of its rounded mean position, clipped to the crop; the
    position with the best displacement-compensated similarity against any
    stack entry wins.  Ties prefer smaller offsets, then row-major order.
    """
    face.require(PixelFormat.GRAY8)
    if bank.fingerprint != bunch.bank_params:
        raise BankMismatch("bank does not match the bunch graph's parameters")
    if window < 0:
        raise InvalidInput("window must be non-negative")
    from .gabor import extract_jets

    offsets = [(dx, dy) for dy in range(-window, window + 1) for dx in range(-window, window + 1)]
    all_positions: list[tuple[int, int]] = []
    node_slices: dict[str, tuple[int, list[tuple[int, int]]]] = {}
    for name in FIDUCIAL_NAMES:
        mx, my = bunch.mean_positions[name]
        cx = min(max(int(np.floor(mx + 0.5)), 0), face.width - 1)
        cy = min(max(int(np.floor(my + 0.5)), 0), face.height - 1)
        cands = [
            (cx + dx, cy + dy)
            for dx, dy in offsets
            if 0 <= cx + dx < face.width and 0 <= cy + dy < face.height
        ]
        node_slices[name] = (len(all_positions), cands)
        all_positions.extend(cands)
    jets = extract_jets(face, all_positions, bank)

    placed: dict[str, tuple[int, int]] = {}
    chosen_jets: dict[str, Jet] = {}
    for name in FIDUCIAL_NAMES:
        start, cands = node_slices[name]
        cand_jets = jets[start : start + len(cands)]
        mags = np.stack([j.magnitudes for j in cand_jets])
        if np.any(np.sqrt(np.sum(mags**2, axis=-1)) == 0.0):
            raise DegenerateJet(f"textureless candidates while localizing node {name}")
        phases = np.stack([j.phases for j in cand_jets])
        s_mags, s_phases = _stack_arrays(bunch.node_stacks[name])
        scores = compensated_similarity_matrix(mags, phases, s_mags, s_phases, bank.kvecs).max(axis=1)
        mx, my = bunch.mean_positions[name]
        cx = min(max(int(np.floor(mx + 0.5)), 0), face.width - 1)
        cy = min(max(int(np.floor(my + 0.5)), 0), face.height - 1)
        best = None
        for idx, (x, y) in enumerate(cands):
            cheb = max(abs(x - cx), abs(y - cy))
            key = (scores[idx], -cheb, -idx)
            if best is None or key > best[0]:
                best = (key, idx)
        idx = best[1]
        placed[name] = cands[idx]
        chosen_jets[name] = cand_jets[idx]
    nodes = tuple(GraphNode(name, placed[name], chosen_jets[name]) for name in FIDUCIAL_NAMES)
    return FaceGraph(nodes=nodes, edges=_edges_from_positions(placed), bank_params=bank.fingerprint)


def graph_similarity(graph: FaceGraph, bunch: FaceBunchGraph, lam: float = DEFAULT_LAMBDA) -> float:
    """Similarity between an image graph and a bunch graph.

    The jet term averages, over nodes, the best compensated similarity
    against the node's stack; the edge term penalizes squared relative
    deviation of edge vectors from the bunch reference, weighted by lam.
    Reference edges of zero length are skipped (logged) but still count
    toward the edge normalizer.
    """
    if graph.bank_params != bunch.bank_params:
        raise BankMismatch("graph and bunch graph use different bank configurations")
    kvecs, _, _ = wave_vectors(
        graph.bank_params["n_freq"],
        graph.bank_params["n_orient"],
        graph.bank_params["restrict_frequency"],
    )
    jet_total = 0.0
    for name in FIDUCIAL_NAMES:
        jet = graph.node(name).jet
        s_mags, s_phases = _stack_arrays(bunch.node_stacks[name])
        scores = compensated_similarity_matrix(
            jet.magnitudes[None, :], jet.phases[None, :], s_mags, s_phases, kvecs
        )
        jet_total += float(scores.max())
    jet_term = jet_total / len(FIDUCIAL_NAMES)

    edge_total = 0.0
    ref_by_pair = {e.pair: e.vector for e in bunch.edge_refs}
    for edge in graph.edges:
        rx, ry = ref_by_pair[edge.pair]
        ref_sq = rx * rx + ry * ry
        if ref_sq == 0.0:
            log.warning("skipping zero-length reference edge %s", edge.pair)
            continue
        dx = edge.vector[0] - rx
        dy = edge.vector[1] - ry
        edge_total += (dx * dx + dy * dy) / ref_sq
    return jet_term - lam / len(graph.edges) * edge_total


# ---------------------------------------------------------------------------
# serialization

def bunch_to_dict(bunch: FaceBunchGraph) -> dict:
    return {
        "version": 1,
        "person_id": bunch.person_id,
        "bank": bunch.bank_params,
        "nodes": {
            name: {
                "mean_pos": [bunch.mean_positions[name][0], bunch.mean_positions[name][1]],
                "stack": [
                    [[float(a), float(p)] for a, p in zip(jet.magnitudes, jet.phases)]
                    for jet in bunch.node_stacks[name]
                ],
            }
            for name in FIDUCIAL_NAMES
        },
        "edges": [
            {"pair": list(e.pair), "ref": [e.vector[0], e.vector[1]]} for e in bunch.edge_refs
        ],
    }


def bunch_from_dict(doc: dict) -> FaceBunchGraph:
    try:
        bank_params = {
            "sigma": float(doc["bank"]["sigma"]),
            "n_freq": int(doc["bank"]["n_freq"]),
            "n_orient": int(doc["bank"]["n_orient"]),
            "radius": None if doc["bank"]["radius"] is None else int(doc["bank"]["radius"]),
            "restrict_frequency": bool(doc["bank"]["restrict_frequency"]),
        }
        stacks: dict[str, tuple[Jet, ...]] = {}
        means: dict[str, tuple[float, float]] = {}
        for name in FIDUCIAL_NAMES:
            node = doc["nodes"][name]
            mx, my = float(node["mean_pos"][0]), float(node["mean_pos"][1])
            means[name] = (mx, my)
            pos = (int(np.floor(mx + 0.5)), int(np.floor(my + 0.5)))
            stacks[name] = tuple(
                Jet(
                    np.array([c[0] for c in coeffs]),
                    np.array([c[1] for c in coeffs]),
                    pos,
                )
                for coeffs in node["stack"]
            )
        edges = tuple(
            GraphEdge((e["pair"][0], e["pair"][1]), (float(e["ref"][0]), float(e["ref"][1])))
            for e in doc["edges"]
        )
        return FaceBunchGraph(
            person_id=str(doc["person_id"]),
            node_stacks=stacks,
            mean_positions=means,
            edge_refs=edges,
            bank_params=bank_params,
        )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise DataError(f"malformed bunch graph document: {exc}") from exc


def save_bunch_graph(bunch: FaceBunchGraph, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(bunch_to_dict(bunch), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_bunch_graph(path: str | Path) -> FaceBunchGraph:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    return bunch_from_dict(doc)


def load_fiducials(path: str | Path) -> dict[str, FiducialSet]:
    """Parse an annotation CSV: image_path followed by five x,y pairs.

    Rows have exactly 11 fields in the canonical fiducial order; a header
    row starting with ``image_path`` is allowed and skipped.
    """
    out: dict[str, FiducialSet] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and row[0].strip() == "image_path"):
                continue
            if len(row) != 11:
                raise DataError(f"{path}:{lineno}: expected 11 fields, got {len(row)}")
            try:
                coords = [int(np.floor(float(v) + 0.5)) for v in row[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric coordinate: {exc}") from exc
            points = {
                name: (coords[2 * i], coords[2 * i + 1]) for i, name in enumerate(FIDUCIAL_NAMES)
            }
            out[row[0].strip()] = FiducialSet(points)
    return out
