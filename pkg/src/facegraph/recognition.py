"""Thresholding limiter, recognition index and the final match decision.

Per-model graph similarities become binary outputs through a threshold; the
weighted sum of those outputs is the recognition index R.  With weights whose
subset sums are all distinct (the power-of-two default), R decodes uniquely
back to the set of models that fired: zero means no match, a single weight is
a perfect match, and any other sum is an over-recognition that needs manual
correction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

from .errors import DegenerateJet, InvalidConfig, InvalidInput, InternalError
from .gabor import GaborBank
from .graph import DEFAULT_LAMBDA, DEFAULT_WINDOW, FaceBunchGraph, graph_similarity, localize_nodes

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.9984  # midpoint of the observed similar/dissimilar band

NO_MATCH = "no_match"
MATCH = "match"
OVER_RECOGNITION = "over_recognition"


def default_weights(count: int) -> tuple[int, ...]:
    """Powers of two: every subset sum is distinct, so R decodes uniquely."""
    return tuple(2**i for i in range(count))


def _subset_sums_distinct(weights) -> bool:
    if len(weights) > 20:
        # exhaustive check is too big; superincreasing weights are sufficient
        return all(w > sum(weights[:i]) for i, w in enumerate(sorted(weights)))
    seen = set()
    for r in range(len(weights) + 1):
        for combo in combinations(range(len(weights)), r):
            s = sum(weights[i] for i in combo)
            if s in seen:
                return False
            seen.add(s)
    return True


@dataclass(frozen=True)
class RecognitionConfig:
    threshold: float = DEFAULT_THRESHOLD
    weights: tuple[float, ...] | None = None  # None -> powers of two per model
    lam: float = DEFAULT_LAMBDA
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.weights is not None:
            if any(w <= 0 for w in self.weights):
                raise InvalidConfig("weights must be strictly positive")
            if not _subset_sums_distinct(self.weights):
                raise InvalidConfig("weights must have pairwise-distinct subset sums")

    def weights_for(self, count: int) -> tuple[float, ...]:
        if self.weights is None:
            return default_weights(count)
        if len(self.weights) != count:
            raise InvalidConfig(f"{len(self.weights)} weights configured for {count} models")
        return self.weights


@dataclass(frozen=True)
class Decision:
    kind: str
    persons: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"type": self.kind, "persons": list(self.persons)}


@dataclass(frozen=True)
class RecognitionOutcome:
    similarities: dict[str, float]
    outputs: dict[str, int]
    index: float
    decision: Decision
    diagnostics: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "similarities": dict(self.similarities),
            "outputs": dict(self.outputs),
            "index": self.index,
            "decision": self.decision.to_dict(),
        }


def threshold_outputs(similarities, threshold: float = DEFAULT_THRESHOLD) -> list[int]:
    """Binary limiter: 1 iff the similarity reaches the threshold (inclusive)."""
    return [1 if s >= threshold else 0 for s in similarities]


def recognition_index(outputs, weights) -> float:
    """Weighted sum R of the binary outputs."""
    if len(outputs) != len(weights):
        raise InvalidInput(f"{len(outputs)} outputs but {len(weights)} weights")
    return float(sum(o * w for o, w in zip(outputs, weights)))


def _decode_subset(r: float, weights) -> tuple[int, ...]:
    if r == 0:
        return ()
    order = sorted(range(len(weights)), key=lambda i: -weights[i])
    if all(
        weights[i] > sum(weights[j] for j in order[k + 1 :]) for k, i in enumerate(order)
    ):
        # superincreasing: greedy decode
        remaining = r
        picked = []
        for i in order:
            if weights[i] <= remaining:
                picked.append(i)
                remaining -= weights[i]
        if remaining == 0:
            return tuple(sorted(picked))
        raise InternalError(f"index {r} is not a subset sum of the weights")
    for size in range(1, len(weights) + 1):
        for combo in combinations(range(len(weights)), size):
            if sum(weights[i] for i in combo) == r:
                return combo
    raise InternalError(f"index {r} is not a subset sum of the weights")


def classify(r: float, weights, labels=None) -> Decision:
    """Decode the recognition index into a decision.

    Zero is no match, exactly one weight is a perfect match, and any other
    (unique) subset sum is an over-recognition naming every matched model.
    """
    if not _subset_sums_distinct(tuple(weights)):
        raise InvalidConfig("weights must have pairwise-distinct subset sums")
    labels = list(labels) if labels is not None else list(range(len(weights)))
    subset = _decode_subset(r, list(weights))
    if not subset:
        return Decision(NO_MATCH)
    persons = tuple(str(labels[i]) for i in subset)
    if len(subset) == 1:
        return Decision(MATCH, persons)
    return Decision(OVER_RECOGNITION, persons)


def recognize(
    candidate,
    models: list[FaceBunchGraph],
    bank: GaborBank,
    config: RecognitionConfig | None = None,
) -> RecognitionOutcome:
    """Match one normalized face candidate against every bunch graph.

    A model whose localization degenerates (no texture) scores -1 and is
    recorded in the diagnostics rather than aborting the whole comparison.
    """
    if not models:
        raise InvalidInput("need at least one enrolled model")
    config = config or RecognitionConfig()
    face = candidate.face if hasattr(candidate, "face") else candidate
    if face is None:
        raise InvalidInput("candidate has no extracted face; run extract_candidates first")
    similarities: dict[str, float] = {}
    diagnostics: dict[str, str] = {}
    for model in models:
        try:
            fitted = localize_nodes(face, model, bank, config.window)
            similarities[model.person_id] = float(graph_similarity(fitted, model, config.lam))
        except DegenerateJet as exc:
            log.warning("model %s: %s", model.person_id, exc)
            similarities[model.person_id] = -1.0
            diagnostics[model.person_id] = str(exc)
    ids = [m.person_id for m in models]
    weights = config.weights_for(len(ids))
    outputs = threshold_outputs([similarities[i] for i in ids], config.threshold)
    r = recognition_index(outputs, weights)
    decision = classify(r, weights, ids)
    return RecognitionOutcome(
        similarities=similarities,
        outputs={i: o for i, o in zip(ids, outputs)},
        index=r,
        decision=decision,
        diagnostics=diagnostics,
    )
