"""Relevance flags and patch retention.

A record is flagged relevant when its patch should take part in retrieval.
Which records keep that flag is decided per strategy:

``mr1star``  discovery patch, plus the first and the most recent valid patch
             of the object's latest run of records
``mr2``      discovery patch, plus every valid patch of the latest run
``mr3``      discovery patch only
``mr4``      first and most recent valid patch of the latest run only
``none``     no filtering: ``mr2`` with every patch accepted

"Valid" means the patch quality assessor accepted it. When a run closes the
run's retained patches are released, so retained patches always describe the
discovery view and the current run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Protocol

from .memory import ObjectEntry, Patch


class Strategy(str, enum.Enum):
    MR1STAR = "mr1star"
    MR2 = "mr2"
    MR3 = "mr3"
    MR4 = "mr4"
    NONE = "none"


class PatchQualityAssessor(Protocol):
    def assess(self, patch: Patch) -> bool: ...


def simulated_assessor(distinctiveness: float, threshold: float = 0.5) -> bool:
    if not 0.0 <= distinctiveness <= 1.0:
        raise ValueError(f"distinctiveness must lie in [0, 1], got {distinctiveness}")
    return distinctiveness >= threshold


@dataclass(frozen=True)
class ThresholdAssessor:
    """Stand-in for a trained patch classifier: accept sufficiently distinctive crops."""

    threshold: float = 0.5

    def assess(self, patch: Patch) -> bool:
        return simulated_assessor(patch.distinctiveness, self.threshold)


class AcceptAll:
    def assess(self, patch: Patch) -> bool:
        return True


class RelevanceLabeler:
    """Incremental relevance bookkeeping, installed on an ``ObjectMemory``.

    Per-object state lives in ``entry.relevance_state`` as ``first``/``last``:
    the timestamps of the first and the latest valid patch of the current run.
    """

    def __init__(self, strategy: Strategy | str = Strategy.MR1STAR,
                 assessor: Optional[PatchQualityAssessor] = None):
        self.strategy = Strategy(strategy)
        if self.strategy is Strategy.NONE:
            assessor = AcceptAll()
        self.assessor = assessor if assessor is not None else ThresholdAssessor()

    @property
    def keeps_discovery(self) -> bool:
        return self.strategy is not Strategy.MR4

    def label_on_write(self, entry: ObjectEntry, patch: Optional[Patch], t: int,
                       is_discovery: bool) -> tuple[bool, list[int]]:
        """Flag for the record about to be written, and earlier records to unflag."""
        st = entry.relevance_state
        if is_discovery:
            st.update(first=None, last=None)
        relevant = is_discovery and self.keeps_discovery
        if patch is None or self.strategy is Strategy.MR3:
            return relevant, []
        if not self.assessor.assess(patch):
            return relevant, []

        if self.strategy in (Strategy.MR2, Strategy.NONE):
            return True, []

        demote = []
        if st["first"] is None:
            st["first"] = t
        else:
            last = st["last"]
            if last is not None and last != st["first"]:
                demote.append(last)
            st["last"] = t
        return True, demote

    def finalize_segment(self, entry: ObjectEntry) -> list[int]:
        """Unflag the closing run's patches; called before the next run's first write."""
        entry.relevance_state.update(first=None, last=None)
        if self.strategy is Strategy.MR3:
            return []
        keep = entry.discovery_t if self.keeps_discovery else None
        return [r.t for r in entry.records if r.relevant and r.t != keep]
