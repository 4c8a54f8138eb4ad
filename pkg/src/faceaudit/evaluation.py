"""Bias-detection metrics over region rankings.

An attribute under suspicion (e.g. Wearing_Lipstick) maps to one or more
facial regions; its ranking position is the best rank any of those regions
achieves when regions are ordered by mean attribution. Low positions mean
the classifier leans on the attribute's region.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .interchange import RegionTable
from .aggregation import IoRSummary, rank_regions

TIE_TOLERANCE = 1e-12

DEFAULT_ATTRIBUTE_REGIONS = {
    "Blond_Hair": ("hair",),
    "Eyeglasses": ("eye_g",),
    "Smiling": ("mouth",),
    "Wearing_Earrings": ("ear_r",),
    "Wearing_Lipstick": ("u_lip", "l_lip"),
    "Wearing_Necklace": ("neck_l",),
    "Wearing_Hat": ("hat",),
    "Race": ("skin",),
}


class _Unranked:
    """Sentinel: none of an attribute's regions appeared in any sample."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNRANKED"


UNRANKED = _Unranked()

Position = Union[int, _Unranked]


@dataclass(frozen=True)
class AttributeRegionMapping:
    """attribute name -> set of region labels it is expected to light up."""

    entries: Dict[str, FrozenSet[int]]

    def __post_init__(self):
        for attr, regions in self.entries.items():
            if not regions:
                raise ValueError(f"attribute {attr!r} maps to no regions")

    @classmethod
    def from_names(cls, table: RegionTable, names: Dict[str, Sequence[str]]) -> "AttributeRegionMapping":
        return cls(
            {attr: frozenset(table.label_of(n) for n in regions) for attr, regions in names.items()}
        )

    @classmethod
    def default(cls, table: Optional[RegionTable] = None) -> "AttributeRegionMapping":
        return cls.from_names(table or RegionTable.default(), DEFAULT_ATTRIBUTE_REGIONS)

    def regions_for(self, attribute: str) -> FrozenSet[int]:
        try:
            return self.entries[attribute]
        except KeyError:
            raise KeyError(f"attribute {attribute!r} has no region mapping") from None


@dataclass(frozen=True)
class ExperimentSpec:
    target: str
    biased_attributes: Tuple[str, ...]
    mapping: AttributeRegionMapping

    def __post_init__(self):
        if not 1 <= len(self.biased_attributes) <= 2:
            raise ValueError("an experiment names one or two biased attributes")
        for attr in self.biased_attributes:
            self.mapping.regions_for(attr)


@dataclass(frozen=True)
class RankingResult:
    per_attribute: Dict[str, Position]
    rp1: Position
    rp2: Optional[Position] = None
    tied: bool = False


def ranking_position(
    ranking: Sequence[Tuple[int, float]],
    attribute: str,
    mapping: AttributeRegionMapping,
) -> Position:
    """1-based rank of the attribute's best region, or UNRANKED if absent."""
    if not ranking:
        raise ValueError("ranking is empty")
    regions = mapping.regions_for(attribute)
    for pos, (label, _ior) in enumerate(ranking, start=1):
        if label in regions:
            return pos
    return UNRANKED


def _boundary_tied(ranking: Sequence[Tuple[int, float]], pos: Position) -> bool:
    if pos is UNRANKED:
        return False
    i = pos - 1
    ior = ranking[i][1]
    for j in (i - 1, i + 1):
        if 0 <= j < len(ranking) and abs(ranking[j][1] - ior) <= TIE_TOLERANCE:
            return True
    return False


def evaluate_experiment(
    summary: IoRSummary, spec: ExperimentSpec, include_background: bool = False
) -> RankingResult:
    """Rank the summary's regions and locate each suspect attribute."""
    ranking = rank_regions(summary, include_background=include_background)
    per_attribute = {
        attr: ranking_position(ranking, attr, spec.mapping) for attr in spec.biased_attributes
    }
    positions = list(per_attribute.values())
    ranked = [p for p in positions if p is not UNRANKED]
    if len(positions) == 1:
        rp1 = positions[0]
        rp2 = None
    else:
        # UNRANKED sorts after every integer position.
        rp1 = min(ranked) if ranked else UNRANKED
        rp2 = max(ranked) if len(ranked) == 2 else UNRANKED
    tied = any(_boundary_tied(ranking, p) for p in positions)
    return RankingResult(per_attribute=per_attribute, rp1=rp1, rp2=rp2, tied=tied)


def mean_ranking(results: List[int]) -> float:
    """Arithmetic mean of ranking positions; rejects sentinels."""
    if not results:
        raise ValueError("no ranking positions to average")
    for value in results:
        if value is UNRANKED or not isinstance(value, int):
            raise ValueError("unranked positions must be filtered before averaging")
    return sum(results) / len(results)
