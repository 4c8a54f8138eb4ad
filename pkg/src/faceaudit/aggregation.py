"""Per-sample and set-level region attribution scores.

The per-sample score of a region is the mean attribution over the region's
pixels: the fraction of the maximum possible focus on that region. Set-level
means divide by the number of samples in which the region actually appears,
so rarely-present regions (hats, glasses) are not diluted.
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Tuple

import numpy as np


@dataclass(frozen=True)
class SampleIoR:
    """Region scores for one sample; only regions with pixels are present."""

    sample_id: str
    values: Dict[int, float]

    @property
    def present(self) -> FrozenSet[int]:
        return frozenset(self.values)


@dataclass(frozen=True)
class IoRSummary:
    """Mean region score and presence count over a sample set."""

    per_region: Dict[int, Tuple[float, int]]  # label -> (ior_mean, count)
    sample_count: int
    class_of_interest: str


def sample_ior(attribution: np.ndarray, mask: np.ndarray, sample_id: str = "") -> SampleIoR:
    """Mean attribution per region present in `mask`."""
    if attribution.shape != mask.shape:
        raise ValueError(
            f"attribution {attribution.shape} and mask {mask.shape} dimensions differ"
        )
    flat_labels = mask.ravel()
    counts = np.bincount(flat_labels)
    sums = np.bincount(flat_labels, weights=attribution.ravel().astype(np.float64))
    values = {
        int(r): float(sums[r] / counts[r]) for r in np.flatnonzero(counts)
    }
    return SampleIoR(sample_id=sample_id, values=values)


def aggregate(samples: Iterable[SampleIoR], class_of_interest: str) -> IoRSummary:
    """Reduce a stream of per-sample scores to per-region means.

    Accumulation is in stream order with float64 sums; feeding samples in
    manifest order makes the result independent of how they were computed.
    """
    sums: Dict[int, float] = {}
    counts: Dict[int, int] = {}
    n = 0
    for sample in samples:
        n += 1
        for region, value in sample.values.items():
            sums[region] = sums.get(region, 0.0) + value
            counts[region] = counts.get(region, 0) + 1
    if n == 0:
        raise ValueError("cannot aggregate an empty sample stream")
    per_region = {r: (sums[r] / counts[r], counts[r]) for r in sorted(sums)}
    return IoRSummary(per_region=per_region, sample_count=n, class_of_interest=class_of_interest)


def rank_regions(summary: IoRSummary, include_background: bool = False) -> List[Tuple[int, float]]:
    """Regions with at least one appearance, highest mean first.

    Ties break toward the lower region label. Background (label 0) is kept
    out unless requested; regions never observed are simply not listed.
    """
    if not summary.per_region:
        raise ValueError("summary has no present region")
    items = [
        (label, mean)
        for label, (mean, _count) in summary.per_region.items()
        if include_background or label != 0
    ]
    items.sort(key=lambda item: (-item[1], item[0]))
    return items
