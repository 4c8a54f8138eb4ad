"""Controlled bias injection: subsets with a forced target/attribute co-occurrence."""

import hashlib
from typing import Dict, List, Sequence, Tuple


class BiasSubsetError(ValueError):
    pass


def _draw_key(seed: int, sample_id: str) -> bytes:
    return hashlib.blake2b(f"{seed}:{sample_id}".encode("utf-8"), digest_size=16).digest()


def build_biased_subset(
    annotations: Sequence[Tuple[str, Dict[str, int]]],
    target: str,
    attribute: str,
    correlation: float = 0.99,
    seed: int = 0,
) -> List[str]:
    """Sample ids such that P(attr=1|target=1) = P(attr=0|target=0) = correlation.

    `annotations` is (sample_id, attribute dict). Counts are the nearest
    achievable integers given the available cells; selection within a cell is
    a deterministic draw keyed on (seed, id). Original order is preserved.
    """
    if not 0.0 < correlation < 1.0:
        raise BiasSubsetError(f"correlation must be in (0,1), got {correlation}")
    cells: Dict[Tuple[int, int], List[str]] = {(t, a): [] for t in (0, 1) for a in (0, 1)}
    for sample_id, attrs in annotations:
        if target not in attrs or attribute not in attrs:
            raise BiasSubsetError(f"sample {sample_id!r} missing {target!r} or {attribute!r}")
        cells[(int(attrs[target]), int(attrs[attribute]))].append(sample_id)
    for cell, members in cells.items():
        if not members:
            raise BiasSubsetError(f"cell (target={cell[0]}, attribute={cell[1]}) is empty")

    keep = set()
    for t in (0, 1):
        # For target=t the majority attribute value equals t's "aligned" side.
        major_a = 1 if t == 1 else 0
        major = cells[(t, major_a)]
        minor = cells[(t, 1 - major_a)]
        # Largest side size whose rounded split fits both available cells.
        n = len(major) + len(minor)
        while n >= 1:
            n_major = round(correlation * n)
            n_minor = n - n_major
            if n_major <= len(major) and n_minor <= len(minor):
                break
            n -= 1
        if n < 1:
            raise BiasSubsetError(f"not enough samples on the target={t} side")
        for members, count in ((major, n_major), (minor, n_minor)):
            chosen = sorted(members, key=lambda sid: _draw_key(seed, sid))[:count]
            keep.update(chosen)

    return [sid for sid, _ in annotations if sid in keep]
