"""Dataset access: CelebA-style annotation CSVs and the built-in toy task.

The toy task ("corner square") is linearly separable by construction:
positive images carry a bright square inside the top-left quadrant, negative
images are dim noise with no square at all. It lets the full export +
audit pipeline run without any external dataset.
"""

import csv
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import torch
from torch.utils.data import Dataset


def read_attribute_csv(path) -> List[Tuple[str, Dict[str, int]]]:
    """CelebA-style CSV: first column image id, remaining columns binary attributes.

    Values of -1 (CelebA convention) are mapped to 0.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        id_column = reader.fieldnames[0]
        for row in reader:
            attrs = {
                name: (1 if int(value) > 0 else 0)
                for name, value in row.items()
                if name != id_column
            }
            rows.append((row[id_column], attrs))
    return rows


class ToyCornerSquareDataset(Dataset):
    """Binary classification: bright square in the top-left quadrant vs none."""

    def __init__(self, n: int, resolution: int = 32, square: int = 8, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.resolution = resolution
        self.images = np.empty((n, resolution, resolution, 3), dtype=np.uint8)
        self.labels = np.empty(n, dtype=np.int64)
        half = resolution // 2
        for i in range(n):
            label = int(rng.integers(0, 2))
            image = rng.integers(0, 50, size=(resolution, resolution, 3), dtype=np.uint8)
            if label == 1:
                limit = half - square
                top = int(rng.integers(0, limit + 1))
                left = int(rng.integers(0, limit + 1))
                image[top : top + square, left : left + square] = rng.integers(
                    200, 256, size=(square, square, 3), dtype=np.uint8
                )
            self.images[i] = image
            self.labels[i] = label

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index):
        image = torch.from_numpy(self.images[index]).permute(2, 0, 1).float() / 255.0
        return image, int(self.labels[index])

    def toy_mask(self) -> np.ndarray:
        """Label map for the toy protocol: top-left quadrant 'hair', rest 'skin'."""
        half = self.resolution // 2
        mask = np.full((self.resolution, self.resolution), 1, dtype=np.uint8)
        mask[:half, :half] = 17
        return mask
