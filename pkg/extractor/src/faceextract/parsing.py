"""Region mask acquisition: ground-truth passthrough or a pretrained parser."""

from typing import Callable, List, Optional, Sequence

import numpy as np

from .export import REGION_NAMES


class ParsingError(ValueError):
    pass


def parse_faces(
    images: Sequence[np.ndarray],
    ground_truth: Optional[Sequence[np.ndarray]] = None,
    parser: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> List[np.ndarray]:
    """Label maps for a batch of images.

    Ground-truth masks, when supplied, pass through unchanged; otherwise a
    pretrained parser callable must be provided (e.g. a face parsing model
    wrapped to return per-pixel labels).
    """
    if ground_truth is not None:
        if len(ground_truth) != len(images):
            raise ParsingError("ground-truth mask count does not match image count")
        masks = [np.asarray(mask) for mask in ground_truth]
    elif parser is not None:
        masks = [np.asarray(parser(image)) for image in images]
    else:
        raise ParsingError("no mask source: supply ground-truth masks or a parser model")

    for i, (image, mask) in enumerate(zip(images, masks)):
        if mask.shape != np.asarray(image).shape[:2]:
            raise ParsingError(f"mask {i} shape {mask.shape} does not match its image")
        if mask.min() < 0 or mask.max() >= len(REGION_NAMES):
            raise ParsingError(f"mask {i} contains labels outside the region table")
    return [mask.astype(np.uint8) for mask in masks]
