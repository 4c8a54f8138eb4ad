"""Gradient-weighted class activation maps.

Neuron importance weights are the global-average-pooled gradients of the
class score w.r.t. a convolutional layer's feature maps; the map is the
ReLU of the weighted feature-map sum, upsampled bilinearly to the output
resolution and normalized per sample by its maximum (all-zero maps stay
all-zero).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .training import ClassifierHandle


@dataclass
class GradCamConfig:
    class_index: int = 1
    output_size: Optional[Tuple[int, int]] = None  # default: input resolution


class GradCamError(RuntimeError):
    pass


def gradcam(
    handle: ClassifierHandle, image: torch.Tensor, config: Optional[GradCamConfig] = None
) -> np.ndarray:
    """Attribution map in [0,1] for one (3, H, W) input image."""
    config = config or GradCamConfig()
    model = handle.model
    layer = handle.target_layer
    if not isinstance(layer, nn.Module):
        raise GradCamError(f"invalid target layer {layer!r}")
    model.eval()

    captured = {}

    def forward_hook(_module, _inputs, output):
        captured["activations"] = output
        output.retain_grad()

    hook = layer.register_forward_hook(forward_hook)
    try:
        batch = image.unsqueeze(0).requires_grad_(True)
        logits = model(batch)
        if not 0 <= config.class_index < logits.shape[1]:
            raise GradCamError(f"class index {config.class_index} out of range")
        score = logits[0, config.class_index]
        model.zero_grad(set_to_none=True)
        score.backward()
    finally:
        hook.remove()

    activations = captured["activations"]
    gradients = activations.grad
    if gradients is None:
        raise GradCamError("no gradients reached the target layer")
    if not torch.isfinite(gradients).all():
        raise GradCamError("non-finite gradients at the target layer")

    weights = gradients.mean(dim=(2, 3), keepdim=True)  # pooled neuron importance
    cam = F.relu((weights * activations).sum(dim=1, keepdim=True))

    out_h, out_w = config.output_size or (image.shape[1], image.shape[2])
    cam = F.interpolate(cam, size=(out_h, out_w), mode="bilinear", align_corners=False)
    cam = cam[0, 0].detach()
    peak = float(cam.max())
    if peak > 0.0:
        cam = cam / peak
    return cam.numpy().astype(np.float32)
