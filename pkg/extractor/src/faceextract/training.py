"""Classifier training with the audit experiments' default hyperparameters."""

import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn
from torch.utils.data import DataLoader, Dataset


@dataclass
class TrainingConfig:
    lr: float = 0.001
    weight_decay: float = 1e-4
    batch_size: int = 128
    epochs: int = 20
    lr_decay: float = 0.1  # applied at 1/3 and 2/3 of the epochs
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if not math.isfinite(self.lr) or self.lr <= 0:
            raise ValueError(f"invalid learning rate {self.lr}")
        if not math.isfinite(self.weight_decay) or self.weight_decay < 0:
            raise ValueError(f"invalid weight decay {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch size must be >= 1 and epochs >= 0")


@dataclass
class ClassifierHandle:
    architecture: str
    model: nn.Module
    target_attribute: str
    input_resolution: int
    target_layer: nn.Module  # convolutional stage used for attribution


class SmallConvNet(nn.Module):
    """Compact CNN for toy-scale binary attribute classification."""

    def __init__(self, n_classes: int = 2):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, 3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Conv2d(32, 32, 3, padding=1),
            nn.ReLU(),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(32, n_classes)

    def forward(self, x):
        features = self.features(x)
        return self.head(self.pool(features).flatten(1))

    @property
    def last_conv(self) -> nn.Module:
        return self.features[-2]


def train_classifier(
    dataset: Dataset,
    target_attribute: str,
    config: Optional[TrainingConfig] = None,
    input_resolution: int = 32,
) -> ClassifierHandle:
    """Train a SmallConvNet; lr decays x`lr_decay` at 1/3 and 2/3 of epochs."""
    config = config or TrainingConfig()
    torch.manual_seed(config.seed)
    model = SmallConvNet().to(config.device)
    handle = ClassifierHandle(
        architecture="smallconvnet",
        model=model,
        target_attribute=target_attribute,
        input_resolution=input_resolution,
        target_layer=model.last_conv,
    )
    if config.epochs == 0:
        return handle

    loader = DataLoader(dataset, batch_size=config.batch_size, shuffle=True)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay
    )
    milestones = sorted({max(1, config.epochs // 3), max(1, 2 * config.epochs // 3)})
    scheduler = torch.optim.lr_scheduler.MultiStepLR(
        optimizer, milestones=milestones, gamma=config.lr_decay
    )
    loss_fn = nn.CrossEntropyLoss()

    model.train()
    for _epoch in range(config.epochs):
        for images, labels in loader:
            images = images.to(config.device)
            labels = labels.to(config.device)
            optimizer.zero_grad()
            loss = loss_fn(model(images), labels)
            if not torch.isfinite(loss):
                raise RuntimeError("training diverged: non-finite loss")
            loss.backward()
            optimizer.step()
        scheduler.step()
    model.eval()
    return handle


@torch.no_grad()
def accuracy(handle: ClassifierHandle, dataset: Dataset, batch_size: int = 256) -> float:
    handle.model.eval()
    loader = DataLoader(dataset, batch_size=batch_size)
    correct = total = 0
    for images, labels in loader:
        predictions = handle.model(images).argmax(dim=1)
        correct += int((predictions == labels).sum())
        total += len(labels)
    return correct / total
