"""End-to-end toy run: train on the corner-square task and export a bundle."""

import argparse
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .datasets import ToyCornerSquareDataset
from .export import ExportSample, export_manifest
from .gradcam import GradCamConfig, gradcam
from .training import ClassifierHandle, TrainingConfig, accuracy, train_classifier


def run_toy_export(
    out_dir,
    n_train: int = 400,
    n_test: int = 50,
    resolution: int = 32,
    epochs: int = 2,
    seed: int = 0,
    correct_only: bool = False,
    handle: Optional[ClassifierHandle] = None,
):
    """Train (unless a handle is given), attribute the test set, export.

    Returns (manifest_path, handle, test accuracy).
    """
    train_set = ToyCornerSquareDataset(n_train, resolution=resolution, seed=seed)
    test_set = ToyCornerSquareDataset(n_test, resolution=resolution, seed=seed + 1)
    if handle is None:
        # Toy-scale override of the default hyperparameters: small batches and
        # a higher learning rate so two epochs on 400 images converge.
        config = TrainingConfig(epochs=epochs, batch_size=32, lr=0.005, seed=seed)
        handle = train_classifier(train_set, "corner_square", config, resolution)
    test_accuracy = accuracy(handle, test_set)

    mask = test_set.toy_mask()
    samples = []
    for i in range(len(test_set)):
        image, label = test_set[i]
        with torch.no_grad():
            prediction = int(handle.model(image.unsqueeze(0)).argmax())
        if correct_only and prediction != label:
            continue
        attribution = gradcam(handle, image, GradCamConfig(class_index=1))
        samples.append(
            ExportSample(
                sample_id=f"toy{i:03d}",
                image=test_set.images[i],
                attribution=np.clip(attribution, 0.0, 1.0),
                mask=mask,
                attributes={"corner_square": label},
                label=label,
                prediction=prediction,
            )
        )
    manifest_path = export_manifest(samples, out_dir)
    return manifest_path, handle, test_accuracy


def cli(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="faceextract-toy",
        description="Train the toy corner-square classifier and export an audit bundle.",
    )
    parser.add_argument("--out", required=True)
    parser.add_argument("--train-samples", type=int, default=400)
    parser.add_argument("--test-samples", type=int, default=50)
    parser.add_argument("--resolution", type=int, default=32)
    parser.add_argument("--epochs", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--correct-only", action="store_true")
    args = parser.parse_args(argv)
    manifest_path, _handle, test_accuracy = run_toy_export(
        Path(args.out),
        n_train=args.train_samples,
        n_test=args.test_samples,
        resolution=args.resolution,
        epochs=args.epochs,
        seed=args.seed,
        correct_only=args.correct_only,
    )
    print(f"test accuracy: {test_accuracy:.3f}")
    print(f"manifest: {manifest_path}")
