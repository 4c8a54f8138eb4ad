"""Model-side producer for the region attribution audit engine."""

from .bias import BiasSubsetError, build_biased_subset
from .datasets import ToyCornerSquareDataset, read_attribute_csv
from .export import ExportError, ExportSample, export_manifest
from .gradcam import GradCamConfig, GradCamError, gradcam
from .parsing import ParsingError, parse_faces
from .training import ClassifierHandle, SmallConvNet, TrainingConfig, accuracy, train_classifier
from .toy import run_toy_export

__version__ = "0.1.0"
