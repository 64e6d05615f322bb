"""Hard-binned marginal L1 calibration metrics, losses, and diagrams for
multi-class segmentation probability maps."""

from .calib_loss import (
    LossOutput,
    ace_loss,
    ece_loss,
    mce_loss,
    softmax_with_grad,
)
from .core import (
    BinConfig,
    CalibrationReport,
    assign_bin,
    build_report,
    empty_report,
    merge_reports,
)
from .diagrams import (
    DatasetHistogram,
    ReliabilityDiagram,
    dataset_histogram,
    emit_csv,
    emit_svg,
    reliability_diagram,
)
from .metrics import CalibrationSummary, ml1_ace, ml1_ece, ml1_mce, summarize
from .seg_losses import (
    LossSpec,
    ce_loss,
    ce_loss_from_logits,
    combined_loss,
    dice_score,
    parse_loss_spec,
    soft_dice_loss,
)
from .temperature import TemperatureFit, apply_temperature, fit_temperature
from .tensorio import read_tensor, write_manifest, write_tensor

__version__ = "0.1.0"

__all__ = [
    "BinConfig",
    "CalibrationReport",
    "CalibrationSummary",
    "DatasetHistogram",
    "LossOutput",
    "LossSpec",
    "ReliabilityDiagram",
    "TemperatureFit",
    "ace_loss",
    "apply_temperature",
    "assign_bin",
    "build_report",
    "ce_loss",
    "ce_loss_from_logits",
    "combined_loss",
    "dataset_histogram",
    "dice_score",
    "ece_loss",
    "emit_csv",
    "emit_svg",
    "empty_report",
    "fit_temperature",
    "mce_loss",
    "merge_reports",
    "ml1_ace",
    "ml1_ece",
    "ml1_mce",
    "parse_loss_spec",
    "read_tensor",
    "reliability_diagram",
    "soft_dice_loss",
    "softmax_with_grad",
    "summarize",
    "write_manifest",
    "write_tensor",
]
