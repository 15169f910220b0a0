"""Segmentation-guided, training-free image quality assessment."""

from ._core import (
    AggMode,
    Config,
    CropMode,
    DogIQAError,
    Mask,
    StandardForm,
    area_weights,
    build_prompt,
    evaluate,
    extract_subimage,
    final_score,
    local_score,
    parse_score,
    plcc,
    preset_labels,
    process_masks,
    quantization_upper_bound,
    quantize_mos,
    rle_decode,
    rle_encode,
    run_cli,
    seg_score,
    srcc,
)

__all__ = [
    "AggMode",
    "Config",
    "CropMode",
    "DogIQAError",
    "Mask",
    "StandardForm",
    "area_weights",
    "build_prompt",
    "evaluate",
    "extract_subimage",
    "final_score",
    "local_score",
    "parse_score",
    "plcc",
    "preset_labels",
    "process_masks",
    "quantization_upper_bound",
    "quantize_mos",
    "rle_decode",
    "rle_encode",
    "run_cli",
    "seg_score",
    "srcc",
]
