"""Python bindings for the detbench toolkit."""

from ._detbench import (
    Error,
    ParameterError,
    ParseError,
    UndefinedApError,
    aggregate,
    augment,
    autocontrast,
    bench_stub,
    box_iou,
    chromatic_aberration,
    defocus,
    illumination,
    iou,
    iso_noise,
    map_at_05,
    motion_blur,
    parse_detection_file,
    parse_label_file,
    round_half_even,
    select_model,
    split,
    write_label_file,
)

__all__ = [
    "Error",
    "ParameterError",
    "ParseError",
    "UndefinedApError",
    "aggregate",
    "augment",
    "autocontrast",
    "bench_stub",
    "box_iou",
    "chromatic_aberration",
    "defocus",
    "illumination",
    "iou",
    "iso_noise",
    "map_at_05",
    "motion_blur",
    "parse_detection_file",
    "parse_label_file",
    "round_half_even",
    "select_model",
    "split",
    "write_label_file",
]
