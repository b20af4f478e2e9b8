"""Cell detection trained from one annotated frame plus tracking-based pseudo-labels."""

from ._tracklabel import (
    CorrelationDetector,
    Direction,
    Error,
    FrameRange,
    Termination,
    TrackSet,
    associate_frames,
    build_pseudo_labels,
    build_tracks,
    detect_peaks,
    encode_heatmap,
    masked_mse,
    run_pipeline,
    score_sequence,
    select_frame_range,
    simulate,
    tracked_ratios,
    write_synthetic_sequence,
)

__all__ = [
    "CorrelationDetector",
    "Direction",
    "Error",
    "FrameRange",
    "Termination",
    "TrackSet",
    "associate_frames",
    "build_pseudo_labels",
    "build_tracks",
    "detect_peaks",
    "encode_heatmap",
    "masked_mse",
    "run_pipeline",
    "score_sequence",
    "select_frame_range",
    "simulate",
    "tracked_ratios",
    "write_synthetic_sequence",
]
