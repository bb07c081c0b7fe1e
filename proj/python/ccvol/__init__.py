"""Conformal volume intervals from segmentation probability maps."""

from ._core import (
    HISTOGRAM_BINS,
    CalibrationModel,
    ClusterModel,
    GeneratorConfig,
    IntervalPrediction,
    IoError,
    SampleRecord,
    TriageRecord,
    TriageSummary,
    ValidationError,
    VolumeTriple,
    agatston_score,
    apply_correction,
    calibrate,
    classify,
    conformal_quantile,
    conformal_rank,
    conformity_score,
    fit_constrained_kmeans,
    generate,
    histogram_feature,
    load_map,
    make_record,
    mean_maps,
    predict,
    read_records_csv,
    records_to_csv,
    risk_category,
    save_map,
    summarize,
    volume_triple,
)

__version__ = "0.1.0"
