"""Massive-MIMO CSI workbench.

Synthesizes multipath channels and noisy pilots, encodes them as oversampled
angular-delay images, estimates channels by path-spot detection plus LS gain
fitting (against LS and LMMSE baselines), trains small numpy heads on frozen
features, and persists everything through versioned binary formats.  A FastAPI
service wraps the core; the csibench CLI is a thin client of it.
"""

from .channel import (
    ChannelMatrix,
    PathTriplet,
    PilotObservation,
    add_pilot_noise,
    delay_vector,
    sample_paths,
    steering_vector,
    synth_channel,
)
from .convbaseline import ConvFeatModel, convfeat_param_count, init_convfeat_model
from .detection import (
    DetectedPath,
    Detection,
    DetectionProtocolError,
    DetectionServiceError,
    DetectionTransportError,
    EmptyDetectionsError,
    ExternalDetectorClient,
    PeakDetectorConfig,
    bbox_to_path,
    detect_external,
    detect_peaks_builtin,
)
from .estimation import (
    CovarianceModel,
    DegenerateDictionaryError,
    GainFit,
    estimate_covariance,
    lmmse_estimate,
    ls_estimate,
    ls_gains,
    nmse,
    reconstruct,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    PlotDataError,
    emit_plot,
    load_config,
    run_ce_sweep,
    run_har,
    run_loc,
)
from .features import (
    FeatureDimError,
    FeatureFileError,
    FeatureMagicError,
    FeatureTruncatedError,
    HarCsvError,
    LocScenario,
    ManifestError,
    gen_loc_dataset,
    ingest_har_csv,
    los_path,
    mock_extract,
    read_feature_file,
    read_manifest,
    write_feature_file,
    write_manifest,
)
from .heads import (
    DenseHead,
    LocHead,
    TrainConfig,
    adam_train,
    dense_softmax_forward,
    grad_check,
    init_dense_head,
    init_loc_head,
    load_head,
    load_head_bytes,
    loc_head_forward,
    param_count,
    save_head,
    save_head_bytes,
)
from .imaging import (
    AngularDelayMap,
    CsiImage,
    decode_intensity,
    encode_rgb_colormap,
    encode_two_channel_zero,
    grayscale_reshape_resize,
    modulus_normalize,
    png_bytes,
    read_png,
    to_angular_delay,
    write_png,
)

__version__ = "0.1.0"
