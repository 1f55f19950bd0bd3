"""Bias repair and differentially private release of origin-destination
trip histograms, with rank-sensitive and rank-insensitive damage metrics."""

from .errors import ConfigError, DataError, EmptyInputError, ODReleaseError, SchemaError
from .histogram import (
    AttributeSchema,
    BucketKey,
    Histogram,
    Marginal,
    group_by,
    marginalize,
    merge,
    normalize,
    read_histogram_csv,
    support_union,
    write_histogram_csv,
)
from .ingest import (
    BikeConfig,
    IngestResult,
    IngestStats,
    SynthConfig,
    TaxiConfig,
    bike_preprocess,
    synth_generate,
    synthetic_od_seed,
    taxi_preprocess,
    tertiles,
    time_bucket,
)
from .metrics import (
    Band,
    DistanceReport,
    bootstrap_band,
    bootstrap_distances,
    build_distance_report,
    hellinger,
    percentile,
    pwkt,
)
from .privacy import (
    PrivacyParams,
    ReleaseResult,
    binomial_sample,
    complement_sample,
    domain_size_for_threshold,
    exponential_sample,
    laplace_sample,
    privatize,
    threshold,
)
from .repair import (
    ATEResult,
    FractionalRepairResult,
    RepairSpec,
    average_treatment_effect,
    conditional_mutual_information,
    kl_divergence,
    random_x_baseline,
    repair,
)
from .rng import derive_seed, substream

__version__ = "0.1.0"
