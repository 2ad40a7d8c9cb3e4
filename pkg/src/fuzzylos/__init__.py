"""Choquet integral decomposition into contextual linear order statistics."""

from .aggregation import (
    Walk,
    choquet,
    choquet_batch,
    lcs_eval,
    los_eval,
    permutation_rank,
    permutation_unrank,
    sort_walk,
    walk_weights,
)
from .clustering import (
    Partition,
    VatOrdering,
    block_partition,
    ivat_transform,
    minimax_distance,
    render_grayscale,
    vat_order,
)
from .decomposition import (
    Decomposition,
    DissimilarityMatrix,
    EmptyResultError,
    NormalizationError,
    OperatorSet,
    SampleSet,
    cluster_medoid,
    decompose,
    discover_operators,
    enumerate_walks,
    evaluate_with_operators,
    gsamp,
    naive_discovery,
    normalize_dissimilarity,
    pairwise_dissimilarity,
)
from .learning import (
    Dataset,
    DatasetSpec,
    FitOptions,
    FitResult,
    ObservabilityRecord,
    fit_measure,
    generate_dataset,
    interval_of_uncertainty,
    track_observability,
    walk_unobserved_fraction,
)
from .measure import (
    FuzzyMeasure,
    InvalidMeasureError,
    MeasureError,
    demining_measure,
    fig4_measure,
    load_measure,
    max_measure,
    mean_measure,
    measure_from_los,
    median_measure,
    min_measure,
    random_monotone_measure,
    reference_measure,
    save_measure,
    subset_index,
    subset_members,
    validate_measure,
)

__version__ = "0.1.0"
