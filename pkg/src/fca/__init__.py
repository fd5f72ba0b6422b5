"""Few-class dataset difficulty scores and benchmark aggregation.

The package splits into five layers:

* ``manifest``   - plain-text image/class tables and the deterministic split
* ``subset``     - seeded few-class overlays (no data duplication)
* ``embedstore`` - the binary container of unit-normalized embeddings
* ``simcore``    - similarity and silhouette-style difficulty scores
* ``bench``      - accuracy aggregation: DCN, rankings, curves, correlations

``cli`` ties everything into one ``fca`` binary and ``figures`` renders the
report tables to PNG files.
"""

__version__ = "0.1.0"

from .bench import (
    CorrelationResult,
    CurvePoint,
    DcnTable,
    ResultRecord,
    accuracy_curve,
    compute_dcn,
    correlate_dcn_simss,
    load_results,
    pearson,
    rank_models,
)
from .embedstore import (
    EmbeddingStore,
    EmbeddingView,
    make_view,
    read_store,
    view_from_arrays,
    write_store,
)
from .manifest import (
    ClassIndex,
    DatasetManifest,
    build_class_index,
    parse_manifest,
    synthesize_split,
    write_manifest,
)
from .simcore import (
    SimilarityConfig,
    SimilarityReport,
    full_report,
    simss_dataset,
    simss_instance,
)
from .subset import SubsetPlan, SubsetSpec, expand_plan, filter_manifest, sample_subset

__all__ = [
    "__version__",
    "ClassIndex",
    "CorrelationResult",
    "CurvePoint",
    "DatasetManifest",
    "DcnTable",
    "EmbeddingStore",
    "EmbeddingView",
    "ResultRecord",
    "SimilarityConfig",
    "SimilarityReport",
    "SubsetPlan",
    "SubsetSpec",
    "accuracy_curve",
    "build_class_index",
    "compute_dcn",
    "correlate_dcn_simss",
    "expand_plan",
    "filter_manifest",
    "full_report",
    "load_results",
    "make_view",
    "parse_manifest",
    "pearson",
    "rank_models",
    "read_store",
    "sample_subset",
    "simss_dataset",
    "simss_instance",
    "synthesize_split",
    "view_from_arrays",
    "write_manifest",
    "write_store",
]
