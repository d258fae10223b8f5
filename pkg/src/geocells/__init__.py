"""Adaptive cube-sphere geocoding toolkit.

Partition the sphere into density-adaptive quad-tree cells, label
geo-tagged text records with digit-string cell labels, decode free text
into ranked cells with trie-constrained beam search, evaluate with
hierarchical metrics, and serve results as GeoJSON over REST.
"""

from .cellgeo import (
    DEFAULT_MAX_LEVEL,
    EARTH_RADIUS_KM,
    MAX_LEVEL,
    CellError,
    CellId,
    LatLon,
    UnitVec,
    cell_area_km2,
    cell_center,
    cell_children,
    cell_contains,
    cell_parent,
    cell_vertices,
    latlon_to_cell,
    level_stats,
)
from .dataset import (
    DatasetError,
    LabeledRecord,
    RawRecord,
    SplitSpec,
    assign_split,
    label_records,
    parse_records,
    split,
)
from .decode import (
    EOS,
    BaselineModel,
    DecodeError,
    LabelTrie,
    Prediction,
    ReplayScorer,
    SequenceScorer,
    beam_search,
    load_baseline,
    load_scorer,
    save_baseline,
    tokenize,
    train_baseline,
    trie_for,
)
from .geojson import GeoJsonError, cell_geometry, cell_latlon_bounds, leaves_geojson
from .labelcodec import InvalidLabel, ancestors, is_valid
from .labelcodec import decode as decode_label
from .labelcodec import encode as encode_label
from .metrics import (
    EvalPair,
    EvalReport,
    MetricsError,
    evaluate,
    flat_accuracy,
    haversine_km,
    hierarchical_scores,
    mean_distance_error,
)
from .partition import (
    AdaptivePartition,
    PartitionError,
    PartitionParams,
    PointRecord,
    build_partition,
    leaf_for,
    load_partition,
    partition_checksum,
    save_partition,
)

__version__ = "0.1.0"
