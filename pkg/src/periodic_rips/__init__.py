"""Periodic Rips representations of linear homopolymers.

Builds frame-minimized periodic distance matrices, Vietoris-Rips
filtrations with the adjacency relations needed for curvature and
simplicial message passing, Forman-curvature simplex features, a
deterministic reference forward pass of the hierarchical simplicial
message passing encoder, and matched-pair trend statistics.
"""

from .complexes import (
    Filtration,
    Simplex,
    SimplicialComplex,
    build_filtration,
    build_vr_complex,
    parallel_simplices,
    upper_adjacent,
)
from .curvature import (
    CurvatureProfile,
    WeightAssignment,
    curvature_profile,
    forman_combinatorial,
    forman_edge_weighted,
    normalize_curvature,
    profiles_for_complex,
)
from .errors import ParseError, ValidationError, VersionMismatchError, WeightFormatError
from .features import (
    FEATURE_SCHEMA_VERSION,
    FeatureSchema,
    SimplexFeatureSet,
    assemble_features,
    atom_feature_vector,
    bond_feature_vector,
)
from .metric import (
    PeriodicDistanceMatrix,
    intra_unit_distance_matrix,
    periodic_distance_matrix,
)
from .model import (
    ForwardResult,
    LevelState,
    ModelConfig,
    ModelWeights,
    cross_scale_refine,
    expected_shapes,
    generate_test_weights,
    hsmp_forward,
    load_weights,
    multi_head_block,
    save_weights,
    validate_manifest,
)
from .pipeline import (
    BatchError,
    FeaturizedUnit,
    featurize_unit,
    predict_batch,
    predict_unit,
    read_feature_container,
    write_feature_container,
)
from .polymer import (
    AtomRecord,
    BondRecord,
    CoordinateFrame,
    Diagnostics,
    PermutationSpec,
    RepeatingUnit,
    enumerate_cyclic_permutations,
    parse_repeating_unit,
    validate_frames,
)
from .stats import (
    ComparisonRow,
    FamilySummary,
    MatchedPair,
    MatchResult,
    PredictionRecord,
    TestResult,
    analyze_trends,
    canonical_substitution_key,
    holm_adjust,
    mann_whitney_u,
    match_pairs,
    one_sample_t_test,
    summarize_families,
    t_confidence_interval,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
