"""slipforge: synthetic fracture-pair generation, calibration, matching and
review tooling for slip-shaped artifacts."""

__version__ = "0.1.0"

from .features import EDGE_DIM, EdgeVector, extract_edge_vector, role_for_group
from .physics import (
    FractureCurve,
    FragmentPair,
    ParameterError,
    PhysicsParams,
    corrode_pair,
    generate_dataset,
    generate_pair,
    simulate_fracture,
)
from .matcher import (
    EmbeddingModel,
    TrainConfig,
    TripletBatch,
    embed,
    embed_batch,
    gradient_check,
    init_model,
    score_pair,
    train,
    triplet_loss,
)
from .calibration import (
    GAConfig,
    GENE_BOUNDS,
    ReferenceSet,
    calibrate,
    decode_genome,
    encode_params,
    fitness,
    make_reference,
    pca_2d,
    silhouette,
)
from .baselines import cosine_similarity, dtw_distance, random_similarity
from .datastore import (
    DatasetManifest,
    Fragment,
    GroundTruthPair,
    MatchRecord,
    append_match,
    list_matches,
    load_manifest,
    load_model,
    save_manifest,
    save_model,
)
from .evaluation import (
    RankedList,
    TopKReport,
    evaluate_topk,
    interference_sweep,
    make_scorer,
    rank_candidates,
    similarity_matrix,
)
