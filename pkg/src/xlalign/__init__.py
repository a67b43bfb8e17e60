"""Cross-lingual sentence alignment engine: token-level similarity with
in-batch normalization, contrastive scorer training, ranking evaluation,
and threshold mining."""

__version__ = "0.1.0"

from .ablation import AblationGrid, PoolingMethod, avg_pool_similarity, run_grid
from .corpus import (
    BitextCorpus,
    BitextPair,
    BudgetSpec,
    decontaminate,
    filter_min_tokens,
    plan_topk,
    sample_budget,
)
from .errors import AlignerError, DataError, FormatError
from .mining import (
    CandidateRule,
    MiningConfig,
    MiningReport,
    f1_against_gold,
    mine,
    sweep_threshold,
)
from .normalize import NormalizationConfig, NormScope, SimilarityTile, normalize, normalize_streamed
from .retrieval import EvalReport, RetrievalTask, aggregate, evaluate_retrieval
from .scoring import (
    BertScoreBreakdown,
    ScoreMode,
    ScorerParams,
    bert_score,
    load_params,
    save_params,
    score_tile,
)
from .store import (
    SentenceEmbedding,
    TokenEmbeddingSet,
    load_set,
    read_embedding_set,
    save_set,
    write_embedding_set,
)
from .synthetic import SyntheticCorpusSpec, generate_synthetic_pair
from .training import (
    LossReport,
    TrainerConfig,
    batch_loss_and_grad,
    global_inbatch_loss,
    onedim_inbatch_loss,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
