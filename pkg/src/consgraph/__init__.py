"""Denoise interaction histories by keeping each user's largest cluster of
mutually similar items, and train/evaluate a dot-product sequential
recommender on the result."""

from .catalog import (InteractionHistory, ItemRecord, load_catalog, render_nip_instruction,
                      verbalize_history, verbalize_item)
from .embed import (TrainConfig, TrainableModel, embed_tfidf, encode_user, nip_loss, train_nip)
from .evaluation import (EvalReport, aggregate, ndcg_at_k, permutation_test, recall_at_k,
                         similarity_report)
from .graph import (ComponentSet, FilteredHistory, SimilarityGraph, build_graph,
                    connected_components, cosine, denoise, filter_history, select_max_component)
from .config import RunConfig
from .ingest import Dataset, SplitExample, core_filter, leave_one_out, load_interactions, partition
from .recommender import (FilterConfig, RankingResult, rank_target, score_candidates,
                          train_recommender)
from .synth import (NoisyCorpusConfig, PlantedInstance, filter_precision_recall, gen_noisy_corpus,
                    gen_planted, verify_assumptions)
from .vectors import EmbeddingMatrix, embed_from_file

__version__ = "0.1.0"
