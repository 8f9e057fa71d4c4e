"""Subject-category classification of scholarly abstracts.

Pipeline: TF-IDF-ranked token selection, word-embedding sequences, stacked
bidirectional LSTM/GRU layers with attention pooling, and a two-level
classifier for imbalanced label sets. All numerics are hand-rolled numpy.
"""

from .corpus import Document, PreprocessConfig, ingest_corpus, preprocess_abstract
from .embed import EmbeddingTable, FeatureSequence, embed_sequence, load_embedding_table, vocab_overlap
from .features import IdfTable, PAD, build_idf, select_and_reorder, tfidf_rank
from .hierarchy import LabelSchema, build_two_level_schema, imbalance_ratio, merge_categories, route_predict
from .net import (
    AttentionParams,
    CellParams,
    ModelParams,
    attention_forward,
    gradient_check,
    gru_cell_forward,
    init_model,
    lstm_cell_forward,
    model_backward,
    model_forward,
    output_layer,
    run_bidirectional_stack,
)
from .evaluation import EvalReport, confusion_submatrix, score_predictions
from .train import (
    AdamState,
    ModelSpec,
    TrainConfig,
    adam_step,
    apply_dropout,
    load_checkpoint,
    sample_training_set,
    save_checkpoint,
    train_model,
)

__version__ = "0.1.0"
