"""criteria_trainer: toy-scale training of the sequence tagger and word
embeddings consumed by the trialfacts extraction pipeline.

Hand-off to the pipeline is file-based only: the tagger emits tag
interchange JSONL and the embedding trainer emits the text vector format.
"""

from .config import TrainerConfig, Word2VecConfig
from .data import TrainingExample, load_training_file
from .tagger import load_artifact, predict_tags, train_tagger
from .word2vec import train_embeddings

__version__ = "0.1.0"

__all__ = [
    "TrainerConfig",
    "TrainingExample",
    "Word2VecConfig",
    "load_artifact",
    "load_training_file",
    "predict_tags",
    "train_embeddings",
    "train_tagger",
]
