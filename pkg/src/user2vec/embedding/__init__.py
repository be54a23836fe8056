"""word2vec (cbow, sg) and doc2vec (dm, dbow) with exact softmax or negative sampling."""
from .io import load_model, read_header, save_model
from .model import DOC_MODES, MODES, OBJECTIVES, EmbeddingModel, TrainConfig
from .objective import corpus_log_likelihood, forward_softmax
from .train import infer_doc, infer_docs, train
from .vocab import Vocabulary, build_vocab

__all__ = [
    "DOC_MODES", "MODES", "OBJECTIVES", "EmbeddingModel", "TrainConfig", "Vocabulary",
    "build_vocab", "corpus_log_likelihood", "forward_softmax", "infer_doc", "infer_docs",
    "load_model", "read_header", "save_model", "train",
]
