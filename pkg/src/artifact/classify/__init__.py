"""Document classifiers and their majority-vote ensemble."""

from artifact.classify.centroid import CentroidModel, UndefinedCosine, predict_centroid, train_centroid
from artifact.classify.embeddings import EmbeddingModel, UnrepresentableDocument, docov, docov_length, train_skipgram
from artifact.classify.ensemble import ClassifierConfig, EmbeddingConfig, TargetModels, predict_target, train_target
from artifact.classify.features import LabelError, LabeledCorpus, labeled_corpus
from artifact.classify.logistic import LogisticModel, predict_logreg, train_logreg
from artifact.classify.naive_bayes import NaiveBayesModel, predict_nb, train_nb
from artifact.classify.serialize import ModelFormatError, load_model, save_model
from artifact.classify.vote import DocPrediction, PredictionSet, Vote, majority_vote

__all__ = [
    "CentroidModel", "ClassifierConfig", "DocPrediction", "EmbeddingConfig", "EmbeddingModel", "LabelError",
    "LabeledCorpus", "LogisticModel", "ModelFormatError", "NaiveBayesModel", "PredictionSet", "TargetModels",
    "UndefinedCosine", "UnrepresentableDocument", "Vote", "docov", "docov_length", "labeled_corpus",
    "load_model", "majority_vote", "predict_centroid", "predict_logreg", "predict_nb", "predict_target",
    "save_model", "train_centroid", "train_logreg", "train_nb", "train_skipgram", "train_target",
]
