from stressseq.nn.model import NetworkSpec, SequenceClassifier, init_classifier
from stressseq.nn.optim import Adam
from stressseq.nn import layers, losses

__all__ = [
    "NetworkSpec",
    "SequenceClassifier",
    "init_classifier",
    "Adam",
    "layers",
    "losses",
]
