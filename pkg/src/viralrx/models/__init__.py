from .encoding import (
    MAX_LEN,
    ResidueOneHotEncoder,
    ResidueTokenizer,
    one_hot,
    one_hot_ids,
    tokenize_batch,
    tokenize_pad,
)
from .estimators import CNNClassifier, LSTMClassifier, load_model, make_classifier
from .networks import (
    CNN,
    LSTM,
    REFERENCE_CNN_PARAMS,
    CnnConfig,
    LstmConfig,
    build,
    build_cnn,
    build_lstm,
    format_layer_table,
)

__all__ = [
    "MAX_LEN",
    "ResidueOneHotEncoder",
    "ResidueTokenizer",
    "one_hot",
    "one_hot_ids",
    "tokenize_batch",
    "tokenize_pad",
    "CNNClassifier",
    "LSTMClassifier",
    "load_model",
    "make_classifier",
    "CNN",
    "LSTM",
    "REFERENCE_CNN_PARAMS",
    "CnnConfig",
    "LstmConfig",
    "build",
    "build_cnn",
    "build_lstm",
    "format_layer_table",
]
