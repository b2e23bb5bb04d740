"""From-scratch regressors for flamelet tables: linear SGD, MLP, random
forest and epsilon-SVR, with shared scaling, metrics and a model format."""

from .base import FAMILIES, TrainedModel
from .errors import (
    DimensionMismatch,
    Diverged,
    EmptyDataset,
    InvalidConfig,
    MLError,
    NotConverged,
    ShapeMismatch,
)
from .forest import RFConfig, train_rf
from .linear import LRConfig, train_lr_sgd
from .metrics import TrainReport, accuracy, mse, negative_counts, per_target_accuracy
from .mlp import MLPConfig, backprop_gradient, train_mlp
from .model import (
    evaluate,
    load_model,
    make_config,
    model_from_text,
    model_to_text,
    predict,
    predict_scaled,
    save_model,
    split_dataset,
    train,
    train_and_evaluate,
)
from .scaling import ColumnScaler, ScalerParams, fit_scaler
from .svr import SVRConfig, train_svr
