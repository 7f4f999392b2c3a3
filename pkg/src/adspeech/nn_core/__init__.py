"""Minimal convolutional network library with exact hand-derived gradients."""

from .layers import (
    INFER,
    TRAIN,
    BatchNormLayer,
    ConvLayer,
    DenseLayer,
    Dropout,
    GatedConvLayer,
    MaxPoolHalve,
    batchnorm_forward,
    conv1d_forward,
    dense_forward,
    dropout_apply,
    gated_conv_forward,
    maxpool_halve,
    sigmoid,
)
from .checkpoint import load_model, save_model
from .losses import bce_loss
from .model import SWEEP_DEPTHS, Model, ModelConfig, batch_loss, build_model, model_backward, model_forward, output_head
from .optim import Adam, AdamState, adam_step

__all__ = [
    "INFER",
    "SWEEP_DEPTHS",
    "TRAIN",
    "Adam",
    "AdamState",
    "BatchNormLayer",
    "ConvLayer",
    "DenseLayer",
    "Dropout",
    "GatedConvLayer",
    "MaxPoolHalve",
    "Model",
    "ModelConfig",
    "adam_step",
    "batch_loss",
    "batchnorm_forward",
    "bce_loss",
    "build_model",
    "conv1d_forward",
    "dense_forward",
    "dropout_apply",
    "gated_conv_forward",
    "load_model",
    "maxpool_halve",
    "model_backward",
    "model_forward",
    "output_head",
    "save_model",
    "sigmoid",
]
