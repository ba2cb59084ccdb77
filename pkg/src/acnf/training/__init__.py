"""Losses, surrogate pretraining and the end-to-end training loop."""

from .config import BadConfigError, TrainConfig, default_lambda_bit
from .loop import (
    LOG_COLUMNS,
    DivergenceError,
    GradientLeakError,
    TrainResult,
    lambda_grid_search,
    latest_checkpoint,
    read_loss_log,
    real_codec_group,
    run_header,
    train_end_to_end,
)
from .losses import LossBreakdown, NonFiniteLossError, bit_loss, frozen_call, rec_loss, reg_loss, total_loss
from .pretrain import (
    acn_imitation_psnr,
    benet_relative_error,
    pretrain_acn,
    pretrain_benet,
    pretrain_crnet,
    pretrain_ppnet,
)
