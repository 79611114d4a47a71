"""hazardnet: a small pyramidal CNN that classifies 32x32 first-person
camera frames into 12 environmental fall-hazard classes, trained full-batch
with resilient backpropagation."""

from .errors import (
    ConfigError,
    DataError,
    DecodeError,
    DimensionError,
    HazardNetError,
    LabelError,
)
from .network import (
    ForwardCache,
    Gradients,
    Network,
    NetworkConfig,
    backward,
    forward,
    init_network,
    num_params,
    shape_plan,
    zero_network,
)
from .tensor_ops import (
    Activation,
    KernelBank,
    PoolCache,
    activate,
    activate_backward,
    conv2d_backward,
    conv2d_valid,
    maxpool2x2,
    maxpool2x2_backward,
)
from .training import (
    EpochMetrics,
    GradCheckReport,
    RpropState,
    TrainConfig,
    batch_gradient,
    check_gradients,
    fit,
    history_csv_lines,
    mse_gradient,
    mse_loss,
    one_hot_target,
    rprop_step,
    train_epoch,
)

__version__ = "0.1.0"
