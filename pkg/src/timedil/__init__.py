"""Dense sequence prediction with time-dilated convolutions.

Turns a CNN that classifies fixed windows, with strided pooling in time, into
an equivalent fully convolutional network over whole utterances, and checks
the equivalence and the MAC savings.
"""
from ._accel import backend_name
from .densify import DensifyReport, convolutionalize, dense_output_length, densify
from .errors import (
    AlreadyDenseError,
    BoundsError,
    DimensionError,
    InputTooShortError,
    NetworkSemanticError,
    NetworkSyntaxError,
    ShapeError,
    TimedilError,
    UnsupportedFeatureError,
)
from .flops import CostReport, cost_report, count_macs_dense, count_macs_windowed
from .graph import (
    NetworkSpec,
    ShapeTrace,
    build_fig1_toy,
    build_table1,
    forward,
    infer_shapes,
    networks_equal,
    receptive_field_time,
)
from .layers import (
    Activation,
    BatchNormSpec,
    ConvSpec,
    Flatten,
    FullyConnectedSpec,
    PoolSpec,
    batchnorm_inference,
    conv2d_dilated,
    fully_connected,
    maxpool,
    relu,
)
from .netfile import parse_network, serialize_network
from .oracle import EquivalenceReport, eval_dense, eval_spliced, verify_equivalence
from .sbn import SbnSpec, build_sbn_as_cnn, eval_sbn_two_stage
from .tensor import Tensor3, seeded_random, slice_time, zeros

__version__ = "0.1.0"
