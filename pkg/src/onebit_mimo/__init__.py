"""Two-stage data detection for massive MIMO receivers with one-bit ADCs."""

from .model import (
    ChannelMatrix,
    Constellation,
    TxRxSample,
    constellation,
    lift_matrix,
    lift_vector,
    one_bit_quantize,
    sample_channel,
    transmit,
)

__version__ = "0.1.0"
