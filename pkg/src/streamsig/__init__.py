from .embedding import (
    ContinuousChannels,
    EmbeddingConfig,
    Event,
    interval_log_signature,
    ObservationStream,
    partition_log_signatures,
    QueryPartition,
)
from .free_lie import LieElement, LyndonBasis, build_basis, from_lyndon, to_lyndon
from .log_slice import forward, lift, LogSliceModel, readout
from .tensor_algebra import tensor_exp, tensor_log, TruncatedTensor
from .util import StreamSigException
from .version import __version__
