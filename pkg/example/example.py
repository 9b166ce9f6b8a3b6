# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Simple example file showing how the log-signatures of an event stream are
computed, checked against the realised path, and fed to a linear CDE model
"""
import logging
import sys

from streamsig import (
    ContinuousChannels,
    EmbeddingConfig,
    forward,
    lift,
    LogSliceModel,
    ObservationStream,
    partition_log_signatures,
    QueryPartition,
    readout,
)
from streamsig.embedding import interval_signature
from streamsig.oracle import aux_bounds, brute_signature, realize


def streamsig_logging_to_console(enable=True):
    if enable:
        logger = logging.getLogger('streamsig')
        logger.setLevel('INFO')

        console = logging.StreamHandler(sys.stdout)
        console.setLevel(logging.INFO)
        logger.addHandler(console)


if __name__ == '__main__':
    streamsig_logging_to_console()

    stream = ObservationStream(4.0, 2, [
        (0.5, [0], [1.0]),
        (1.5, [0, 1], [2.0, -1.0]),
        (2.5, [1], [0.5]),
        (4.0, [0], [3.0]),
    ])
    continuous = ContinuousChannels.empty(stream.horizon).with_time()
    config = EmbeddingConfig.for_stream(stream, continuous, depth=3)
    partition = QueryPartition([0, 1.5, 3, 4])

    print(f"Embedding {len(stream)} events in d_x={config.d_x}, "
          f"{config.basis.size} Lyndon words up to depth {config.depth}")

    logsigs = partition_log_signatures(stream, continuous, partition, config)
    for (start, end), phi in zip(partition.intervals, logsigs):
        print(f"[{start}, {end}): {phi}")

    # the same signatures from the piecewise linear path
    path = realize(stream, continuous, config)
    for start, end in partition.intervals:
        direct = interval_signature(stream, continuous, start, end, config)
        brute = brute_signature(path, *aux_bounds(path, start, end), config.depth)
        print(f"[{start}, {end}): max difference to the path {direct.max_abs_diff(brute):.2e}")

    # an untrained model over the partition
    model = LogSliceModel.init(config.d_x, hidden_dim=8, d_out=1, block_size=4, seed=1)
    states = forward(model, lift(model, config.basis), logsigs, mode='scan')
    print(f"Predictions: {readout(model, states).ravel()}")
