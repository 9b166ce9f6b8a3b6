# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

import os

import numpy as np
import pytest

from streamsig.embedding import ContinuousChannels, Event, ObservationStream, QueryPartition


@pytest.fixture(scope='session')
def fixture_dir():
    return os.path.join(os.path.dirname(__file__), 'fixtures')


@pytest.fixture
def small_stream():
    """Two channels, one joint observation and one event exactly at T"""
    return ObservationStream(4.0, 2, [
        Event(0.5, [0], [1.0]),
        Event(1.5, [0, 1], [2.0, -1.0]),
        Event(2.5, [1], [0.5]),
        Event(4.0, [0], [3.0]),
    ])


@pytest.fixture
def wiggly_continuous():
    """One piecewise-linear channel plus physical time"""
    return ContinuousChannels(
        [0.0, 1.0, 3.0, 4.0], [[0.2], [1.0], [-0.5], [0.3]]).with_time()


@pytest.fixture
def small_partition():
    return QueryPartition([0.0, 1.5, 3.0, 4.0])


@pytest.fixture
def random_stream():
    """Generator of random streams keyed by seed"""

    def make(seed, n_events=12, d_disc=3, horizon=5.0):
        rng = np.random.default_rng(seed)
        times = np.sort(rng.choice(np.arange(1, 1000), n_events, replace=False)) * horizon / 1000
        events = []
        for t in times:
            n_channels = rng.integers(1, d_disc + 1)
            channels = sorted(rng.choice(d_disc, n_channels, replace=False).tolist())
            events.append(Event(t, channels, rng.normal(size=n_channels)))
        return ObservationStream(horizon, d_disc, events)

    return make
