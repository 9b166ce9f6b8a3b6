# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Synthetic datasets: coupled sinusoids under four sampling regimes and a
linear system driven by a 4-dimensional Brownian rough path
"""
import collections
import os

import numpy as np

from streamsig.embedding import (
    ContinuousChannels,
    Event,
    ObservationStream,
    QueryPartition,
)
from streamsig.free_lie import build_basis, LieElement
from streamsig.log_slice import expm, inclusive_scan
from streamsig.util import (
    DomainError,
    dump_json,
    load_text,
    parallel_map,
    rng_for,
    StreamFormatError,
    streamsig_logger,
    to_jsonable,
)


MANIFEST_NAME = 'manifest.json'

SINUSOID_HORIZON = 10.0
SINUSOID_REGULAR_POINTS = 128
SINUSOID_INTERVALS = (16, 32)

# Poisson rates per unit time
IRREGULAR_RATE = (8.0, 10.0)
DENSE_RATE = (12.0, 20.0)
SPARSE_RATE = (2.0, 4.0)

REGIMES = ('sync_regular', 'sync_irregular', 'async_irregular', 'async_sparse')

BROWNIAN_CELLS = 2048
BROWNIAN_DIM = 4
BROWNIAN_INTERVALS = (2, 4, 8, 16, 32, 64)
BROWNIAN_X0 = (1.0, 0.0)
BROWNIAN_V1 = 0.15 * np.array([[-0.5, -1.0], [1.0, -0.5]])
BROWNIAN_V2 = 0.15 * np.array([[-0.2, 0.8], [0.3, -0.7]])

Dataset = collections.namedtuple('Dataset', 'task params samples')


class SinusoidSample(collections.namedtuple(
        'SinusoidSample', 'stream partition targets params')):
    """Observed sinusoid stream, its query partition and x(q_{k+1}) targets"""

    __slots__ = ()

    def to_stream(self):
        return self.stream, ContinuousChannels.empty(self.stream.horizon)


def sinusoid_signal(times, omega, phi, amplitudes, offsets):
    """x_i(t) = A_i sin(omega t + phi + delta_i), one column per channel"""
    phase = omega * np.asarray(times, dtype=float)[:, None] + phi
    return np.asarray(amplitudes) * np.sin(phase + np.asarray(offsets))


def poisson_times(rng, rate, horizon):
    """Poisson event times in (0, horizon) from exponential inter-arrivals

    Fewer than two events fall back to two uniform times.
    """
    times = []
    t = rng.exponential(1 / rate)
    while t < horizon:
        times.append(t)
        t += rng.exponential(1 / rate)
    if len(times) < 2:
        streamsig_logger.warning(f'Poisson fallback: {len(times)} events at rate {rate}')
        times = rng.uniform(0, horizon, 2).tolist()
    return np.sort(np.array(times))


def _observation_times(regime, rng, horizon):
    """(per channel observation times, per channel rates)"""
    if regime == 'sync_regular':
        grid = np.linspace(0, horizon, SINUSOID_REGULAR_POINTS + 2)[1:-1]
        return [grid, grid], None
    if regime == 'sync_irregular':
        rate = rng.uniform(*IRREGULAR_RATE)
        grid = poisson_times(rng, rate, horizon)
        return [grid, grid], [rate, rate]
    if regime == 'async_irregular':
        rates = rng.uniform(*IRREGULAR_RATE, size=2)
    else:
        rates = np.array([rng.uniform(*DENSE_RATE), rng.uniform(*SPARSE_RATE)])
    return [poisson_times(rng, rate, horizon) for rate in rates], rates.tolist()


def merge_observations(channel_times, channel_values):
    """One event per distinct time holding every channel observed at it"""
    observed = collections.defaultdict(dict)
    for channel, (times, values) in enumerate(zip(channel_times, channel_values)):
        for t, v in zip(times, values):
            observed[float(t)][channel] = float(v)
    return [Event(t, list(observed[t]), list(observed[t].values()))
            for t in sorted(observed)]


def sinusoid_sample(regime, seed, index, horizon=SINUSOID_HORIZON):
    rng = rng_for(seed, regime, index)
    omega = rng.uniform(0.8, 1.6)
    phi = rng.uniform(0, 2 * np.pi)
    amplitudes = rng.uniform(0.7, 1.3, size=2)
    offsets = rng.uniform(0, 2 * np.pi, size=2)

    channel_times, rates = _observation_times(regime, rng, horizon)
    channel_values = [
        sinusoid_signal(times, omega, phi, amplitudes, offsets)[:, channel]
        for channel, times in enumerate(channel_times)]
    stream = ObservationStream(horizon, 2, merge_observations(channel_times, channel_values))

    n_intervals = int(rng.integers(SINUSOID_INTERVALS[0], SINUSOID_INTERVALS[1] + 1))
    interior = np.sort(rng.uniform(0, horizon, n_intervals - 1))
    partition = QueryPartition(np.concatenate([[0.0], interior, [horizon]]))
    targets = sinusoid_signal(partition.points[1:], omega, phi, amplitudes, offsets)

    params = dict(omega=omega, phi=phi, amplitudes=amplitudes.tolist(),
                  offsets=offsets.tolist(), rates=rates, n_intervals=n_intervals)
    return SinusoidSample(stream, partition, targets, params)


def gen_sinusoid(regime, n_samples, seed, threads=None):
    """Coupled sinusoid samples, deterministic per (seed, regime, index)"""
    if regime not in REGIMES:
        raise DomainError(f'Unknown regime {regime!r}, expected one of {REGIMES}')
    samples = parallel_map(
        lambda index: sinusoid_sample(regime, seed, index), range(n_samples), threads)
    params = dict(task='sinusoid', regime=regime, n_samples=n_samples, seed=seed,
                  T=SINUSOID_HORIZON)
    streamsig_logger.info(f'Generated {n_samples} sinusoid samples, regime {regime}')
    return Dataset('sinusoid', params, samples)


class BrownianSample(collections.namedtuple('BrownianSample', 'cells partition targets')):
    """Depth-2 log-signature per grid cell with X(q_{k+1}) targets

    cells is (2048, 10): the 4 increments then the 6 Levy areas in Lyndon
    order 12, 13, 14, 23, 24, 34.  The event for cell j sits at t = j / 2048
    so a cut at grid index c assigns cells j < c to the earlier interval.
    """

    __slots__ = ()

    def to_stream(self):
        basis = build_basis(BROWNIAN_DIM, 2)
        n_cells = len(self.cells)
        values = np.cumsum(self.cells[:, :BROWNIAN_DIM], axis=0)
        channels = list(range(BROWNIAN_DIM))
        events = []
        for j in range(n_cells):
            extra = None
            if np.any(self.cells[j, BROWNIAN_DIM:]):
                extra = LieElement(basis, np.concatenate(
                    [np.zeros(BROWNIAN_DIM), self.cells[j, BROWNIAN_DIM:]]))
            events.append(Event(j / n_cells, channels, values[j], extra))
        return ObservationStream(1.0, BROWNIAN_DIM, events), ContinuousChannels.empty(1.0)


def cell_log_signatures(fine_increments):
    """Depth-2 log-signatures of cells made of linear sub-segments

    fine_increments is (n_cells, F, d).  For a chain of segments the level-2
    part is 1/2 sum_{i<j} [v_i, v_j], whose Lyndon coordinate on (a, b) is
    1/2 (S_ab - S_ba) with S_ab = sum_j W_{j-1}^a v_j^b.
    """
    fine_increments = np.asarray(fine_increments, dtype=float)
    dim = fine_increments.shape[-1]
    before = np.cumsum(fine_increments, axis=1) - fine_increments
    crossed = np.einsum('cja,cjb->cab', before, fine_increments)
    areas = (crossed - np.swapaxes(crossed, 1, 2)) / 2
    level2 = [areas[:, a, b] for a, b in build_basis(dim, 2).words_at(2)]
    return np.column_stack([fine_increments.sum(axis=1)] + level2)


def brownian_partition(n_intervals, seed, n_cells=BROWNIAN_CELLS):
    """Cut indices drawn without replacement, shared by every sample of a run"""
    if n_intervals not in BROWNIAN_INTERVALS:
        raise DomainError(
            f'Number of intervals must be one of {BROWNIAN_INTERVALS}, got {n_intervals}')
    rng = rng_for(seed, 'partition')
    cuts = np.sort(rng.choice(np.arange(1, n_cells), n_intervals - 1, replace=False))
    return np.concatenate([[0], cuts, [n_cells]]).astype(int)


def brownian_targets(cells, cut_indices, vector_fields=None, x0=BROWNIAN_X0):
    """X at every cut by stepping X <- exp(V1 dW1 + V2 dW2 + a12 (V2 V1 - V1 V2)) X"""
    v1, v2 = (BROWNIAN_V1, BROWNIAN_V2) if vector_fields is None else vector_fields
    v1, v2 = np.asarray(v1, dtype=float), np.asarray(v2, dtype=float)
    area_index = build_basis(BROWNIAN_DIM, 2).index((0, 1))
    bracket = v2 @ v1 - v1 @ v2
    generators = (cells[:, 0, None, None] * v1 + cells[:, 1, None, None] * v2 +
                  cells[:, area_index, None, None] * bracket)
    prefix = inclusive_scan(expm(generators))
    return prefix[np.asarray(cut_indices[1:]) - 1] @ np.asarray(x0, dtype=float)


def brownian_sample(index, seed, cut_indices, subgrid_factor, vector_fields=None):
    rng = rng_for(seed, 'brownian', index)
    n_cells = BROWNIAN_CELLS
    scale = np.sqrt(1.0 / (n_cells * subgrid_factor))
    fine = rng.normal(0.0, scale, (n_cells, subgrid_factor, BROWNIAN_DIM))
    cells = cell_log_signatures(fine)
    targets = brownian_targets(cells, cut_indices, vector_fields)
    partition = QueryPartition(np.asarray(cut_indices) / n_cells)
    return BrownianSample(cells, partition, targets)


def gen_brownian(n_samples, n_intervals, seed, subgrid_factor=16, vector_fields=None,
                 threads=None):
    """Brownian cells and Stratonovich linear system targets"""
    if subgrid_factor < 4:
        raise DomainError(f'Subgrid factor must be at least 4, got {subgrid_factor}')
    cut_indices = brownian_partition(n_intervals, seed)
    samples = parallel_map(
        lambda index: brownian_sample(index, seed, cut_indices, subgrid_factor, vector_fields),
        range(n_samples), threads)
    params = dict(task='brownian', m=n_intervals, n_samples=n_samples, seed=seed,
                  F=subgrid_factor, cut_indices=cut_indices.tolist())
    streamsig_logger.info(f'Generated {n_samples} Brownian samples, m={n_intervals}')
    return Dataset('brownian', params, samples)


class StoredSample(collections.namedtuple(
        'StoredSample', 'stream continuous partition targets params')):
    """A sample read back from a dataset directory"""

    __slots__ = ()

    def to_stream(self):
        return self.stream, self.continuous


def truncate_to_level1(sample):
    """Drop the level-2 input, keeping the increments"""
    if isinstance(sample, BrownianSample):
        cells = np.array(sample.cells)
        cells[:, BROWNIAN_DIM:] = 0.0
        return sample._replace(cells=cells)
    stream = sample.stream
    events = [e._replace(extra=None) for e in stream.events]
    return sample._replace(stream=ObservationStream(stream.horizon, stream.d_disc, events))


def sample_filename(index):
    return f'sample_{index:05d}.jsonl'


def partition_filename(index):
    return f'sample_{index:05d}.partition.json'


def save_dataset(dataset, out_dir):
    """Stream and partition files plus a manifest holding partitions and targets"""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for index, sample in enumerate(dataset.samples):
        stream, continuous = sample.to_stream()
        filename = sample_filename(index)
        stream.to_jsonl(os.path.join(out_dir, filename), continuous)
        sample.partition.to_file(os.path.join(out_dir, partition_filename(index)))
        entries.append(dict(
            file=filename,
            partition_file=partition_filename(index),
            partition=sample.partition.points.tolist(),
            targets=np.asarray(sample.targets).tolist(),
            first_values=stream.first_values().tolist(),
            params=to_jsonable(getattr(sample, 'params', {})),
        ))
    manifest = dict(dataset.params, samples=entries)
    dump_json(manifest, os.path.join(out_dir, MANIFEST_NAME), indent=1)
    streamsig_logger.info(f'Wrote {len(entries)} samples to {out_dir}')
    return manifest


def load_dataset(in_dir):
    manifest_path = os.path.join(in_dir, MANIFEST_NAME)
    manifest = load_text(manifest_path)
    try:
        entries = manifest.pop('samples')
        samples = []
        for entry in entries:
            stream, continuous = ObservationStream.from_jsonl(
                os.path.join(in_dir, entry['file']))
            samples.append(StoredSample(
                stream, continuous, QueryPartition(entry['partition']),
                np.array(entry['targets'], dtype=float), entry.get('params', {})))
    except (KeyError, TypeError, AttributeError) as exc:
        raise StreamFormatError(f'{manifest_path}: malformed manifest: {exc}') from exc
    return Dataset(manifest.get('task'), manifest, samples)

