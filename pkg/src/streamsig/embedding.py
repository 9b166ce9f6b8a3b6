# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Interval log-signatures of irregular observation streams

Channel layout of the embedded path in R^{d_X}:

    [ values (d_disc) | counts (d_disc, optional) | continuous (d_cont) ]

An interval [alpha, beta) collects the factors

    [B_C if alpha == 0] Gamma(alpha, t_1) E_1 Gamma(t_1, t_2) ... E_m Gamma(t_m, beta)

where the selected events satisfy alpha <= t < beta, plus events exactly at T
when beta == T.
"""
import collections
import json
import math

import numpy as np

from streamsig.free_lie import build_basis, from_lyndon, LieElement, to_lyndon
from streamsig.tensor_algebra import (
    segment_signature,
    tensor_exp,
    tensor_log,
    tensor_product_many,
    TruncatedTensor,
)
from streamsig.util import (
    check_finite,
    chunked,
    DomainError,
    IntervalError,
    parallel_map,
    readonly,
    ShapeError,
    StreamFormatError,
    streamsig_logger,
)


DEFAULT_CHUNK_SIZE = 128

REDUCTION_MODES = ('sequential', 'parallel')


class Event(collections.namedtuple('Event', 'time channels values extra')):
    """One observation: 0-based channel indices with their observed values"""

    __slots__ = ()

    def __new__(cls, time, channels, values, extra=None):
        return super().__new__(
            cls, float(time), tuple(int(c) for c in channels),
            tuple(float(v) for v in values), extra)

    def to_json(self):
        data = dict(t=self.time, channels=list(self.channels), values=list(self.values))
        if self.extra is not None:
            data['extra'] = self.extra.to_json()
        return data

    @classmethod
    def from_json(cls, data):
        extra = data.get('extra')
        return cls(data['t'], data['channels'], data['values'],
                   None if extra is None else LieElement.from_json(extra))


class ObservationStream:
    """Time ordered events of d_disc discretely observed channels on [0, T]"""

    def __init__(self, horizon, d_disc, events=()):
        self.horizon = float(horizon)
        self.d_disc = int(d_disc)
        self.events = tuple(e if isinstance(e, Event) else Event(*e) for e in events)
        self._validate()

    def _validate(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise DomainError(f'Horizon must be positive and finite, got {self.horizon}')
        if self.d_disc < 0:
            raise ShapeError(f'd_disc must be non-negative, got {self.d_disc}')

        previous = None
        for i, event in enumerate(self.events):
            if not 0 <= event.time <= self.horizon:
                raise IntervalError(
                    f'Event {i} at t={event.time} outside [0, {self.horizon}]')
            if previous is not None and event.time <= previous:
                raise IntervalError(
                    f'Event times must be strictly increasing: event {i} at '
                    f't={event.time} follows t={previous}')
            previous = event.time

            if not event.channels:
                raise ShapeError(f'Event {i} observes no channels')
            if len(event.channels) != len(event.values):
                raise ShapeError(
                    f'Event {i} has {len(event.channels)} channels '
                    f'but {len(event.values)} values')
            if len(set(event.channels)) != len(event.channels):
                raise ShapeError(f'Event {i} repeats a channel: {event.channels}')
            if not all(0 <= c < self.d_disc for c in event.channels):
                raise ShapeError(
                    f'Event {i} channels {event.channels} outside 0..{self.d_disc - 1}')
            check_finite(event.values, f'values of event {i}')

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __repr__(self):
        return (f'ObservationStream(horizon={self.horizon}, d_disc={self.d_disc}, '
                f'events={len(self.events)})')

    def __eq__(self, other):
        return (isinstance(other, ObservationStream) and
                (self.horizon, self.d_disc) == (other.horizon, other.d_disc) and
                [e[:3] for e in self.events] == [e[:3] for e in other.events])

    @property
    def times(self):
        return np.array([e.time for e in self.events], dtype=float)

    @property
    def has_extras(self):
        return any(e.extra is not None for e in self.events)

    def truncated(self, time):
        """The stream as known strictly before `time`, same horizon"""
        if time >= self.horizon:
            return self
        return ObservationStream(
            self.horizon, self.d_disc, [e for e in self.events if e.time < time])

    def first_values(self):
        """First observed value of each channel, 0 for unobserved channels"""
        first = np.zeros(self.d_disc)
        seen = np.zeros(self.d_disc, dtype=bool)
        for event in self.events:
            for channel, value in zip(event.channels, event.values):
                if not seen[channel]:
                    first[channel] = value
                    seen[channel] = True
            if seen.all():
                break
        return first

    def to_jsonl(self, filename, continuous=None):
        """Write the header line then one line per event"""
        continuous = continuous or ContinuousChannels.empty(self.horizon)
        header = dict(T=self.horizon, d_disc=self.d_disc, **continuous.header_json())
        with open(filename, 'w') as f:
            f.write(json.dumps(header) + '\n')
            for event in self.events:
                f.write(json.dumps(event.to_json()) + '\n')

    @classmethod
    def from_jsonl(cls, filename):
        """Read (stream, continuous channels); errors name the line"""
        with open(filename, 'r') as f:
            lines = [(n, line) for n, line in enumerate(f, start=1) if line.strip()]
        if not lines:
            raise StreamFormatError(f'{filename}: empty stream file')

        def parse(lineno, line, what):
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StreamFormatError(
                    f'{filename}:{lineno}: invalid JSON in {what}: {exc.msg}') from exc
            if not isinstance(data, dict):
                raise StreamFormatError(f'{filename}:{lineno}: {what} must be an object')
            return data

        lineno, line = lines[0]
        header = parse(lineno, line, 'header')
        try:
            horizon, d_disc = float(header['T']), int(header['d_disc'])
            continuous = ContinuousChannels.from_header_json(header, horizon)
        except (KeyError, TypeError, ValueError) as exc:
            raise StreamFormatError(f'{filename}:{lineno}: bad header: {exc}') from exc

        events = []
        for lineno, line in lines[1:]:
            data = parse(lineno, line, 'event')
            try:
                events.append(Event.from_json(data))
            except (KeyError, TypeError, ValueError) as exc:
                raise StreamFormatError(f'{filename}:{lineno}: bad event: {exc}') from exc

        try:
            stream = cls(horizon, d_disc, events)
        except (ShapeError, IntervalError, DomainError) as exc:
            raise StreamFormatError(f'{filename}: {exc}') from exc
        return stream, continuous


class ContinuousChannels:
    """Piecewise-linear path C on [0, T] given by its knots"""

    def __init__(self, knot_times, knot_values, time_channel=None):
        knot_times = readonly(np.ravel(knot_times))
        knot_values = readonly(knot_values)
        if knot_values.ndim == 1:
            knot_values = readonly(knot_values.reshape(len(knot_times), -1))
        if knot_values.ndim != 2 or len(knot_values) != len(knot_times):
            raise ShapeError(
                f'Need one value row per knot: {knot_values.shape} vs {len(knot_times)} knots')
        if len(knot_times) < 2:
            raise ShapeError('Continuous channels need at least two knots')
        if knot_times[0] != 0 or not np.all(np.diff(knot_times) > 0):
            raise IntervalError('Knot times must start at 0 and be strictly increasing')
        check_finite(knot_times, 'knot times')
        check_finite(knot_values, 'knot values')

        if time_channel is not None:
            time_channel = int(time_channel)
            if not 0 <= time_channel < knot_values.shape[1]:
                raise ShapeError(f'Time channel {time_channel} outside the continuous channels')
            if not np.allclose(knot_values[:, time_channel], knot_times, rtol=0, atol=1e-12):
                raise DomainError(f'Channel {time_channel} does not equal time at the knots')

        self.knot_times = knot_times
        self.knot_values = knot_values
        self.time_channel = time_channel

    def __repr__(self):
        return (f'ContinuousChannels(d_cont={self.d_cont}, knots={len(self.knot_times)}, '
                f'time_channel={self.time_channel})')

    @classmethod
    def empty(cls, horizon):
        return cls([0.0, horizon], np.zeros((2, 0)))

    @classmethod
    def time_only(cls, horizon):
        return cls([0.0, horizon], [[0.0], [horizon]], time_channel=0)

    @property
    def horizon(self):
        return float(self.knot_times[-1])

    @property
    def d_cont(self):
        return self.knot_values.shape[1]

    @property
    def has_time_channel(self):
        return self.time_channel is not None

    def with_time(self):
        """Append physical time as the last channel unless already present"""
        if self.has_time_channel:
            return self
        values = np.column_stack([self.knot_values, self.knot_times])
        return ContinuousChannels(self.knot_times, values, time_channel=self.d_cont)

    def value_at(self, time):
        time = float(time)
        if not 0 <= time <= self.horizon:
            raise IntervalError(f't={time} outside [0, {self.horizon}]')
        return np.array([np.interp(time, self.knot_times, column)
                         for column in self.knot_values.T])

    def pieces(self, start, end):
        """Increments of the linear pieces of C restricted to [start, end]"""
        inside = self.knot_times[(self.knot_times > start) & (self.knot_times < end)]
        times = np.concatenate([[start], inside, [end]])
        points = np.array([self.value_at(t) for t in times]).reshape(len(times), self.d_cont)
        return np.diff(points, axis=0)

    def allclose(self, other, atol=1e-12):
        """Same path up to atol, compared on the union of both knot sets"""
        if (self.d_cont, self.horizon) != (other.d_cont, other.horizon):
            return False
        times = np.union1d(self.knot_times, other.knot_times)
        return all(np.allclose(self.value_at(t), other.value_at(t), rtol=0, atol=atol)
                   for t in times)

    def header_json(self):
        return dict(
            d_cont=self.d_cont,
            continuous_knots=[[t, list(v)] for t, v in
                              zip(self.knot_times.tolist(), self.knot_values.tolist())],
            time_channel=self.time_channel,
        )

    @classmethod
    def from_header_json(cls, header, horizon):
        d_cont = int(header.get('d_cont', 0))
        knots = header.get('continuous_knots') or []
        if not knots:
            if d_cont:
                raise ValueError(f'd_cont={d_cont} but no continuous_knots')
            return cls.empty(horizon)
        times = [float(t) for t, _ in knots]
        values = np.array([list(v) for _, v in knots], dtype=float).reshape(len(knots), d_cont)
        continuous = cls(times, values, header.get('time_channel'))
        if continuous.horizon != horizon:
            raise ValueError(f'continuous knots end at {continuous.horizon}, not T={horizon}')
        return continuous


class EmbeddingConfig(collections.namedtuple(
        'EmbeddingConfig', 'depth include_counts d_disc d_cont')):
    """Truncation depth and channel layout of the embedded path"""

    __slots__ = ()

    def __new__(cls, depth, include_counts=True, d_disc=0, d_cont=0):
        config = super().__new__(cls, int(depth), bool(include_counts), int(d_disc), int(d_cont))
        if config.depth < 1:
            raise DomainError(f'depth must be at least 1, got {config.depth}')
        if config.depth > TruncatedTensor.max_depth:
            raise DomainError(
                f'depth {config.depth} exceeds max_depth {TruncatedTensor.max_depth}')
        if config.d_disc < 0 or config.d_cont < 0 or config.d_x < 1:
            raise ShapeError(f'Invalid channel layout: {config}')
        return config

    @classmethod
    def for_stream(cls, stream, continuous, depth, include_counts=True):
        return cls(depth, include_counts, stream.d_disc, continuous.d_cont)

    @property
    def count_offset(self):
        return self.d_disc

    @property
    def continuous_offset(self):
        return 2 * self.d_disc if self.include_counts else self.d_disc

    @property
    def d_x(self):
        return self.continuous_offset + self.d_cont

    @property
    def basis(self):
        return build_basis(self.d_x, self.depth)

    def check(self, stream, continuous):
        if stream.d_disc != self.d_disc or continuous.d_cont != self.d_cont:
            raise ShapeError(
                f'{self} does not match stream d_disc={stream.d_disc}, '
                f'd_cont={continuous.d_cont}')
        if continuous.horizon != stream.horizon:
            raise IntervalError(
                f'Continuous channels end at {continuous.horizon}, stream at {stream.horizon}')

    def to_json(self):
        return dict(self._asdict(), d_x=self.d_x)


class QueryPartition:
    """Query times 0 = r_0 < r_1 < ... < r_M = T"""

    def __init__(self, points):
        points = readonly(np.ravel(points))
        if len(points) < 2:
            raise IntervalError('A partition needs at least two points')
        check_finite(points, 'partition')
        if points[0] != 0:
            raise IntervalError(f'Partition must start at 0, got {points[0]}')
        if not np.all(np.diff(points) > 0):
            raise IntervalError('Partition points must be strictly increasing')
        self.points = points

    def __repr__(self):
        return f'QueryPartition({self.points.tolist()})'

    def __len__(self):
        return len(self.points) - 1

    def __eq__(self, other):
        return isinstance(other, QueryPartition) and np.array_equal(self.points, other.points)

    @classmethod
    def regular(cls, horizon, n_intervals):
        return cls(np.linspace(0.0, horizon, n_intervals + 1))

    @property
    def horizon(self):
        return float(self.points[-1])

    @property
    def intervals(self):
        return list(zip(self.points[:-1].tolist(), self.points[1:].tolist()))

    def to_file(self, filename):
        with open(filename, 'w') as f:
            f.write(json.dumps(self.points.tolist()) + '\n')

    @classmethod
    def from_file(cls, filename):
        with open(filename, 'r') as f:
            try:
                points = json.load(f)
            except json.JSONDecodeError as exc:
                raise StreamFormatError(
                    f'{filename}:{exc.lineno}: invalid partition JSON: {exc.msg}') from exc
        if not isinstance(points, list):
            raise StreamFormatError(f'{filename}: partition must be a JSON array')
        try:
            return cls(points)
        except (IntervalError, ValueError, TypeError) as exc:
            raise StreamFormatError(f'{filename}: {exc}') from exc


def event_increments(stream, config):
    """All event increments delta_i, as rows of an (n, d_X) array

    Each channel is base-pointed at 0 before its first observation.
    """
    if stream.d_disc != config.d_disc:
        raise ShapeError(f'{config} does not match stream d_disc={stream.d_disc}')
    increments = np.zeros((len(stream), config.d_x))
    last = np.zeros(stream.d_disc)
    for i, event in enumerate(stream.events):
        channels = list(event.channels)
        values = np.array(event.values)
        increments[i, channels] = values - last[channels]
        if config.include_counts:
            increments[i, [config.count_offset + c for c in channels]] = 1.0
        last[channels] = values
    return increments


def event_increment(stream, i, config):
    if not 0 <= i < len(stream):
        raise DomainError(f'Event index {i} out of range for {len(stream)} events')
    return event_increments(stream, config)[i]


def _embed_extra(extra, config):
    """Tensor form of a higher-order record inside the value/count coordinates"""
    limit = config.continuous_offset
    if extra.dim > limit:
        raise DomainError(
            f'Extra record of dim {extra.dim} exceeds the {limit} value/count coordinates')
    if np.any(extra.level(1) != 0):
        raise DomainError('Extra records must not carry a level-1 part')

    tensor = from_lyndon(extra)
    d_e, d_x = extra.dim, config.d_x
    levels = [np.zeros(1)]
    for k in range(1, config.depth + 1):
        level = np.zeros((d_x, ) * k)
        if k <= extra.depth:
            level[(slice(0, d_e), ) * k] = tensor.levels[k].reshape((d_e, ) * k)
        levels.append(level.ravel())
    return TruncatedTensor(d_x, config.depth, levels)


def event_factor(stream, i, config, increments=None):
    """E_i = exp(Delta_i), Delta_i = delta_i in degree one plus any extra record"""
    if increments is None:
        delta = event_increment(stream, i, config)
    else:
        delta = increments[i]
    extra = stream.events[i].extra
    if extra is None:
        return segment_signature(delta, config.depth)
    log_factor = TruncatedTensor.from_degree_one(delta, config.depth) + _embed_extra(extra, config)
    return tensor_exp(log_factor)


def _continuous_vector(increment, config):
    vector = np.zeros(config.d_x)
    vector[config.continuous_offset:] = increment
    return vector


def gap_factor(continuous, start, end, config):
    """Signature of the continuous channels over [start, end]"""
    if start > end:
        raise IntervalError(f'Gap start {start} after end {end}')
    if config.d_cont == 0 or start == end:
        return TruncatedTensor.unit(config.d_x, config.depth)
    return tensor_product_many(
        [segment_signature(_continuous_vector(inc, config), config.depth)
         for inc in continuous.pieces(start, end)],
        dim=config.d_x, depth=config.depth)


def base_point_factor(continuous, config):
    """B_C = exp(C_0), prepended to intervals starting at 0"""
    return segment_signature(_continuous_vector(continuous.value_at(0.0), config), config.depth)


def _check_interval(stream, start, end):
    if not 0 <= start < end <= stream.horizon:
        raise IntervalError(f'Need 0 <= alpha < beta <= T={stream.horizon}, got [{start}, {end})')


def selected_events(stream, start, end):
    """Indices of the events assigned to [start, end)"""
    at_horizon = end == stream.horizon
    return [i for i, e in enumerate(stream.events)
            if start <= e.time < end or (at_horizon and e.time == end)]


def interval_factors(stream, continuous, start, end, config, increments=None):
    """Ordered signature factors whose product is G over [start, end)"""
    _check_interval(stream, start, end)
    if increments is None:
        increments = event_increments(stream, config)
    has_continuous = config.d_cont > 0

    factors = []
    if start == 0 and has_continuous:
        factors.append(base_point_factor(continuous, config))
    cursor = start
    for i in selected_events(stream, start, end):
        time = stream.events[i].time
        if has_continuous and time > cursor:
            factors.append(gap_factor(continuous, cursor, time, config))
        factors.append(event_factor(stream, i, config, increments))
        cursor = time
    if has_continuous and end > cursor:
        factors.append(gap_factor(continuous, cursor, end, config))
    return factors


def reduce_factors(factors, config, mode='sequential', chunk_size=DEFAULT_CHUNK_SIZE,
                   threads=None):
    """Product of the factors, chunk by chunk in parallel mode"""
    if mode not in REDUCTION_MODES:
        raise DomainError(f'Unknown reduction mode {mode!r}, expected one of {REDUCTION_MODES}')
    if mode == 'sequential' or len(factors) <= chunk_size:
        return tensor_product_many(factors, dim=config.d_x, depth=config.depth)
    partials = parallel_map(
        lambda chunk: tensor_product_many(chunk), chunked(factors, chunk_size), threads)
    return tensor_product_many(partials)


def interval_signature(stream, continuous, start, end, config, mode='sequential',
                       chunk_size=DEFAULT_CHUNK_SIZE, threads=None):
    """G over [start, end) as a truncated tensor"""
    continuous = continuous or ContinuousChannels.empty(stream.horizon)
    config.check(stream, continuous)
    factors = interval_factors(stream, continuous, start, end, config)
    return reduce_factors(factors, config, mode, chunk_size, threads)


def interval_log_signature(stream, continuous, start, end, config, mode='sequential',
                           chunk_size=DEFAULT_CHUNK_SIZE, threads=None):
    """Phi over [start, end) in Lyndon coordinates"""
    signature = interval_signature(
        stream, continuous, start, end, config, mode, chunk_size, threads)
    return to_lyndon(tensor_log(signature), config.basis)


def partition_log_signatures(stream, continuous, partition, config, mode='sequential',
                             chunk_size=DEFAULT_CHUNK_SIZE, threads=None):
    """Interval log-signatures over every interval of the partition

    In parallel mode the factor lists of all intervals are built concurrently,
    split into chunks that are reduced concurrently, and each interval's
    chunk products are then combined in order.
    """
    if mode not in REDUCTION_MODES:
        raise DomainError(f'Unknown reduction mode {mode!r}, expected one of {REDUCTION_MODES}')
    continuous = continuous or ContinuousChannels.empty(stream.horizon)
    config.check(stream, continuous)
    if partition.horizon != stream.horizon:
        raise IntervalError(
            f'Partition ends at {partition.horizon}, stream horizon is {stream.horizon}')

    increments = event_increments(stream, config)
    intervals = partition.intervals
    dim, depth = config.d_x, config.depth

    def factors_for(interval):
        return interval_factors(stream, continuous, *interval, config, increments)

    if mode == 'sequential':
        signatures = [tensor_product_many(factors_for(iv), dim=dim, depth=depth)
                      for iv in intervals]
    else:
        factor_lists = parallel_map(factors_for, intervals, threads)
        jobs = [(n, chunk) for n, factors in enumerate(factor_lists)
                for chunk in chunked(factors, chunk_size)]
        partials = parallel_map(lambda job: tensor_product_many(job[1]), jobs, threads)
        grouped = [[] for _ in intervals]
        for (n, _), partial in zip(jobs, partials):
            grouped[n].append(partial)
        signatures = [tensor_product_many(group, dim=dim, depth=depth) for group in grouped]

    basis = config.basis
    logsigs = [to_lyndon(tensor_log(g), basis) for g in signatures]
    streamsig_logger.debug(
        f'{len(logsigs)} interval log-signatures, {len(stream)} events, '
        f'd_x={dim}, depth={depth}, mode={mode}')
    return logsigs
