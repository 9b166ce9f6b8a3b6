# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Rectilinear realisation of a stream as one continuous path on auxiliary time

Auxiliary time runs over [0, T + m + 1] for m events:

- [0, 1] carries the base point, from 0 to the embedded C(0)
- physical time s between events i - 1 and i sits at aux time 1 + s + i,
  following the continuous channels with unit slope in the time channel
- event i occupies [1 + t_i + i, 2 + t_i + i] and moves by delta_i with the
  continuous coordinates (time included) held fixed

The log-signature of the realised path over [a(alpha), a(beta)] equals the
interval log-signature computed algebraically, which makes this the oracle for
the embedding.
"""
import collections
import json

import numpy as np

from streamsig.embedding import (
    ContinuousChannels,
    event_increments,
    Event,
    ObservationStream,
)
from streamsig.tensor_algebra import segment_signature, tensor_product_many
from streamsig.util import (
    DomainError,
    IntervalError,
    NotARealizationError,
    UnsupportedError,
)


PLATEAU_TOLERANCE = 1e-9

Segment = collections.namedtuple('Segment', 'aux_start aux_end start end')


class RealizedPath:
    """Piecewise-linear path in R^{d_X} over auxiliary time"""

    def __init__(self, segments, horizon, event_times, time_index):
        self.segments = tuple(
            Segment(float(s.aux_start), float(s.aux_end),
                    np.asarray(s.start, dtype=float), np.asarray(s.end, dtype=float))
            for s in segments)
        self.horizon = float(horizon)
        self.event_times = tuple(float(t) for t in event_times)
        self.time_index = int(time_index)
        for before, after in zip(self.segments, self.segments[1:]):
            assert before.aux_end == after.aux_start, 'segments must chain in aux time'

    def __repr__(self):
        return (f'RealizedPath(d_x={self.d_x}, segments={len(self.segments)}, '
                f'aux_horizon={self.aux_horizon})')

    @property
    def d_x(self):
        return self.segments[0].start.size

    @property
    def aux_horizon(self):
        return self.segments[-1].aux_end

    @property
    def event_markers(self):
        """Aux interval of each segment along which physical time stands still"""
        tau = self.time_index
        return tuple((s.aux_start, s.aux_end) for s in self.segments[1:]
                     if s.start[tau] == s.end[tau])

    def increments(self, start, end):
        """Increments of the segments clipped to [start, end]"""
        pieces = []
        for seg in self.segments:
            lo, hi = max(seg.aux_start, start), min(seg.aux_end, end)
            if hi <= lo:
                continue
            length = seg.aux_end - seg.aux_start
            if lo == seg.aux_start and hi == seg.aux_end:
                pieces.append(seg.end - seg.start)
            else:
                pieces.append((seg.end - seg.start) * ((hi - lo) / length))
        return pieces

    def to_json(self):
        return dict(
            horizon=self.horizon,
            event_times=list(self.event_times),
            time_index=self.time_index,
            aux_horizon=self.aux_horizon,
            segments=[[s.aux_start, s.aux_end, s.start.tolist(), s.end.tolist()]
                      for s in self.segments],
        )

    @classmethod
    def from_json(cls, data):
        return cls([Segment(*s) for s in data['segments']],
                   data['horizon'], data['event_times'], data['time_index'])

    def to_file(self, filename):
        with open(filename, 'w') as f:
            json.dump(self.to_json(), f, indent=1)

    @classmethod
    def from_file(cls, filename):
        with open(filename, 'r') as f:
            return cls.from_json(json.load(f))


def realize(stream, continuous, config):
    """The path Psi(x, C) for degree-one events"""
    config.check(stream, continuous)
    if stream.has_extras:
        raise UnsupportedError('Realisation covers degree-one events only, found extra records')
    if not continuous.has_time_channel:
        raise UnsupportedError('Realisation needs physical time as a continuous channel')

    offset = config.continuous_offset
    increments = event_increments(stream, config)

    def embedded(time, discrete_point):
        point = discrete_point.copy()
        point[offset:] = continuous.value_at(time)
        return point

    segments = []
    origin = np.zeros(config.d_x)
    point = embedded(0.0, origin)
    segments.append(Segment(0.0, 1.0, origin, point))
    # each segment starts exactly where the previous one ended
    aux = 1.0

    def follow(start, end, n_done):
        """Gap segments over physical [start, end], split at the knots"""
        nonlocal point, aux
        knots = continuous.knot_times
        inside = knots[(knots > start) & (knots < end)].tolist()
        for lo, hi in zip([start] + inside, inside + [end]):
            new_point = embedded(hi, point)
            aux_end = 1 + hi + n_done
            segments.append(Segment(aux, aux_end, point, new_point))
            point, aux = new_point, aux_end

    cursor = 0.0
    for i, event in enumerate(stream.events):
        if event.time > cursor:
            follow(cursor, event.time, i)
        new_point = point + increments[i]
        # observed coordinates sit on the observed values, not on a running sum
        new_point[list(event.channels)] = event.values
        new_point[offset:] = point[offset:]
        aux_end = 2 + event.time + i
        segments.append(Segment(aux, aux_end, point, new_point))
        point, aux = new_point, aux_end
        cursor = event.time
    if stream.horizon > cursor:
        follow(cursor, stream.horizon, len(stream))

    return RealizedPath(segments, stream.horizon, stream.times.tolist(),
                        offset + continuous.time_channel)


def aux_bounds(path, start, end):
    """Aux times (a, b) whose path piece carries the interval [start, end)"""
    if not 0 <= start < end <= path.horizon:
        raise IntervalError(f'Need 0 <= alpha < beta <= T={path.horizon}, got [{start}, {end})')
    times = np.array(path.event_times)

    def before(time):
        return int(np.sum(times < time))

    a = 0.0 if start == 0 else 1 + start + before(start)
    b = path.aux_horizon if end == path.horizon else 1 + end + before(end)
    return a, b


def brute_signature(path, start, end, depth):
    """Signature of the path restricted to aux [start, end], segment by segment"""
    if not 0 <= start <= end <= path.aux_horizon:
        raise IntervalError(
            f'Need 0 <= a <= b <= {path.aux_horizon}, got [{start}, {end}]')
    return tensor_product_many(
        [segment_signature(inc, depth) for inc in path.increments(start, end)],
        dim=path.d_x, depth=depth)


def split_event_segments(path):
    """Same path with every event segment cut into two half-length segments"""
    markers = set(path.event_markers)
    segments = []
    for seg in path.segments:
        if (seg.aux_start, seg.aux_end) in markers:
            mid_aux = (seg.aux_start + seg.aux_end) / 2
            mid = (seg.start + seg.end) / 2
            segments.append(Segment(seg.aux_start, mid_aux, seg.start, mid))
            segments.append(Segment(mid_aux, seg.aux_end, mid, seg.end))
        else:
            segments.append(seg)
    return RealizedPath(segments, path.horizon, path.event_times, path.time_index)


def _unit_count(value, where):
    rounded = round(value)
    if abs(value - rounded) > PLATEAU_TOLERANCE or rounded not in (0, 1):
        raise NotARealizationError(f'{where}: count increment {value} is not 0 or 1')
    return rounded == 1


def decode(path, config):
    """Recover (stream, continuous channels) from a realised path

    Events are the plateaus of the time channel after the base point segment.
    Consecutive plateau pieces are merged until they span one unit of aux time.
    """
    if not config.include_counts:
        raise UnsupportedError('Decoding needs count coordinates')
    if path.d_x != config.d_x:
        raise DomainError(f'Path has d_x={path.d_x}, config expects {config.d_x}')

    tol = PLATEAU_TOLERANCE
    tau, offset, d_disc = path.time_index, config.continuous_offset, config.d_disc
    first, rest = path.segments[0], path.segments[1:]
    if first.aux_start != 0 or abs(first.aux_end - 1) > tol or np.any(first.start != 0):
        raise NotARealizationError('Path must start with the base point segment on [0, 1]')

    knot_times = [0.0]
    knot_values = [first.end[offset:]]
    events = []
    plateau = None

    def close_event(plateau):
        delta, time, n = plateau['delta'], plateau['time'], len(events)
        if np.any(np.abs(plateau['drift']) > tol):
            raise NotARealizationError(
                f'Event {n}: continuous coordinates move during the event')
        counts = delta[d_disc:2 * d_disc]
        channels = [k for k in range(d_disc) if _unit_count(counts[k], f'Event {n}')]
        if not channels:
            raise NotARealizationError(f'Event {n} at aux {plateau["aux"]} observes no channel')
        for k in set(range(d_disc)) - set(channels):
            if abs(delta[k]) > tol:
                raise NotARealizationError(f'Event {n}: channel {k} moves without a count')
        values = [float(plateau['end'][k]) for k in channels]
        events.append(Event(time, channels, values))

    for seg in rest:
        length = seg.aux_end - seg.aux_start
        move = seg.end - seg.start
        if abs(move[tau]) <= tol:
            if plateau is None:
                plateau = dict(aux=seg.aux_start, time=float(seg.start[tau]),
                               delta=np.zeros(path.d_x), drift=np.zeros(path.d_x - offset),
                               length=0.0)
            plateau['delta'] += move
            plateau['end'] = seg.end
            plateau['drift'] += move[offset:]
            plateau['length'] += length
            if plateau['length'] > 1 + tol:
                raise NotARealizationError(
                    f'Plateau starting at aux {plateau["aux"]} is longer than one unit')
            if abs(plateau['length'] - 1) <= tol:
                close_event(plateau)
                plateau = None
        elif abs(move[tau] - length) <= tol:
            if plateau is not None:
                raise NotARealizationError(
                    f'Plateau starting at aux {plateau["aux"]} ends after '
                    f'{plateau["length"]} aux units')
            if np.any(np.abs(move[:offset]) > tol):
                raise NotARealizationError(
                    f'Discrete coordinates move between events at aux {seg.aux_start}')
            knot_times.append(float(seg.end[tau]))
            knot_values.append(seg.end[offset:])
        else:
            raise NotARealizationError(
                f'Time channel slope {move[tau] / length} at aux {seg.aux_start} '
                'is neither 0 nor 1')
    if plateau is not None:
        raise NotARealizationError('Path ends inside an event plateau')

    horizon = knot_times[-1]
    time_channel = tau - offset
    if len(knot_times) < 2:
        raise NotARealizationError('Path never advances physical time')
    continuous = ContinuousChannels(knot_times, np.array(knot_values), time_channel)
    return ObservationStream(horizon, d_disc, events), continuous
