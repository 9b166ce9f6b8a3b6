# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Truncated tensor algebra T^N(R^d)

Each level k holds the d**k coefficients of the words of length k, flattened
in base-d positional order with the first letter most significant. So for
d=2 level 2 is ordered (11, 12, 21, 22).  Letters are 0-based internally;
string words such as '12' are read as 1-based letters.
"""
import numpy as np

from streamsig.util import (
    check_finite,
    DomainError,
    readonly,
    ShapeError,
)


LEVEL0_TOLERANCE = 1e-12


def word_letters(word):
    """0-based letters of a word given as a tuple or a 1-based string"""
    if isinstance(word, str):
        return tuple(int(letter) - 1 for letter in word)
    return tuple(int(letter) for letter in word)


def word_offset(word, dim):
    """Position of a word inside its level"""
    index = 0
    for letter in word_letters(word):
        assert 0 <= letter < dim, f'letter {letter} outside alphabet of size {dim}'
        index = index * dim + letter
    return index


class TruncatedTensor:
    """Immutable element of the truncated tensor algebra"""

    # operations reject deeper truncations, d**N grows too fast beyond this
    max_depth = 6

    __slots__ = ('dim', 'depth', 'levels')

    def __init__(self, dim, depth, levels):
        dim, depth = int(dim), int(depth)
        if dim < 1 or depth < 1:
            raise DomainError(f'dim and depth must be positive: {dim}, {depth}')
        if depth > self.max_depth:
            raise DomainError(
                f'depth {depth} exceeds max_depth {self.max_depth}, '
                'raise TruncatedTensor.max_depth to allow it')
        if len(levels) != depth + 1:
            raise ShapeError(f'Expected {depth + 1} levels, got {len(levels)}')

        frozen = []
        for k, level in enumerate(levels):
            level = readonly(np.ravel(level))
            if level.shape != (dim ** k, ):
                raise ShapeError(
                    f'Level {k} must have {dim ** k} coefficients, got {level.size}')
            frozen.append(check_finite(level, f'tensor level {k}'))

        object.__setattr__(self, 'dim', dim)
        object.__setattr__(self, 'depth', depth)
        object.__setattr__(self, 'levels', tuple(frozen))

    def __setattr__(self, name, value):
        raise AttributeError('TruncatedTensor is immutable')

    def __repr__(self):
        levels = self.to_json()["levels"]
        return f"TruncatedTensor(dim={self.dim}, depth={self.depth}, levels={levels})"

    @classmethod
    def zeros(cls, dim, depth):
        return cls(dim, depth, [np.zeros(dim ** k) for k in range(depth + 1)])

    @classmethod
    def unit(cls, dim, depth):
        levels = [np.zeros(dim ** k) for k in range(depth + 1)]
        levels[0][0] = 1.0
        return cls(dim, depth, levels)

    @classmethod
    def from_degree_one(cls, vector, depth):
        vector = np.asarray(vector, dtype=float)
        dim = vector.size
        levels = [np.zeros(dim ** k) for k in range(depth + 1)]
        levels[1] = vector.ravel()
        return cls(dim, depth, levels)

    @property
    def scalar(self):
        return float(self.levels[0][0])

    def level(self, k):
        return self.levels[k]

    def __getitem__(self, word):
        """Coefficient of a word, e.g. tensor['12'] or tensor[(0, 1)]"""
        letters = word_letters(word)
        return float(self.levels[len(letters)][word_offset(letters, self.dim)])

    def _check_compatible(self, other):
        if not isinstance(other, TruncatedTensor):
            raise TypeError(f'Expected a TruncatedTensor, got {type(other).__name__}')
        if (self.dim, self.depth) != (other.dim, other.depth):
            raise ShapeError(
                f'Mismatched tensors: dim/depth {self.dim}/{self.depth} '
                f'vs {other.dim}/{other.depth}')

    def _map(self, func, other=None):
        if other is None:
            return TruncatedTensor(self.dim, self.depth, [func(a) for a in self.levels])
        self._check_compatible(other)
        return TruncatedTensor(self.dim, self.depth, [
            func(a, b) for a, b in zip(self.levels, other.levels)])

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __neg__(self):
        return self._map(np.negative)

    def __mul__(self, scale):
        return self._map(lambda a: a * float(scale))

    __rmul__ = __mul__

    def __truediv__(self, scale):
        return self._map(lambda a: a / float(scale))

    def __matmul__(self, other):
        return tensor_mul(self, other)

    def allclose(self, other, atol=1e-12):
        self._check_compatible(other)
        return all(np.allclose(a, b, rtol=0, atol=atol)
                   for a, b in zip(self.levels, other.levels))

    def max_abs_diff(self, other):
        self._check_compatible(other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels))

    def to_json(self):
        return dict(dim=self.dim, depth=self.depth,
                    levels=[level.tolist() for level in self.levels])

    @classmethod
    def from_json(cls, data):
        return cls(data['dim'], data['depth'], data['levels'])


def _mul_levels(a_levels, b_levels, depth):
    """Truncated concatenation product of raw level lists"""
    out = [a_levels[0] * b_levels[0]]
    for k in range(1, depth + 1):
        acc = a_levels[0][0] * b_levels[k] + a_levels[k] * b_levels[0][0]
        for j in range(1, k):
            acc = acc + np.outer(a_levels[j], b_levels[k - j]).ravel()
        out.append(acc)
    return out


def tensor_mul(a, b):
    """(a ⊗ b)^I = sum over all splits I = JK of a^J b^K, truncated at depth"""
    a._check_compatible(b)
    return TruncatedTensor(a.dim, a.depth, _mul_levels(a.levels, b.levels, a.depth))


def tensor_product_many(factors, dim=None, depth=None):
    """Left to right product of a sequence of tensors (unit if empty)"""
    factors = list(factors)
    if not factors:
        if dim is None or depth is None:
            raise ShapeError('Need dim and depth for an empty product')
        return TruncatedTensor.unit(dim, depth)
    first = factors[0]
    levels = list(first.levels)
    for factor in factors[1:]:
        first._check_compatible(factor)
        levels = _mul_levels(levels, factor.levels, first.depth)
    return TruncatedTensor(first.dim, first.depth, levels)


def _check_level0(a, expected, name):
    if abs(a.scalar - expected) > LEVEL0_TOLERANCE:
        raise DomainError(f'{name} needs level-0 coefficient {expected}, got {a.scalar}')


def tensor_exp(a):
    """Exponential of a tensor with zero scalar part

    The series terminates at a^N / N! since a is nilpotent in T^N.
    """
    _check_level0(a, 0.0, 'tensor_exp')
    x = a.levels
    result = list(TruncatedTensor.unit(a.dim, a.depth).levels)
    term = result
    for m in range(1, a.depth + 1):
        term = [level / m for level in _mul_levels(term, x, a.depth)]
        result = [r + t for r, t in zip(result, term)]
    return TruncatedTensor(a.dim, a.depth, result)


def tensor_log(g):
    """Logarithm of a tensor with unit scalar part"""
    _check_level0(g, 1.0, 'tensor_log')
    x = [np.zeros(1)] + list(g.levels[1:])
    result = x
    term = x
    for m in range(2, g.depth + 1):
        term = _mul_levels(term, x, g.depth)
        coeff = (-1.0) ** (m + 1) / m
        result = [r + coeff * t for r, t in zip(result, term)]
    return TruncatedTensor(g.dim, g.depth, result)


def segment_signature(increment, depth):
    """Signature exp(v) of a straight segment with increment v

    Level k is v^{⊗k} / k!, the same as tensor_exp of the degree-one element.
    """
    increment = check_finite(np.asarray(increment, dtype=float).ravel(), 'increment')
    levels = [np.ones(1)]
    for k in range(1, depth + 1):
        levels.append(np.outer(levels[-1], increment).ravel() / k)
    return TruncatedTensor(increment.size, depth, levels)


def signature_of_path(points, depth):
    """Signature of the piecewise-linear path through the given vertices"""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) < 1:
        raise ShapeError(f'Expected an (n, d) array of vertices, got shape {points.shape}')
    increments = np.diff(points, axis=0)
    return tensor_product_many(
        (segment_signature(v, depth) for v in increments),
        dim=points.shape[1], depth=depth)

