# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Free Lie algebra L^N(R^d) in the Lyndon basis

Words are ordered by (length, lexicographic).  Each Lyndon word w of length
two or more carries its standard factorization w = uv, v the longest proper
Lyndon suffix, and its basis tensor is the bracket [P(u), P(v)].
"""
import functools

import networkx as nx
import numpy as np

try:
    from sympy.functions.combinatorial.numbers import mobius
except ImportError:  # pragma: no cover
    from sympy.ntheory import mobius
from sympy.ntheory import divisors

from streamsig.tensor_algebra import tensor_mul, TruncatedTensor
from streamsig.util import (
    check_finite,
    NotALieElementError,
    readonly,
    ShapeError,
)


PROJECTION_TOLERANCE = 1e-9


def witt_dim(dim, k):
    """Dimension of the degree k part of the free Lie algebra on dim letters"""
    assert dim >= 1 and k >= 1
    total = sum(int(mobius(m)) * dim ** (k // m) for m in divisors(k))
    return total // k


def is_lyndon(word):
    """Strictly smaller than all of its proper rotations"""
    word = tuple(word)
    return bool(word) and all(word < word[i:] + word[:i] for i in range(1, len(word)))


def lyndon_words(dim, depth):
    """All Lyndon words up to length depth, sorted by (length, lex)

    Duval's algorithm, which emits them in plain lexicographic order.
    """
    words = []
    w = [-1]
    while w:
        w[-1] += 1
        words.append(tuple(w))
        m = len(w)
        while len(w) < depth:
            w.append(w[-m])
        while w and w[-1] == dim - 1:
            w.pop()
    return sorted(words, key=lambda word: (len(word), word))


def standard_factorization(word):
    """(u, v) with word = uv and v the longest proper Lyndon suffix"""
    assert len(word) >= 2
    for i in range(1, len(word)):
        if is_lyndon(word[i:]):
            return word[:i], word[i:]
    raise AssertionError(f'{word} has no Lyndon suffix')  # pragma: no cover


def word_label(word):
    """1-based printable label, e.g. (0, 1) -> '12'"""
    if all(letter < 9 for letter in word):
        return ''.join(str(letter + 1) for letter in word)
    return ','.join(str(letter + 1) for letter in word)


class LyndonBasis:
    """Lyndon words with their bracket trees and projection matrices"""

    def __init__(self, dim, depth):
        if dim < 1 or depth < 1:
            raise ShapeError(f'dim and depth must be positive: {dim}, {depth}')
        self.dim = dim
        self.depth = depth
        self.words = tuple(lyndon_words(dim, depth))
        self.word_index = {word: i for i, word in enumerate(self.words)}
        self.level_sizes = tuple(
            sum(1 for w in self.words if len(w) == k) for k in range(1, depth + 1))

        # directed graph from the factors of each word to the word
        self.factors = {}
        self.dep_graph = nx.DiGraph()
        self.dep_graph.add_nodes_from(self.words)
        for word in self.words:
            if len(word) > 1:
                u, v = standard_factorization(word)
                self.factors[word] = (u, v)
                self.dep_graph.add_edge(u, word)
                self.dep_graph.add_edge(v, word)

        # homogeneous bracket tensor of each word, flattened in its level
        brackets = {}
        for word in self.evaluation_order:
            if len(word) == 1:
                unit = np.zeros(dim)
                unit[word[0]] = 1.0
                brackets[word] = unit
            else:
                u, v = self.factors[word]
                brackets[word] = (np.outer(brackets[u], brackets[v]).ravel() -
                                  np.outer(brackets[v], brackets[u]).ravel())
        self.bracket_tensors = brackets

        self.level_matrices = tuple(
            readonly(np.stack([brackets[w] for w in self.words_at(k)], axis=1))
            for k in range(1, depth + 1))
        self.level_pinvs = tuple(
            readonly(np.linalg.pinv(matrix)) for matrix in self.level_matrices)

    def __repr__(self):
        return f'LyndonBasis(dim={self.dim}, depth={self.depth}, size={self.size})'

    def __eq__(self, other):
        return (isinstance(other, LyndonBasis) and
                (self.dim, self.depth) == (other.dim, other.depth))

    def __hash__(self):
        return hash((self.dim, self.depth))

    def __reduce__(self):
        return build_basis, (self.dim, self.depth)

    @property
    def size(self):
        return len(self.words)

    @property
    def labels(self):
        return tuple(word_label(word) for word in self.words)

    @property
    def evaluation_order(self):
        """Words ordered so each comes after both of its factors"""
        return tuple(nx.lexicographical_topological_sort(
            self.dep_graph, key=lambda word: (len(word), word)))

    def words_at(self, k):
        return tuple(w for w in self.words if len(w) == k)

    def level_slice(self, k):
        start = sum(self.level_sizes[:k - 1])
        return slice(start, start + self.level_sizes[k - 1])

    def index(self, word):
        if isinstance(word, str):
            word = tuple(int(letter) - 1 for letter in word)
        return self.word_index[tuple(word)]

    def to_json(self):
        return dict(dim=self.dim, depth=self.depth, words=list(self.labels))


@functools.lru_cache(maxsize=None)
def build_basis(dim, depth):
    """Shared immutable Lyndon basis for (dim, depth)"""
    return LyndonBasis(int(dim), int(depth))


class LieElement:
    """Element of the free Lie algebra as Lyndon coordinates"""

    __slots__ = ('basis', 'coeffs')

    def __init__(self, basis, coeffs):
        coeffs = readonly(np.ravel(coeffs))
        if coeffs.shape != (basis.size, ):
            raise ShapeError(f'Expected {basis.size} coefficients, got {coeffs.size}')
        check_finite(coeffs, 'Lie element coefficients')
        object.__setattr__(self, 'basis', basis)
        object.__setattr__(self, 'coeffs', coeffs)

    def __setattr__(self, name, value):
        raise AttributeError('LieElement is immutable')

    def __repr__(self):
        return f'LieElement(dim={self.dim}, depth={self.depth}, coeffs={self.coeffs.tolist()})'

    @classmethod
    def zeros(cls, basis):
        return cls(basis, np.zeros(basis.size))

    @property
    def dim(self):
        return self.basis.dim

    @property
    def depth(self):
        return self.basis.depth

    def __getitem__(self, word):
        return float(self.coeffs[self.basis.index(word)])

    def level(self, k):
        return self.coeffs[self.basis.level_slice(k)]

    def _check_compatible(self, other):
        if not isinstance(other, LieElement):
            raise TypeError(f'Expected a LieElement, got {type(other).__name__}')
        if self.basis != other.basis:
            raise ShapeError(f'Mismatched bases: {self.basis} vs {other.basis}')

    def __add__(self, other):
        self._check_compatible(other)
        return LieElement(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return LieElement(self.basis, self.coeffs - other.coeffs)

    def __neg__(self):
        return LieElement(self.basis, -self.coeffs)

    def __mul__(self, scale):
        return LieElement(self.basis, self.coeffs * float(scale))

    __rmul__ = __mul__

    def allclose(self, other, atol=1e-12):
        self._check_compatible(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))

    def to_tensor(self):
        return from_lyndon(self)

    def to_json(self):
        return dict(dim=self.dim, depth=self.depth, coeffs=self.coeffs.tolist())

    @classmethod
    def from_json(cls, data):
        return cls(build_basis(data['dim'], data['depth']), data['coeffs'])


def lie_bracket(a, b):
    """[a, b] = a ⊗ b - b ⊗ a"""
    return tensor_mul(a, b) - tensor_mul(b, a)


def to_lyndon(tensor, basis=None):
    """Lyndon coordinates of a Lie polynomial, solved level by level"""
    basis = basis or build_basis(tensor.dim, tensor.depth)
    if (basis.dim, basis.depth) != (tensor.dim, tensor.depth):
        raise ShapeError(f'{basis} does not match tensor dim/depth {tensor.dim}/{tensor.depth}')

    scale = max(1.0, max(float(np.max(np.abs(level))) for level in tensor.levels))
    tolerance = PROJECTION_TOLERANCE * scale
    if abs(tensor.scalar) > tolerance:
        raise NotALieElementError(f'Lie elements have no scalar part, got {tensor.scalar}')

    coeffs = []
    for k in range(1, tensor.depth + 1):
        level = tensor.levels[k]
        solved = basis.level_pinvs[k - 1] @ level
        residual = float(np.max(np.abs(basis.level_matrices[k - 1] @ solved - level)))
        if residual > tolerance:
            raise NotALieElementError(
                f'Level {k} residual {residual:.3g} exceeds {tolerance:.3g}')
        coeffs.append(solved)
    return LieElement(basis, np.concatenate(coeffs))


def from_lyndon(element):
    """Tensor sum of coefficient times bracket tensor over the basis"""
    basis = element.basis
    levels = [np.zeros(1)]
    for k in range(1, basis.depth + 1):
        levels.append(basis.level_matrices[k - 1] @ element.level(k))
    return TruncatedTensor(basis.dim, basis.depth, levels)
