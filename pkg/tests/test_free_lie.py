# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

import pickle

import numpy as np
import pytest

from streamsig.free_lie import (
    build_basis,
    from_lyndon,
    is_lyndon,
    lie_bracket,
    LieElement,
    lyndon_words,
    LyndonBasis,
    standard_factorization,
    to_lyndon,
    witt_dim,
    word_label,
)
from streamsig.tensor_algebra import (
    signature_of_path,
    tensor_exp,
    tensor_log,
    TruncatedTensor,
)
from streamsig.util import NotALieElementError, ShapeError


@pytest.mark.parametrize(
    'dim, k, expected', (
        (1, 1, 1),
        (1, 2, 0),
        (2, 1, 2),
        (2, 2, 1),
        (2, 3, 2),
        (2, 4, 3),
        (2, 5, 6),
        (3, 2, 3),
        (3, 3, 8),
        (4, 2, 6),
        (4, 4, 60),
    )
)
def test_witt_dim(dim, k, expected):
    assert witt_dim(dim, k) == expected


@pytest.mark.parametrize('dim, depth', ((1, 3), (2, 5), (3, 4), (4, 3), (5, 2)))
def test_lyndon_words_match_witt(dim, depth):
    words = lyndon_words(dim, depth)
    assert len(words) == sum(witt_dim(dim, k) for k in range(1, depth + 1))
    assert len(set(words)) == len(words)
    assert all(is_lyndon(w) for w in words)
    assert words == sorted(words, key=lambda w: (len(w), w))


def test_lyndon_words_order():
    labels = [word_label(w) for w in lyndon_words(2, 3)]
    assert labels == ['1', '2', '12', '112', '122']
    labels = [word_label(w) for w in lyndon_words(3, 2)]
    assert labels == ['1', '2', '3', '12', '13', '23']


@pytest.mark.parametrize(
    'word, expected', (
        ((0, 1), ((0, ), (1, ))),
        ((0, 0, 1), ((0, ), (0, 1))),
        ((0, 1, 1), ((0, 1), (1, ))),
        ((0, 0, 1, 1), ((0, ), (0, 1, 1))),
        ((0, 1, 0, 1, 1), ((0, 1), (0, 1, 1))),
    )
)
def test_standard_factorization(word, expected):
    assert standard_factorization(word) == expected
    u, v = standard_factorization(word)
    assert is_lyndon(u) and is_lyndon(v) and u < v


def test_is_lyndon():
    assert is_lyndon((0, 1))
    assert not is_lyndon((1, 0))
    assert not is_lyndon((0, 0))
    assert not is_lyndon(())


def test_word_label_large_alphabet():
    assert word_label((0, 11)) == '1,12'


def test_basis_structure():
    basis = build_basis(2, 3)
    assert basis.size == 5
    assert basis.level_sizes == (2, 1, 2)
    assert basis.labels == ('1', '2', '12', '112', '122')
    assert basis.index('112') == 3
    assert basis.index((0, 1)) == 2
    assert basis.level_slice(3) == slice(3, 5)
    assert basis.factors[(0, 0, 1)] == ((0, ), (0, 1))
    np.testing.assert_array_equal(basis.bracket_tensors[(0, 1)], [0, 1, -1, 0])

    order = basis.evaluation_order
    for word, (u, v) in basis.factors.items():
        assert order.index(u) < order.index(word)
        assert order.index(v) < order.index(word)


def test_basis_is_shared_and_pickles():
    assert build_basis(3, 2) is build_basis(3, 2)
    basis = build_basis(3, 2)
    assert pickle.loads(pickle.dumps(basis)) is basis
    assert basis == LyndonBasis(3, 2)
    assert basis != build_basis(3, 3)
    assert basis.to_json() == dict(dim=3, depth=2, words=list(basis.labels))
    with pytest.raises(ShapeError):
        LyndonBasis(0, 2)


def test_jacobi_identity():
    rng = np.random.default_rng(21)
    for _ in range(5):
        a, b, c = (TruncatedTensor.from_degree_one(rng.normal(size=3), 4) for _ in range(3))
        cyclic = (lie_bracket(a, lie_bracket(b, c)) + lie_bracket(b, lie_bracket(c, a)) +
                  lie_bracket(c, lie_bracket(a, b)))
        assert cyclic.allclose(TruncatedTensor.zeros(3, 4), atol=1e-12)
        assert np.max(np.abs(to_lyndon(cyclic).coeffs)) <= 1e-12

def test_bracket_tensors_are_lie():
    basis = build_basis(2, 4)
    e1 = TruncatedTensor.from_degree_one([1.0, 0.0], 4)
    e2 = TruncatedTensor.from_degree_one([0.0, 1.0], 4)
    e12 = lie_bracket(e1, e2)
    e112 = lie_bracket(e1, e12)
    assert to_lyndon(e12, basis)['12'] == pytest.approx(1.0)
    element = to_lyndon(e112, basis)
    assert element['112'] == pytest.approx(1.0)
    assert np.count_nonzero(np.abs(element.coeffs) > 1e-12) == 1


def test_lyndon_round_trip():
    rng = np.random.default_rng(10)
    for dim, depth in ((2, 4), (3, 3), (4, 2)):
        basis = build_basis(dim, depth)
        element = LieElement(basis, rng.normal(size=basis.size))
        back = to_lyndon(from_lyndon(element))
        assert back.allclose(element, atol=1e-10)


def test_log_signature_is_lie():
    rng = np.random.default_rng(11)
    points = rng.normal(size=(7, 3))
    log_g = tensor_log(signature_of_path(points, 4))
    element = to_lyndon(log_g)
    assert from_lyndon(element).allclose(log_g, atol=1e-10)
    np.testing.assert_allclose(element.level(1), points[-1] - points[0], atol=1e-12)


def test_levy_area_coefficient():
    element = to_lyndon(tensor_log(signature_of_path([[0, 0], [1, 0], [1, 1]], 2)))
    assert element['12'] == pytest.approx(0.5)
    element = to_lyndon(tensor_log(signature_of_path([[0, 0], [0, 1], [1, 1]], 2)))
    assert element['12'] == pytest.approx(-0.5)


def test_not_a_lie_element():
    basis = build_basis(2, 2)
    with pytest.raises(NotALieElementError, match='residual'):
        to_lyndon(TruncatedTensor(2, 2, [[0.0], [0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]), basis)
    with pytest.raises(NotALieElementError, match='scalar'):
        to_lyndon(TruncatedTensor.unit(2, 2), basis)
    with pytest.raises(ShapeError):
        to_lyndon(TruncatedTensor.zeros(2, 3), basis)


def test_projection_tolerance_scales():
    big = tensor_log(signature_of_path([[0, 0], [1e4, 0], [1e4, 1e4]], 3))
    assert to_lyndon(big)['12'] == pytest.approx(0.5e8)


def test_lie_element_ops():
    basis = build_basis(2, 2)
    a = LieElement(basis, [1.0, 2.0, 3.0])
    b = LieElement(basis, [0.5, 0.5, 0.5])
    assert (a + b).coeffs.tolist() == [1.5, 2.5, 3.5]
    assert (a - b).coeffs.tolist() == [0.5, 1.5, 2.5]
    assert (-a).coeffs.tolist() == [-1.0, -2.0, -3.0]
    assert (2 * a).coeffs.tolist() == [2.0, 4.0, 6.0]
    assert a.level(2).tolist() == [3.0]
    assert a['2'] == 2.0
    assert LieElement.from_json(a.to_json()).allclose(a, atol=0)
    assert LieElement.zeros(basis).coeffs.tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(AttributeError):
        a.coeffs = None
    with pytest.raises(ShapeError):
        LieElement(basis, [1.0])
    with pytest.raises(ShapeError):
        a + LieElement.zeros(build_basis(2, 3))


def test_exp_of_lie_element_matches_bch():
    basis = build_basis(2, 3)
    x = TruncatedTensor.from_degree_one([1.0, 0.0], 3)
    y = TruncatedTensor.from_degree_one([0.0, 1.0], 3)
    log_xy = tensor_log(tensor_exp(x) @ tensor_exp(y))
    bch = (x + y + 0.5 * lie_bracket(x, y) +
           lie_bracket(x, lie_bracket(x, y)) / 12 -
           lie_bracket(y, lie_bracket(x, y)) / 12)
    assert to_lyndon(log_xy, basis).allclose(to_lyndon(bch, basis), atol=1e-12)
