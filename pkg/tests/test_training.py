# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

import numpy as np
import pytest

from streamsig.datagen import gen_brownian, gen_sinusoid
from streamsig.embedding import partition_log_signatures
from streamsig.free_lie import build_basis
from streamsig.log_slice import lift, LogSliceModel
from streamsig.training import (
    adam_step,
    batch_loss,
    build_examples,
    clip_by_global_norm,
    evaluate,
    Example,
    examples_from_logsigs,
    global_norm,
    grad,
    make_batch,
    masked_mse,
    model_for,
    numerical_grad,
    OptimizerState,
    train,
    TrainConfig,
    training_stream,
)
from streamsig.util import DegenerateBatchError, IntervalError, ShapeError, StreamFormatError


def random_examples(seed, n_examples, d_x, depth, d_out, d_init=0, lengths=(3, 5)):
    rng = np.random.default_rng(seed)
    n_words = build_basis(d_x, depth).size
    examples = []
    for n in range(n_examples):
        k = lengths[n % len(lengths)]
        first = rng.normal(size=d_init) if d_init else None
        examples.append(Example(rng.normal(size=(k, n_words)) / 2,
                                rng.normal(size=(k, d_out)), first_values=first))
    return examples


def test_example_shapes():
    example = Example(np.zeros((3, 5)), np.zeros(3))
    assert example.targets.shape == (3, 1)
    assert example.mask.tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(ShapeError):
        Example(np.zeros((3, 5)), np.zeros(3), mask=np.ones(2))


def test_make_batch_pads():
    examples = random_examples(0, 2, 2, 2, 1, lengths=(2, 4))
    batch = make_batch(examples)
    assert batch.coeffs.shape == (2, 4, 3)
    assert batch.mask.tolist() == [[1, 1, 0, 0], [1, 1, 1, 1]]
    assert np.all(batch.coeffs[0, 2:] == 0)
    assert batch.first_values is None
    with pytest.raises(ShapeError):
        make_batch([])
    with pytest.raises(ShapeError, match='Example 1'):
        make_batch([examples[0], Example(np.zeros((2, 5)), np.zeros((2, 1)))])


def test_masked_mse():
    preds = np.array([[[1.0, 0.0], [2.0, 2.0]]])
    targets = np.zeros((1, 2, 2))
    assert masked_mse(preds, targets, [[1.0, 1.0]]) == pytest.approx((1 + 8) / 4)
    assert masked_mse(preds, targets, [[1.0, 0.0]]) == pytest.approx(0.5)
    with pytest.raises(DegenerateBatchError):
        masked_mse(preds, targets, [[0.0, 0.0]])
    with pytest.raises(ShapeError):
        masked_mse(preds, targets[:, :1], [[1.0, 1.0]])


def test_padding_does_not_change_loss():
    examples = random_examples(1, 2, 2, 2, 2, lengths=(2, 5))
    model = LogSliceModel.init(2, 4, 2, seed=1)
    alone = batch_loss(model, make_batch(examples[:1]))
    with_padding = make_batch(examples)
    per_sample = [batch_loss(model, make_batch([e])) for e in examples]
    expected = (per_sample[0] * 2 + per_sample[1] * 5) / 7
    assert batch_loss(model, with_padding) == pytest.approx(expected, rel=1e-12)
    assert alone == pytest.approx(per_sample[0])


@pytest.mark.parametrize(
    'd_x, depth, hidden_dim, block_size, d_init, mode', (
        (2, 2, 4, None, 0, 'sequential'),
        (3, 2, 4, 2, 0, 'sequential'),
        (2, 3, 3, None, 2, 'sequential'),
        (2, 2, 4, 2, 2, 'scan'),
    )
)
def test_grad_matches_finite_differences(d_x, depth, hidden_dim, block_size, d_init, mode):
    examples = random_examples(2, 3, d_x, depth, 2, d_init=d_init, lengths=(2, 3))
    model = LogSliceModel.init(d_x, hidden_dim, 2, block_size=block_size, d_init=d_init, seed=2)
    batch = make_batch(examples)
    loss, grads = grad(model, batch, mode)
    assert loss == pytest.approx(batch_loss(model, batch, mode), rel=1e-12)
    numeric = numerical_grad(model, batch, mode=mode)
    assert list(grads) == list(numeric)
    for name in grads:
        np.testing.assert_allclose(grads[name], numeric[name], rtol=1e-4, atol=1e-7,
                                   err_msg=name)


def test_grad_modes_agree():
    examples = random_examples(3, 4, 3, 2, 1)
    model = LogSliceModel.init(3, 6, 1, block_size=3, seed=3)
    batch = make_batch(examples)
    loss_seq, grads_seq = grad(model, batch, 'sequential')
    loss_scan, grads_scan = grad(model, batch, 'scan')
    assert loss_scan == pytest.approx(loss_seq, rel=1e-10)
    for name in grads_seq:
        np.testing.assert_allclose(grads_scan[name], grads_seq[name], rtol=1e-8, atol=1e-12)


def test_grad_with_given_lift():
    examples = random_examples(4, 2, 2, 2, 1)
    model = LogSliceModel.init(2, 4, 1, seed=4)
    batch = make_batch(examples)
    with_lift = grad(model, batch, lifted=lift(model, depth=2))[1]
    without = grad(model, batch)[1]
    for name in without:
        np.testing.assert_array_equal(with_lift[name], without[name])


def test_batch_needs_first_values():
    examples = random_examples(5, 2, 2, 2, 1)
    model = LogSliceModel.init(2, 4, 1, d_init=2, seed=5)
    with pytest.raises(ShapeError, match='first values'):
        grad(model, make_batch(examples))


def test_clip_by_global_norm():
    grads = dict(a=np.array([3.0]), b=np.array([[4.0]]))
    assert global_norm(grads) == 5.0
    clipped, norm = clip_by_global_norm(grads, 1.0)
    assert norm == 5.0
    assert clipped['a'].tolist() == pytest.approx([0.6])
    assert clipped['b'].tolist() == [[pytest.approx(0.8)]]
    unclipped, _ = clip_by_global_norm(grads, 10.0)
    assert unclipped is grads
    assert clip_by_global_norm(grads, 0)[0] is grads


def test_adam_first_step_is_sign_step():
    params = dict(w=np.array([1.0, -2.0, 0.5]))
    grads = dict(w=np.array([0.2, -0.1, 0.0]))
    state = OptimizerState.create(params, lr=0.01, clip_norm=0)
    updated, state = adam_step(state, params, grads)
    np.testing.assert_allclose(updated['w'], [0.99, -1.99, 0.5], atol=1e-6)
    assert state.step == 1
    np.testing.assert_allclose(state.first_moment['w'], 0.1 * grads['w'])
    with pytest.raises(ShapeError):
        adam_step(state, params, dict(w=np.zeros(2)))


def test_adam_clips_before_update():
    params = dict(w=np.zeros(2))
    state = OptimizerState.create(params, lr=0.1, clip_norm=1.0)
    _, state = adam_step(state, params, dict(w=np.array([30.0, 40.0])))
    np.testing.assert_allclose(state.first_moment['w'], [0.06, 0.08])


def test_train_config(tmpdir):
    config = TrainConfig()
    assert (config.lr, config.batch_size, config.block_size) == (1e-3, 32, 8)
    assert config.reduction_mode == 'sequential'
    assert TrainConfig(mode='parallel_scan').mode == 'scan'
    assert TrainConfig(mode='scan').reduction_mode == 'parallel'
    assert TrainConfig(block_size=None, hidden_dim=16).block_size == 16
    assert TrainConfig.from_dict(config.to_json()) == config
    assert TrainConfig(seed=1).hash != config.hash

    filename = str(tmpdir.join('train.yml'))
    with open(filename, 'w') as f:
        f.write('lr: 0.01\nepochs: 3\nmode: scan\n')
    loaded = TrainConfig.from_file(filename)
    assert (loaded.lr, loaded.epochs, loaded.mode) == (0.01, 3, 'scan')

    with pytest.raises(StreamFormatError, match='Unknown training config keys: speed'):
        TrainConfig.from_dict(dict(speed=2))
    with open(filename, 'w') as f:
        f.write('mode: warp\n')
    with pytest.raises(StreamFormatError):
        TrainConfig.from_file(filename)
    with open(filename, 'w') as f:
        f.write('- 1\n- 2\n')
    with pytest.raises(StreamFormatError, match='mapping'):
        TrainConfig.from_file(filename)


def test_evaluate_matches_batch_loss():
    examples = random_examples(6, 5, 2, 2, 2)
    model = LogSliceModel.init(2, 4, 2, seed=6)
    expected = batch_loss(model, make_batch(examples))
    assert evaluate(model, examples) == pytest.approx(expected, rel=1e-12)
    assert evaluate(model, examples, batch_size=2) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DegenerateBatchError):
        evaluate(model, [])


def test_train_fits_constant_targets():
    rng = np.random.default_rng(7)
    n_words = build_basis(2, 2).size
    examples = [Example(rng.normal(size=(4, n_words)) / 4, np.full((4, 1), 0.5))
                for _ in range(8)]
    config = TrainConfig(lr=0.05, epochs=40, batch_size=4, hidden_dim=4, block_size=2)
    model = LogSliceModel.init(2, 4, 1, block_size=2, seed=7)
    trained, history = train(model, examples, config, test_examples=examples[:2])
    assert len(history) == 40
    assert [m.epoch for m in history[:3]] == [1, 2, 3]
    assert history[-1].train_loss < 0.2 * history[0].train_loss
    assert history[-1].test_loss == pytest.approx(evaluate(trained, examples[:2]), rel=1e-12)
    assert np.isnan(train(model, examples, config._replace(epochs=1))[1][0].test_loss)


def test_train_is_deterministic():
    examples = random_examples(8, 6, 2, 2, 1)
    config = TrainConfig(epochs=3, batch_size=4, hidden_dim=4, block_size=2, lr=0.01)
    model = LogSliceModel.init(2, 4, 1, block_size=2, seed=8)
    first, history_a = train(model, examples, config)
    second, history_b = train(model, examples, config)
    assert [m.train_loss for m in history_a] == [m.train_loss for m in history_b]
    np.testing.assert_array_equal(first.channels, second.channels)
    with pytest.raises(DegenerateBatchError):
        train(model, [], config)


def test_build_examples_from_sinusoids():
    dataset = gen_sinusoid('async_sparse', 3, seed=1)
    config = TrainConfig(depth=2, include_counts=False, input_init=True, hidden_dim=4,
                         block_size=2)
    examples, embedding = build_examples(dataset.samples, config)
    assert (embedding.d_disc, embedding.d_cont, embedding.include_counts) == (2, 1, False)
    assert embedding.d_x == 3
    assert len(examples) == 3
    for example, sample in zip(examples, dataset.samples):
        assert example.coeffs.shape == (len(sample.partition), build_basis(3, 2).size)
        assert example.targets.shape == (len(sample.partition), 2)
        np.testing.assert_array_equal(example.first_values, sample.stream.first_values())

    model = model_for(config, embedding, 2, d_init=embedding.d_disc)
    assert (model.d_x, model.hidden_dim, model.d_init) == (3, 4, 2)
    assert model_for(config._replace(input_init=False), embedding, 2, 2).d_init == 0

    threaded, _ = build_examples(dataset.samples, config._replace(threads=3))
    for a, b in zip(examples, threaded):
        np.testing.assert_array_equal(a.coeffs, b.coeffs)


def test_build_examples_level1_inputs():
    dataset = gen_brownian(1, 2, seed=0, subgrid_factor=4)
    config = TrainConfig(depth=2, include_counts=False, hidden_dim=4, block_size=2)
    (full, ), embedding = build_examples(dataset.samples, config)
    (level1, ), _ = build_examples(dataset.samples, config._replace(level1_inputs=True))
    assert embedding.d_x == 5
    np.testing.assert_allclose(level1.coeffs[:, :5], full.coeffs[:, :5], atol=1e-12)
    assert not np.allclose(level1.coeffs[:, 5:], full.coeffs[:, 5:])
    np.testing.assert_array_equal(level1.targets, full.targets)


def _documents(samples, config):
    documents = []
    for sample in samples:
        stream, continuous, embedding = training_stream(sample, config)
        logsigs = partition_log_signatures(stream, continuous, sample.partition, embedding)
        documents.append((embedding, sample.partition.points.tolist(), logsigs))
    return documents


def test_examples_from_logsigs():
    dataset = gen_sinusoid('async_irregular', 3, seed=2)
    config = TrainConfig(include_counts=False, input_init=True, hidden_dim=4, block_size=2)
    examples, embedding = build_examples(dataset.samples, config)
    cached, cached_embedding = examples_from_logsigs(
        dataset.samples, _documents(dataset.samples, config), config)
    assert cached_embedding == embedding
    for a, b in zip(examples, cached):
        np.testing.assert_array_equal(a.coeffs, b.coeffs)
        np.testing.assert_array_equal(a.targets, b.targets)
        np.testing.assert_array_equal(a.first_values, b.first_values)

    with pytest.raises(ShapeError, match='training expects'):
        examples_from_logsigs(dataset.samples, _documents(dataset.samples, config),
                              config._replace(include_counts=True))
    with pytest.raises(ShapeError, match='documents'):
        examples_from_logsigs(dataset.samples, _documents(dataset.samples[:2], config), config)

    documents = _documents(dataset.samples, config)
    embedding_used, points, logsigs = documents[1]
    documents[1] = (embedding_used, [0.0] + points[1:-1] + [points[-1] + 1.0], logsigs)
    with pytest.raises(IntervalError, match='Sample 1'):
        examples_from_logsigs(dataset.samples, documents, config)
    documents[1] = (embedding_used, points, logsigs[:-1])
    with pytest.raises(IntervalError, match='intervals'):
        examples_from_logsigs(dataset.samples, documents, config)


def _train_and_test(examples, embedding, config, n_train=512):
    train_examples, test_examples = examples[:n_train], examples[n_train:]
    d_out = train_examples[0].targets.shape[1]
    model = model_for(config, embedding, d_out, d_init=embedding.d_disc)
    model, _ = train(model, train_examples, config)
    return model, test_examples


@pytest.mark.slow
@pytest.mark.parametrize('seed', (0, 1, 2))
def test_brownian_level2_beats_level1(seed):
    """Level-2 inputs carry the Levy area the level-1 arm cannot see"""
    config = TrainConfig(seed=seed, hidden_dim=64, block_size=8, lr=1e-3, batch_size=8,
                         epochs=20, include_counts=False)
    level2 = config._replace(depth=2)
    level1 = config._replace(depth=1, level1_inputs=True)

    mse = {}
    for m in (2, 64):
        dataset = gen_brownian(640, m, seed=seed)
        arms = (('level1', level1), ('level2', level2)) if m == 2 else (('level1', level1), )
        for arm, arm_config in arms:
            examples, embedding = build_examples(dataset.samples, arm_config)
            model, test_examples = _train_and_test(examples, embedding, arm_config)
            mse[arm, m] = evaluate(model, test_examples)

    assert 3 * mse['level2', 2] < mse['level1', 2]
    assert mse['level1', 64] < mse['level1', 2]


@pytest.mark.slow
@pytest.mark.parametrize('seed', (0, 1, 2))
def test_sinusoid_regime_transfer(seed):
    config = TrainConfig(seed=seed, hidden_dim=64, block_size=8, lr=2e-3, batch_size=16,
                         epochs=30, include_counts=False, input_init=True)
    regimes = ('sync_regular', 'sync_irregular', 'async_irregular', 'async_sparse')
    models, tests = {}, {}
    for n, regime in enumerate(regimes):
        dataset = gen_sinusoid(regime, 640, seed=10 * seed + n)
        examples, embedding = build_examples(dataset.samples, config)
        models[regime], tests[regime] = _train_and_test(examples, embedding, config)

    def mse(trained, evaluated):
        return evaluate(models[trained], tests[evaluated])

    assert mse('async_sparse', 'async_sparse') < mse('sync_regular', 'async_sparse')
    for a, b in (('sync_irregular', 'async_irregular'), ('async_irregular', 'sync_irregular')):
        assert 0.5 < mse(a, b) / mse(a, a) < 2.0
