# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Masked MSE training of Log-SLiCE models

A batch is padded to a common interval count; padded intervals carry zero
log-signatures (identity flows) and mask 0, so they change neither the loss
nor the gradients.  Gradients are computed by one hand written reverse pass:

    loss <- readout <- h_k = F_k h_{k-1} <- F_k = exp(M_k) <- M_k = sum Phi A_w
         <- A_w = -(A_u A_v - A_v A_u) <- channel matrices
"""
import collections
import time

import numpy as np

from streamsig.datagen import truncate_to_level1
from streamsig.embedding import (
    ContinuousChannels,
    EmbeddingConfig,
    partition_log_signatures,
)
from streamsig.free_lie import build_basis
from streamsig.log_slice import (
    apply_blocks,
    expm,
    expm_frechet_adjoint,
    forward_mode,
    inclusive_scan,
    lift,
    LogSliceModel,
    readout,
)
from streamsig.util import (
    check_finite,
    chunked,
    config_hash,
    DegenerateBatchError,
    IntervalError,
    load_text,
    parallel_map,
    rng_for,
    ShapeError,
    StreamFormatError,
    streamsig_logger,
    worker_limit,
)


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

EVAL_BATCH_SIZE = 256


class Example(collections.namedtuple('Example', 'coeffs targets mask first_values')):
    """Interval log-signature coordinates of one sample with its targets

    coeffs is (K, n_words), targets (K, d_out), mask (K,).
    """

    __slots__ = ()

    def __new__(cls, coeffs, targets, mask=None, first_values=None):
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        targets = np.asarray(targets, dtype=float).reshape(len(coeffs), -1)
        mask = np.ones(len(coeffs)) if mask is None else np.asarray(mask, dtype=float)
        if mask.shape != (len(coeffs), ):
            raise ShapeError(f'Mask {mask.shape} vs {len(coeffs)} intervals')
        if first_values is not None:
            first_values = np.asarray(first_values, dtype=float)
        return super().__new__(cls, coeffs, targets, mask, first_values)

    @classmethod
    def from_logsigs(cls, logsigs, targets, mask=None, first_values=None):
        return cls([phi.coeffs for phi in logsigs], targets, mask, first_values)


Batch = collections.namedtuple('Batch', 'coeffs targets mask first_values')


def make_batch(examples):
    """Stack examples, padding to the longest interval count with mask 0"""
    examples = list(examples)
    if not examples:
        raise ShapeError('Cannot batch zero examples')
    n_words = examples[0].coeffs.shape[1]
    d_out = examples[0].targets.shape[1]
    longest = max(len(e.coeffs) for e in examples)

    coeffs = np.zeros((len(examples), longest, n_words))
    targets = np.zeros((len(examples), longest, d_out))
    mask = np.zeros((len(examples), longest))
    for b, example in enumerate(examples):
        k = len(example.coeffs)
        if example.coeffs.shape[1] != n_words or example.targets.shape[1] != d_out:
            raise ShapeError(f'Example {b} does not match the shapes of example 0')
        coeffs[b, :k] = example.coeffs
        targets[b, :k] = example.targets
        mask[b, :k] = example.mask

    first_values = None
    if examples[0].first_values is not None:
        first_values = np.stack([e.first_values for e in examples])
    return Batch(coeffs, targets, mask, first_values)


def masked_mse(preds, targets, mask, d_out=None):
    """sum m ||y_hat - y||^2 / (d_out sum m)"""
    preds, targets, mask = (np.asarray(a, dtype=float) for a in (preds, targets, mask))
    d_out = d_out or preds.shape[-1]
    if preds.shape != targets.shape or preds.shape[:-1] != mask.shape:
        raise ShapeError(f'Shapes disagree: {preds.shape}, {targets.shape}, {mask.shape}')
    n_valid = mask.sum()
    if n_valid == 0:
        raise DegenerateBatchError('Loss mask selects no intervals')
    return float(np.sum(mask * np.sum((preds - targets) ** 2, axis=-1)) / (d_out * n_valid))


def _initial_states(model, batch):
    """(h0, squashed first values) for every sample of the batch"""
    n = len(batch.coeffs)
    if model.init_weight is None:
        return np.tile(model.h0, (n, 1)), None
    if batch.first_values is None:
        raise ShapeError('Model uses input-dependent initialisation, batch has no first values')
    squashed = np.tanh(batch.first_values)
    return squashed @ model.init_weight.T + model.init_bias, squashed


def _forward_pass(model, lifted, batch, mode):
    generators = lifted.generators(batch.coeffs)
    interval_flows = check_finite(expm(generators), 'interval flows')
    h0, squashed = _initial_states(model, batch)

    if mode == 'scan':
        prefix = inclusive_scan(np.moveaxis(interval_flows, 1, 0))
        states = np.moveaxis(apply_blocks(prefix, h0[None]), 0, 1)
    else:
        states = np.zeros(batch.coeffs.shape[:2] + (model.hidden_dim, ))
        h = h0
        for k in range(states.shape[1]):
            h = apply_blocks(interval_flows[:, k], h)
            states[:, k] = h
    check_finite(states, 'hidden states')
    preds = check_finite(readout(model, states), 'predictions')
    return generators, interval_flows, h0, squashed, states, preds


def lift_backward(model, lifted, lifted_grads):
    """Gradient on the channel matrices from gradients on every lifted word"""
    basis = lifted.basis
    grads = {w: np.array(lifted_grads[i]) for i, w in enumerate(basis.words)}
    for word in reversed(basis.evaluation_order):
        if len(word) == 1:
            continue
        u_word, v_word = basis.factors[word]
        g = grads[word]
        u, v = lifted[u_word], lifted[v_word]
        u_t, v_t = np.swapaxes(u, -1, -2), np.swapaxes(v, -1, -2)
        grads[u_word] -= np.matmul(g, v_t) - np.matmul(v_t, g)
        grads[v_word] -= np.matmul(u_t, g) - np.matmul(g, u_t)
    return np.stack([grads[(i, )] for i in range(model.d_x)])


def grad(model, batch, mode='sequential', lifted=None):
    """Masked MSE of the batch and its exact gradient for every parameter"""
    mode = forward_mode(mode)
    n_words = batch.coeffs.shape[-1]
    if lifted is None:
        lifted = lift(model, _basis_for(model, n_words))
    generators, interval_flows, h0, squashed, states, preds = _forward_pass(
        model, lifted, batch, mode)
    loss = masked_mse(preds, batch.targets, batch.mask, model.d_out)

    n_valid = batch.mask.sum()
    dy = 2 * batch.mask[..., None] * (preds - batch.targets) / (model.d_out * n_valid)
    grads = collections.OrderedDict()

    n_blocks, b = model.n_blocks, model.block_size
    d_states = dy @ model.readout_weight
    d_flows = np.zeros_like(interval_flows)
    dh = np.zeros_like(h0)
    for k in reversed(range(states.shape[1])):
        dh = dh + d_states[:, k]
        h_prev = states[:, k - 1] if k else h0
        d_flows[:, k] = np.einsum(
            'bni,bnj->bnij', dh.reshape(-1, n_blocks, b), h_prev.reshape(-1, n_blocks, b))
        dh = apply_blocks(np.swapaxes(interval_flows[:, k], -1, -2), dh)

    d_generators = check_finite(
        expm_frechet_adjoint(generators, d_flows), 'matrix exponential gradient')
    d_lifted = np.einsum('bkw,bknij->wnij', batch.coeffs, d_generators)
    grads['channels'] = check_finite(
        lift_backward(model, lifted, d_lifted), 'channel matrix gradient')
    grads['readout_weight'] = np.einsum('bko,bkh->oh', dy, states)
    grads['readout_bias'] = dy.sum(axis=(0, 1))
    if model.init_weight is not None:
        grads['init_weight'] = dh.T @ squashed
        grads['init_bias'] = dh.sum(axis=0)
    return loss, grads


def _basis_for(model, n_words):
    """Lyndon basis over d_x letters whose size matches the batch coefficients"""
    for depth in range(1, 8):
        basis = build_basis(model.d_x, depth)
        if basis.size == n_words:
            return basis
        if basis.size > n_words:
            break
    raise ShapeError(f'No Lyndon basis over {model.d_x} letters has {n_words} words')


def batch_loss(model, batch, mode='sequential'):
    lifted = lift(model, _basis_for(model, batch.coeffs.shape[-1]))
    preds = _forward_pass(model, lifted, batch, forward_mode(mode))[-1]
    return masked_mse(preds, batch.targets, batch.mask, model.d_out)


def numerical_grad(model, batch, names=None, mode='sequential'):
    """Central differences with step max(1e-5, 1e-7 |theta|) per entry"""
    params = model.parameters()
    grads = collections.OrderedDict()
    for name in names or params:
        value = params[name]
        numeric = np.zeros(value.shape)
        for index in np.ndindex(*value.shape):
            step = max(1e-5, 1e-7 * abs(value[index]))
            losses = []
            for sign in (1, -1):
                shifted = np.array(value)
                shifted[index] += sign * step
                losses.append(batch_loss(model.with_parameters({name: shifted}), batch, mode))
            numeric[index] = (losses[0] - losses[1]) / (2 * step)
        grads[name] = numeric
    return grads


def global_norm(grads):
    return float(np.sqrt(sum(np.sum(g ** 2) for g in grads.values())))


def clip_by_global_norm(grads, clip_norm):
    """Scale all gradients together so their joint norm is at most clip_norm"""
    norm = global_norm(grads)
    if not clip_norm or norm <= clip_norm:
        return grads, norm
    scale = clip_norm / norm
    return collections.OrderedDict((k, g * scale) for k, g in grads.items()), norm


class OptimizerState(collections.namedtuple(
        'OptimizerState', 'lr clip_norm step first_moment second_moment')):
    """Adam moments per parameter, the step count and hyperparameters"""

    __slots__ = ()

    @classmethod
    def create(cls, params, lr=1e-3, clip_norm=1.0):
        zeros = collections.OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
        return cls(float(lr), clip_norm, 0, zeros, collections.OrderedDict(zeros))


def adam_step(state, params, grads):
    """Global norm clipping followed by one bias corrected Adam update"""
    grads, _ = clip_by_global_norm(grads, state.clip_norm)
    step = state.step + 1
    first, second, updated = (collections.OrderedDict() for _ in range(3))
    for name, value in params.items():
        g = grads[name]
        if g.shape != value.shape:
            raise ShapeError(f'Gradient {name} {g.shape} vs parameter {value.shape}')
        first[name] = ADAM_BETA1 * state.first_moment[name] + (1 - ADAM_BETA1) * g
        second[name] = ADAM_BETA2 * state.second_moment[name] + (1 - ADAM_BETA2) * g ** 2
        m_hat = first[name] / (1 - ADAM_BETA1 ** step)
        v_hat = second[name] / (1 - ADAM_BETA2 ** step)
        updated[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
    return updated, state._replace(step=step, first_moment=first, second_moment=second)


class TrainConfig(collections.namedtuple('TrainConfig', (
        'lr clip_norm batch_size epochs seed depth hidden_dim block_size '
        'include_counts include_time mode threads input_init test_fraction level1_inputs'))):
    """Training and embedding hyperparameters"""

    __slots__ = ()

    def __new__(cls, lr=1e-3, clip_norm=1.0, batch_size=32, epochs=20, seed=0, depth=2,
                hidden_dim=64, block_size=8, include_counts=True, include_time=True,
                mode='sequential', threads=1, input_init=False, test_fraction=0.2,
                level1_inputs=False):
        return super().__new__(
            cls, float(lr), float(clip_norm), int(batch_size), int(epochs), int(seed),
            int(depth), int(hidden_dim), int(block_size or hidden_dim), bool(include_counts),
            bool(include_time), forward_mode(mode), int(threads), bool(input_init),
            float(test_fraction), bool(level1_inputs))

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls._fields)
        if unknown:
            raise StreamFormatError(f"Unknown training config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_file(cls, filename):
        data = load_text(filename) or {}
        if not isinstance(data, dict):
            raise StreamFormatError(f'{filename}: training config must be a mapping')
        try:
            return cls.from_dict(data)
        except (TypeError, ValueError) as exc:
            raise StreamFormatError(f'{filename}: {exc}') from exc

    @property
    def reduction_mode(self):
        return 'parallel' if self.mode == 'scan' else 'sequential'

    @property
    def hash(self):
        return config_hash(self.to_json())

    def to_json(self):
        return dict(self._asdict())


def training_stream(sample, config):
    """(stream, continuous channels, embedding) a sample trains on under the config"""
    if config.level1_inputs:
        sample = truncate_to_level1(sample)
    stream, continuous = sample.to_stream()
    continuous = continuous or ContinuousChannels.empty(stream.horizon)
    if config.include_time:
        continuous = continuous.with_time()
    embedding = EmbeddingConfig.for_stream(
        stream, continuous, config.depth, config.include_counts)
    return stream, continuous, embedding


def embed_sample(sample, config):
    """Example for one generated sample under the training config"""
    stream, continuous, embedding = training_stream(sample, config)
    logsigs = partition_log_signatures(
        stream, continuous, sample.partition, embedding, mode=config.reduction_mode)
    first_values = stream.first_values() if config.input_init else None
    return Example.from_logsigs(logsigs, sample.targets, first_values=first_values), embedding


def build_examples(samples, config):
    """Embed every sample; the embedding layout is shared by all of them"""
    with worker_limit(config.threads):
        embedded = parallel_map(lambda s: embed_sample(s, config), samples, config.threads)
    layouts = {embedding for _, embedding in embedded}
    if len(layouts) > 1:
        raise ShapeError(f'Samples embed with different layouts: {sorted(layouts)}')
    embedding = layouts.pop() if layouts else None
    return [example for example, _ in embedded], embedding


def examples_from_logsigs(samples, documents, config):
    """Examples from precomputed log-signatures instead of embedding again

    documents holds one (embedding, partition points, LieElements) per sample. Each
    must have been computed with the layout and partition the config gives that sample.
    """
    samples, documents = list(samples), list(documents)
    if len(samples) != len(documents):
        raise ShapeError(f'{len(documents)} log-signature documents for {len(samples)} samples')
    examples, layouts = [], set()
    for n, (sample, (embedding, points, logsigs)) in enumerate(zip(samples, documents)):
        stream, _, expected = training_stream(sample, config)
        if embedding != expected:
            raise ShapeError(f'Sample {n}: log-signatures embed as {embedding}, '
                             f'training expects {expected}')
        if not np.array_equal(np.asarray(points, dtype=float), sample.partition.points):
            raise IntervalError(f'Sample {n}: log-signatures cover a different partition')
        if len(logsigs) != len(points) - 1:
            raise IntervalError(
                f'Sample {n}: {len(logsigs)} log-signatures for {len(points) - 1} intervals')
        first_values = stream.first_values() if config.input_init else None
        examples.append(Example.from_logsigs(logsigs, sample.targets, first_values=first_values))
        layouts.add(embedding)
    if len(layouts) > 1:
        raise ShapeError(f'Samples embed with different layouts: {sorted(layouts)}')
    return examples, layouts.pop() if layouts else None


def model_for(config, embedding, d_out, d_init=0):
    return LogSliceModel.init(
        embedding.d_x, config.hidden_dim, d_out, block_size=config.block_size,
        d_init=d_init if config.input_init else 0, seed=config.seed)


def _squared_error(model, lifted, batch, mode):
    preds = _forward_pass(model, lifted, batch, mode)[-1]
    errors = np.sum((preds - batch.targets) ** 2, axis=-1)
    return float(np.sum(batch.mask * errors)), float(batch.mask.sum())


def evaluate(model, examples, mode='sequential', batch_size=EVAL_BATCH_SIZE):
    """Masked MSE of the model over all examples"""
    examples = list(examples)
    if not examples:
        raise DegenerateBatchError('No examples to evaluate')
    mode = forward_mode(mode)
    lifted = lift(model, _basis_for(model, examples[0].coeffs.shape[1]))
    total = count = 0.0
    for group in chunked(examples, batch_size):
        error, n = _squared_error(model, lifted, make_batch(group), mode)
        total += error
        count += n
    if count == 0:
        raise DegenerateBatchError('Loss mask selects no intervals')
    return total / (model.d_out * count)


EpochMetrics = collections.namedtuple('EpochMetrics', 'epoch train_loss test_loss wall_time')


def train(model, examples, config, test_examples=None):
    """Adam over shuffled mini-batches; returns (model, per-epoch metrics)

    Batch order comes from a generator keyed by (seed, epoch), so equal
    configs replay the same trajectory.
    """
    examples = list(examples)
    if not examples:
        raise DegenerateBatchError('Training needs at least one example')
    log = streamsig_logger
    state = OptimizerState.create(model.parameters(), config.lr, config.clip_norm)
    params = model.parameters()
    basis = _basis_for(model, examples[0].coeffs.shape[1])
    history = []
    started = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        order = rng_for(config.seed, 'shuffle', epoch).permutation(len(examples))
        losses, weights = [], []
        for indices in chunked(order, config.batch_size):
            batch = make_batch(examples[i] for i in indices)
            loss, grads = grad(model, batch, config.mode, lift(model, basis))
            params, state = adam_step(state, params, grads)
            model = model.with_parameters(params)
            losses.append(loss)
            weights.append(batch.mask.sum())
        train_loss = float(np.average(losses, weights=weights))
        test_loss = (evaluate(model, test_examples, config.mode)
                     if test_examples else float('nan'))
        metrics = EpochMetrics(epoch, train_loss, test_loss, time.perf_counter() - started)
        history.append(metrics)
        log.info(f'epoch {epoch}: train {train_loss:.6g}, test {test_loss:.6g}')
    return model, history
