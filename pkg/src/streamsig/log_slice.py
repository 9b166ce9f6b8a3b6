# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Structured linear controlled differential equations driven by log-signatures

Every matrix is stored as a stack of diagonal blocks with shape
(n_blocks, b, b); a dense model is the single block case.  The hidden state
over one query interval moves by the flow

    h <- exp(sum_w Phi_w A_w) h

where A_w is the Lie lift of the channel matrices along the Lyndon word w.
"""
import collections
import math
import os
import pickle

import numpy as np

from streamsig.free_lie import build_basis
from streamsig.util import (
    check_finite,
    DomainError,
    dump_text,
    load_text,
    NumericalError,
    readonly,
    rng_for,
    ShapeError,
    streamsig_logger,
    TEXT_FILE_EXTENSIONS,
)


EXPM_TAYLOR_ORDER = 16
EXPM_SCALED_NORM = 0.5

FORWARD_MODES = ('sequential', 'scan')

PARAMETER_NAMES = ('channels', 'readout_weight', 'readout_bias', 'init_weight', 'init_bias')


def forward_mode(mode):
    if mode == 'parallel_scan':
        return 'scan'
    if mode not in FORWARD_MODES:
        raise DomainError(f'Unknown forward mode {mode!r}, expected one of {FORWARD_MODES}')
    return mode


def expm(matrices):
    """exp of every trailing square matrix by scaling and squaring

    Each matrix gets its own squaring count s with ||M||_1 / 2**s < 0.5 and a
    fixed order Taylor polynomial, so a result never depends on what else is
    in the batch.
    """
    matrices = np.asarray(matrices, dtype=float)
    n = matrices.shape[-1]
    norms = np.max(np.sum(np.abs(matrices), axis=-2), axis=-1)
    if not np.all(np.isfinite(norms)):
        raise NumericalError('Non-finite matrix passed to expm')
    squarings = np.maximum(
        0, np.ceil(np.log2(np.maximum(norms, 1e-300) / EXPM_SCALED_NORM))).astype(int)
    scaled = matrices / (2.0 ** squarings)[..., None, None]

    identity = np.broadcast_to(np.eye(n), matrices.shape)
    result = identity + scaled / EXPM_TAYLOR_ORDER
    for k in range(EXPM_TAYLOR_ORDER - 1, 0, -1):
        result = identity + np.matmul(scaled, result) / k

    for step in range(int(squarings.max(initial=0))):
        squared = np.matmul(result, result)
        result = np.where((step < squarings)[..., None, None], squared, result)
    return result


def expm_frechet_adjoint(matrices, grads):
    """Pull back a gradient on exp(M) to a gradient on M

    The adjoint of the Frechet derivative of exp at M applied to G is the
    top-right block of exp([[M^T, G], [0, M^T]]).
    """
    matrices = np.asarray(matrices, dtype=float)
    n = matrices.shape[-1]
    transposed = np.swapaxes(matrices, -1, -2)
    block = np.zeros(matrices.shape[:-2] + (2 * n, 2 * n))
    block[..., :n, :n] = transposed
    block[..., n:, n:] = transposed
    block[..., :n, n:] = grads
    return expm(block)[..., :n, n:]


def to_dense(blocks):
    """Block stack (..., n_blocks, b, b) as full (..., n_blocks * b) matrices"""
    blocks = np.asarray(blocks)
    n_blocks, b = blocks.shape[-3], blocks.shape[-1]
    dense = np.zeros(blocks.shape[:-3] + (n_blocks * b, n_blocks * b))
    for n in range(n_blocks):
        dense[..., n * b:(n + 1) * b, n * b:(n + 1) * b] = blocks[..., n, :, :]
    return dense


def apply_blocks(blocks, vectors):
    """Block matrices (..., n_blocks, b, b) times vectors (..., n_blocks * b)"""
    n_blocks, b = blocks.shape[-3], blocks.shape[-1]
    split = vectors.reshape(vectors.shape[:-1] + (n_blocks, b))
    product = np.einsum('...nij,...nj->...ni', blocks, split)
    return product.reshape(product.shape[:-2] + (n_blocks * b, ))


def inclusive_scan(flows):
    """Prefix products F_k ... F_1 F_0 along the first axis

    Hillis-Steele: log2(K) rounds, each combining an element with the one
    `stride` places before it as later @ earlier.
    """
    prefix = np.array(flows, dtype=float)
    stride = 1
    while stride < len(prefix):
        prefix[stride:] = np.matmul(prefix[stride:], prefix[:-stride])
        stride *= 2
    return prefix


class LogSliceModel:
    """Channel matrices, readout and initial state of a Log-SLiCE model"""

    save_file_extensions = ('pkl', 'pickle') + TEXT_FILE_EXTENSIONS

    def __init__(self, channels, readout_weight, readout_bias, h0=None,
                 init_weight=None, init_bias=None, meta=None):
        channels = readonly(channels)
        if channels.ndim != 4 or channels.shape[-1] != channels.shape[-2]:
            raise ShapeError(
                f'Channels must be (d_x, n_blocks, b, b) blocks, got {channels.shape}')
        self.channels = check_finite(channels, 'channel matrices')
        self.readout_weight = check_finite(readonly(np.atleast_2d(readout_weight)),
                                           'readout weight')
        self.readout_bias = check_finite(readonly(np.ravel(readout_bias)), 'readout bias')

        if h0 is None:
            # unit start in every block, blocks never mix
            h0 = np.zeros(self.hidden_dim)
            h0[::self.block_size] = 1.0
        self.h0 = readonly(np.ravel(h0))

        if (init_weight is None) != (init_bias is None):
            raise ShapeError('init_weight and init_bias come together')
        self.init_weight = None if init_weight is None else readonly(np.atleast_2d(init_weight))
        self.init_bias = None if init_bias is None else readonly(np.ravel(init_bias))
        self.meta = dict(meta or {})
        self.log = streamsig_logger

        d_h = self.hidden_dim
        if self.readout_weight.shape[1] != d_h:
            raise ShapeError(f'Readout weight {self.readout_weight.shape} vs hidden dim {d_h}')
        if self.readout_bias.shape != (self.d_out, ):
            raise ShapeError(f'Readout bias {self.readout_bias.shape} vs d_out {self.d_out}')
        if self.h0.shape != (d_h, ):
            raise ShapeError(f'h0 {self.h0.shape} vs hidden dim {d_h}')
        if self.init_weight is not None and (
                self.init_weight.shape[0] != d_h or self.init_bias.shape != (d_h, )):
            raise ShapeError(
                f'Init map {self.init_weight.shape} + {self.init_bias.shape} vs hidden dim {d_h}')

    def __repr__(self):
        return (f'LogSliceModel(d_x={self.d_x}, hidden_dim={self.hidden_dim}, '
                f'block_size={self.block_size}, d_out={self.d_out}, '
                f'structure={self.structure})')

    @classmethod
    def init(cls, d_x, hidden_dim, d_out, block_size=None, d_init=0, seed=0):
        """Uniform(-1/sqrt(d_h), 1/sqrt(d_h)) weights with zero biases"""
        block_size = block_size or hidden_dim
        if hidden_dim % block_size:
            raise ShapeError(f'hidden_dim {hidden_dim} not divisible by block_size {block_size}')
        n_blocks = hidden_dim // block_size
        rng = rng_for(seed, 'init')
        scale = 1 / math.sqrt(hidden_dim)
        channels = rng.uniform(-scale, scale, (d_x, n_blocks, block_size, block_size))
        readout_weight = rng.uniform(-scale, scale, (d_out, hidden_dim))
        init_weight = init_bias = None
        if d_init:
            init_weight = rng.uniform(-scale, scale, (hidden_dim, d_init))
            init_bias = np.zeros(hidden_dim)
        return cls(channels, readout_weight, np.zeros(d_out),
                   init_weight=init_weight, init_bias=init_bias)

    @property
    def d_x(self):
        return self.channels.shape[0]

    @property
    def n_blocks(self):
        return self.channels.shape[1]

    @property
    def block_size(self):
        return self.channels.shape[-1]

    @property
    def hidden_dim(self):
        return self.n_blocks * self.block_size

    @property
    def d_out(self):
        return self.readout_weight.shape[0]

    @property
    def d_init(self):
        return 0 if self.init_weight is None else self.init_weight.shape[1]

    @property
    def structure(self):
        return 'dense' if self.n_blocks == 1 else 'block_diagonal'

    def parameters(self):
        """Trainable arrays by name"""
        return collections.OrderedDict(
            (name, getattr(self, name)) for name in PARAMETER_NAMES
            if getattr(self, name) is not None)

    def with_parameters(self, params):
        values = self.parameters()
        unknown = set(params) - set(values)
        assert not unknown, f'Unknown parameters: {unknown}'
        values.update(params)
        return LogSliceModel(h0=self.h0, meta=self.meta, **values)

    def initial_state(self, first_values=None):
        """h_0 = U tanh(x_first) + c with an init map, the fixed h0 otherwise"""
        if self.init_weight is None:
            return np.array(self.h0)
        if first_values is None:
            raise ShapeError('Model uses input-dependent initialisation, need first values')
        first_values = np.asarray(first_values, dtype=float)
        return np.tanh(first_values) @ self.init_weight.T + self.init_bias

    def to_json(self):
        data = dict(
            structure=self.structure,
            d_x=self.d_x,
            hidden_dim=self.hidden_dim,
            block_size=self.block_size,
            d_out=self.d_out,
            channels=self.channels.tolist(),
            readout=dict(weight=self.readout_weight.tolist(), bias=self.readout_bias.tolist()),
            init=dict(h0=self.h0.tolist()),
            meta=self.meta,
        )
        if self.init_weight is not None:
            data['init'].update(weight=self.init_weight.tolist(), bias=self.init_bias.tolist())
        return data

    @classmethod
    def from_json(cls, data):
        init = data.get('init', {})
        model = cls(
            data['channels'], data['readout']['weight'], data['readout']['bias'],
            h0=init.get('h0'), init_weight=init.get('weight'), init_bias=init.get('bias'),
            meta=data.get('meta'))
        if (model.d_x, model.hidden_dim, model.block_size) != (
                data['d_x'], data['hidden_dim'], data['block_size']):
            raise ShapeError(f'Checkpoint header disagrees with its matrices: {model}')
        return model

    @classmethod
    def _filename_extension(cls, filename):
        return next((extension for extension in cls.save_file_extensions
                     if filename.endswith('.' + extension)), None)

    def to_file(self, filename):
        """Save as json/yml text, or pickle for pkl/pickle"""
        extension = self._filename_extension(filename)
        if extension is None:
            raise ValueError(f'Unknown file type: {filename}')
        if extension.startswith('p'):
            with open(filename, 'wb') as f:
                pickle.dump(self.to_json(), f)
        else:
            dump_text(self.to_json(), filename)
        self.log.info(f'Saved {self} to {filename}')

    @classmethod
    def from_file(cls, filename):
        extension = cls._filename_extension(filename)
        if extension is None:
            raise ValueError(f'Unknown file type: {filename}')
        if not os.path.exists(filename):
            raise FileNotFoundError(f"Checkpoint not found: '{filename}'")
        if extension.startswith('p'):
            with open(filename, 'rb') as f:
                return cls.from_json(pickle.load(f))
        return cls.from_json(load_text(filename))


class LiftedField:
    """Lie lift of the channel matrices onto every Lyndon word of a basis"""

    def __init__(self, basis, matrices):
        self.basis = basis
        self.matrices = readonly(matrices)
        assert self.matrices.shape[0] == basis.size

    def __repr__(self):
        return f'LiftedField({self.basis}, blocks={self.matrices.shape[1:]})'

    def __getitem__(self, word):
        return self.matrices[self.basis.index(word)]

    def generators(self, coeffs):
        """sum_w Phi_w A_w for coefficient rows (..., n_words)"""
        return np.einsum('...w,wnij->...nij', coeffs, self.matrices)


def lift(model, basis=None, depth=None):
    """Extend the channel matrices along standard factorizations

    A_w = -(A_u A_v - A_v A_u) for w = uv, evaluated so both factors of a
    word are ready before the word itself.
    """
    assert basis is not None or depth is not None, 'need a basis or a depth'
    basis = basis or build_basis(model.d_x, depth)
    if basis.dim != model.d_x:
        raise ShapeError(f'{basis} does not match model d_x={model.d_x}')
    lifted = {}
    for word in basis.evaluation_order:
        if len(word) == 1:
            lifted[word] = model.channels[word[0]]
        else:
            u, v = (lifted[f] for f in basis.factors[word])
            lifted[word] = -(np.matmul(u, v) - np.matmul(v, u))
    return LiftedField(basis, np.stack([lifted[w] for w in basis.words]))


def _coefficient_rows(lifted, logsigs):
    for n, phi in enumerate(logsigs):
        if phi.basis != lifted.basis:
            raise ShapeError(f'Interval {n}: {phi.basis} does not match {lifted.basis}')
    rows = np.array([phi.coeffs for phi in logsigs]).reshape(len(logsigs), lifted.basis.size)
    return check_finite(rows, 'interval log-signatures')


def interval_flow(lifted, logsig):
    """exp(sum_w Phi_w A_w) as (n_blocks, b, b) blocks"""
    return flows(lifted, [logsig])[0]


def flows(lifted, logsigs):
    """Flow blocks (M, n_blocks, b, b) of every interval"""
    return expm(lifted.generators(_coefficient_rows(lifted, logsigs)))


def forward(model, lifted, logsigs, mode='sequential', first_values=None, h0=None):
    """Hidden states h(r_1), ..., h(r_M) as an (M, d_h) array"""
    mode = forward_mode(mode)
    if model.d_x != lifted.basis.dim:
        raise ShapeError(f'{lifted} does not match {model}')
    h0 = model.initial_state(first_values) if h0 is None else np.asarray(h0, dtype=float)
    interval_flows = flows(lifted, logsigs)

    if mode == 'scan':
        return apply_blocks(inclusive_scan(interval_flows), h0[None, :])

    states = np.zeros((len(logsigs), model.hidden_dim))
    h = h0
    for k, flow in enumerate(interval_flows):
        h = apply_blocks(flow, h)
        states[k] = h
    return states


def readout(model, h):
    """W h + bias for one state or a stack of states"""
    return np.asarray(h) @ model.readout_weight.T + model.readout_bias
