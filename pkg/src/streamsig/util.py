# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

import concurrent.futures
import contextlib
import hashlib
import json
import logging
import os
import threading

import numpy as np
from ruamel.yaml import YAML


streamsig_logger = logging.getLogger('streamsig')

TEXT_FILE_EXTENSIONS = ('yml', 'yaml', 'json')


class StreamSigException(Exception):
    """Base class for Streamsig errors"""


class ShapeError(StreamSigException, ValueError):
    """Dimension, depth or array shape mismatch"""


class DomainError(StreamSigException, ValueError):
    """Argument outside the domain of an operation"""


class IntervalError(StreamSigException, ValueError):
    """Malformed interval or partition"""


class NotALieElementError(StreamSigException):
    """Tensor is not (numerically) a Lie polynomial"""


class NotARealizationError(StreamSigException):
    """Path does not have the structure produced by realize()"""


class UnsupportedError(StreamSigException):
    """Input deliberately not covered by an operation"""


class DegenerateBatchError(StreamSigException):
    """Loss mask selects no intervals"""


class NumericalError(StreamSigException):
    """Non-finite value in a computation"""


class StreamFormatError(StreamSigException):
    """Malformed stream, partition or config file"""


def check_finite(data, where):
    """Raise NumericalError naming `where` if data holds NaN or Inf"""
    if not np.all(np.isfinite(data)):
        raise NumericalError(f'Non-finite values in {where}')
    return data


def readonly(array, dtype=float):
    """A private read-only float copy of array"""
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def rng_for(seed, *keys):
    """Independent numpy Generator keyed by (seed, *keys)

    Keys may be ints or strings; the same keys always give the same stream
    no matter which thread or in which order the generators are built.
    """
    entropy = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            key = int.from_bytes(hashlib.md5(key.encode()).digest()[:4], 'little')
        entropy.append(int(key))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def chunked(items, size):
    """Consecutive slices of items, each at most size long"""
    assert size >= 1
    return [items[i:i + size] for i in range(0, len(items), size)]


class _WorkerLimit:
    """Per thread cap on the workers used by parallel_map"""
    _ns = threading.local()

    @property
    def ns(self):
        if not hasattr(self._ns, 'threads'):
            self._ns.threads = 1
        return self._ns

    @property
    def threads(self):
        return self.ns.threads

    @contextlib.contextmanager
    def __call__(self, threads):
        previous = self.ns.threads
        self.ns.threads = max(1, int(threads or 1))
        try:
            yield self
        finally:
            self.ns.threads = previous


worker_limit = _WorkerLimit()


def parallel_map(func, items, threads=None):
    """Ordered map of func over items using up to `threads` workers

    The result order, and so every downstream reduction, is independent
    of the worker count.
    """
    items = list(items)
    threads = worker_limit.threads if threads is None else max(1, int(threads))
    if threads == 1 or len(items) < 2:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def file_md5_digest(filename):
    if not os.path.exists(filename):
        return None
    hash_md5 = hashlib.md5()
    with open(filename, 'rb') as f:
        for chunk in iter(lambda: f.read(4096), b''):
            hash_md5.update(chunk)
    return hash_md5.hexdigest()


def config_hash(data):
    """Stable hash of a json-able dict"""
    text = json.dumps(to_jsonable(data), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def to_jsonable(data):
    """Convert numpy containers and scalars to plain python"""
    if isinstance(data, dict):
        return {str(k): to_jsonable(v) for k, v in data.items()}
    if isinstance(data, np.ndarray):
        return data.tolist()
    if isinstance(data, (np.floating, np.integer, np.bool_)):
        return data.item()
    if isinstance(data, (list, tuple)):
        return [to_jsonable(v) for v in data]
    return data


def dump_json(data, filename=None, indent=None):
    """Write (or return) json with round trip float formatting"""
    text = json.dumps(to_jsonable(data), indent=indent)
    if filename is None:
        return text
    with open(filename, 'w') as f:
        f.write(text + '\n')
    return text


def dump_text(data, filename):
    """Serialize to a json or yaml file, chosen by the file extension"""
    extension = filename.rsplit('.', 1)[-1]
    if extension not in TEXT_FILE_EXTENSIONS:
        raise ValueError(f'Unknown file type: {filename}')

    data = to_jsonable(data)
    if extension == 'json':
        dump_json(data, filename, indent=1)
    else:
        with open(filename, 'w') as f:
            ymlo = YAML()
            ymlo.width = 120
            ymlo.dump(data, f)


def load_text(filename):
    """Deserialize a json or yaml file"""
    if not os.path.exists(filename):
        raise FileNotFoundError(f"File not found: '{filename}'")
    with open(filename, 'r') as f:
        try:
            if filename.endswith('.json'):
                return json.load(f)
            return YAML(typ='safe').load(f)
        except Exception as exc:
            raise StreamFormatError(f'{filename}: {exc}') from exc
