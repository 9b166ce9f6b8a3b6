# -*- coding: UTF-8 -*-
#
# Copyright 2011-2026 by Dirk Gorissen, Stephen Rauch and Contributors
# All rights reserved.
# This file is part of the Streamsig Library, Licensed under GPLv3 (the 'License')
# You may not use this work except in compliance with the License.
# You may obtain a copy of the Licence at:
#   https://www.gnu.org/licenses/gpl-3.0.en.html

"""
Command line entry point

    streamsig gen sinusoid --regime async_sparse --n 256 --seed 1 --out data/sparse
    streamsig gen brownian --m 2 --n 640 --seed 1 --out data/bm2
    streamsig logsig stream.jsonl partition.json --depth 2 --out logsigs.json
    streamsig train data/sparse --config train.yml --out runs/sparse
    streamsig train data/sparse --logsigs data/sparse_logsigs --out runs/sparse_cached
    streamsig eval runs/*/model.json --data data/* --out runs/cross
    streamsig inspect stream.jsonl --out path.json
    streamsig inspect path.json --decode --out stream.jsonl

Exit codes: 0 success, 2 usage, 3 data error, 4 numerical error.
"""
import argparse
import csv
import logging
import os
import sys
import time

from streamsig.datagen import (
    BROWNIAN_INTERVALS,
    gen_brownian,
    gen_sinusoid,
    load_dataset,
    REGIMES,
    save_dataset,
)
from streamsig.embedding import (
    EmbeddingConfig,
    ObservationStream,
    partition_log_signatures,
    QueryPartition,
)
from streamsig.free_lie import LieElement
from streamsig.log_slice import LogSliceModel
from streamsig.oracle import decode, realize, RealizedPath
from streamsig.training import (
    build_examples,
    evaluate,
    examples_from_logsigs,
    model_for,
    train,
    TrainConfig,
)
from streamsig.util import (
    config_hash,
    DegenerateBatchError,
    DomainError,
    dump_json,
    file_md5_digest,
    IntervalError,
    load_text,
    NotALieElementError,
    NotARealizationError,
    NumericalError,
    ShapeError,
    StreamFormatError,
    streamsig_logger,
    UnsupportedError,
    worker_limit,
)
from streamsig.version import __version__


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

DATA_ERRORS = (StreamFormatError, ShapeError, IntervalError, DomainError, UnsupportedError,
               NotARealizationError, DegenerateBatchError, FileNotFoundError)
NUMERICAL_ERRORS = (NumericalError, NotALieElementError)

RUN_MANIFEST_NAME = 'run_manifest.json'
MODEL_NAME = 'model.json'
METRICS_NAME = 'metrics.csv'


def streamsig_logging_to_console(level=None):
    """Console handler on the library logger, level from STREAMSIG_LOG"""
    level = level or os.environ.get('STREAMSIG_LOG', 'WARNING')
    try:
        streamsig_logger.setLevel(level.upper())
    except ValueError:
        streamsig_logger.setLevel(logging.WARNING)
    # one console handler, bound to the current stderr
    for handler in list(streamsig_logger.handlers):
        if getattr(handler, '_streamsig_console', False):
            streamsig_logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    handler._streamsig_console = True
    streamsig_logger.addHandler(handler)


def run_manifest(command, config, seed, inputs, outputs, started):
    """Reproducibility record of one run"""
    return dict(
        command=command,
        config_hash=config_hash(config),
        seed=seed,
        version=__version__,
        inputs=list(inputs),
        outputs=list(outputs),
        wall_time=time.perf_counter() - started,
    )


def write_run_manifest(out_dir, manifest):
    dump_json(manifest, os.path.join(out_dir, RUN_MANIFEST_NAME), indent=1)


def _read_stream(filename, include_time):
    stream, continuous = ObservationStream.from_jsonl(filename)
    if include_time:
        continuous = continuous.with_time()
    return stream, continuous


def _train_config(args):
    """Config file values overridden by any flags given on the command line"""
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    overrides = dict(seed=args.seed, depth=args.depth, mode=args.mode, threads=args.threads)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.no_counts:
        overrides['include_counts'] = False
    if args.no_time:
        overrides['include_time'] = False
    if args.level1_inputs:
        overrides['level1_inputs'] = True
    return config._replace(**overrides) if overrides else config


def split_examples(examples, test_fraction):
    """(train, test): the last round(n * test_fraction) examples are held out"""
    n_test = int(round(len(examples) * test_fraction))
    if n_test >= len(examples):
        raise ShapeError(f'test_fraction {test_fraction} leaves no training examples')
    return examples[:len(examples) - n_test], examples[len(examples) - n_test:]


def dataset_label(params):
    if params.get('task') == 'sinusoid':
        return params.get('regime')
    if params.get('task') == 'brownian':
        return f"m={params.get('m')}"
    return str(params.get('task'))


def cmd_gen(args):
    started = time.perf_counter()
    if args.task == 'sinusoid':
        if args.regime is None:
            raise UsageError('gen sinusoid needs --regime')
        dataset = gen_sinusoid(args.regime, args.n, args.seed or 0, args.threads)
    else:
        if args.m is None:
            raise UsageError('gen brownian needs --m')
        dataset = gen_brownian(args.n, args.m, args.seed or 0, args.subgrid, threads=args.threads)
    save_dataset(dataset, args.out)
    write_run_manifest(args.out, run_manifest(
        'gen', dataset.params, args.seed or 0, [], [args.out], started))
    return EXIT_OK


def cmd_logsig(args):
    started = time.perf_counter()
    stream, continuous = _read_stream(args.stream, not args.no_time)
    partition = QueryPartition.from_file(args.partition)
    config = EmbeddingConfig.for_stream(
        stream, continuous, args.depth or 2, include_counts=not args.no_counts)
    mode = 'parallel' if args.mode == 'scan' else 'sequential'
    logsigs = partition_log_signatures(
        stream, continuous, partition, config, mode=mode, threads=args.threads)

    outputs = [args.out] if args.out else []
    document = dict(
        config=config.to_json(),
        basis=config.basis.to_json(),
        partition=partition.points.tolist(),
        logsigs=[phi.to_json() for phi in logsigs],
        manifest=run_manifest('logsig', config.to_json(), args.seed,
                              [args.stream, args.partition], outputs, started),
    )
    text = dump_json(document, args.out, indent=1 if args.out else None)
    if not args.out:
        sys.stdout.write(text + '\n')
    return EXIT_OK


def logsig_filename(index):
    return f'sample_{index:05d}.logsig.json'


def load_logsigs(filename):
    """(embedding, partition points, LieElements) from the output of the logsig command"""
    document = load_text(filename)
    try:
        config = {k: v for k, v in document['config'].items() if k != 'd_x'}
        embedding = EmbeddingConfig(**config)
        logsigs = [LieElement.from_json(phi) for phi in document['logsigs']]
        return embedding, document['partition'], logsigs
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise StreamFormatError(f'{filename}: not a logsig document: {exc}') from exc


def _training_examples(dataset, config, logsig_dir=None):
    if logsig_dir is None:
        return build_examples(dataset.samples, config)
    documents = [load_logsigs(os.path.join(logsig_dir, logsig_filename(index)))
                 for index in range(len(dataset.samples))]
    return examples_from_logsigs(dataset.samples, documents, config)


def cmd_train(args):
    started = time.perf_counter()
    config = _train_config(args)
    dataset = load_dataset(args.dataset)
    if args.logsigs and config.level1_inputs:
        raise UsageError('--logsigs cannot be combined with --level1-inputs')
    examples, embedding = _training_examples(dataset, config, args.logsigs)
    inputs = [args.dataset] + ([args.config] if args.config else [])
    if args.logsigs:
        inputs.append(args.logsigs)

    if args.test_dir:
        test_dataset = load_dataset(args.test_dir)
        test_examples, test_embedding = build_examples(test_dataset.samples, config)
        if test_embedding != embedding:
            raise ShapeError(f'Test data embeds as {test_embedding}, training as {embedding}')
        train_examples = examples
        inputs.append(args.test_dir)
    else:
        train_examples, test_examples = split_examples(examples, config.test_fraction)

    d_out = train_examples[0].targets.shape[1]
    model = model_for(config, embedding, d_out, d_init=embedding.d_disc)
    with worker_limit(config.threads):
        model, history = train(model, train_examples, config, test_examples or None)

    os.makedirs(args.out, exist_ok=True)
    model.meta.update(
        embedding=embedding.to_json(),
        train=config.to_json(),
        dataset=dict(dataset.params),
        final_train_loss=history[-1].train_loss if history else None,
        final_test_loss=history[-1].test_loss if history else None,
    )
    model_path = os.path.join(args.out, MODEL_NAME)
    metrics_path = os.path.join(args.out, METRICS_NAME)
    model.to_file(model_path)
    with open(metrics_path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['epoch', 'train_loss', 'test_loss', 'wall_time'])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_loss), repr(row.test_loss),
                             repr(row.wall_time)])
    write_run_manifest(args.out, run_manifest(
        'train', config.to_json(), config.seed, inputs, [model_path, metrics_path], started))
    return EXIT_OK


def evaluate_checkpoint(model, dataset, split='test', mode=None):
    """MSE of a trained model on a dataset, embedded the way it was trained"""
    config = TrainConfig.from_dict(model.meta['train'])
    if mode is not None:
        config = config._replace(mode=mode)
    examples, embedding = build_examples(dataset.samples, config)
    if embedding.d_x != model.d_x:
        raise ShapeError(f'Dataset embeds to d_x={embedding.d_x}, model expects {model.d_x}')
    if examples and examples[0].targets.shape[1] != model.d_out:
        raise ShapeError(
            f'Dataset has {examples[0].targets.shape[1]} targets, model predicts {model.d_out}')
    if split == 'test':
        examples = split_examples(examples, config.test_fraction)[1]
    return evaluate(model, examples, config.mode)


def cmd_eval(args):
    started = time.perf_counter()
    models = []
    for path in args.checkpoints:
        model = LogSliceModel.from_file(path)
        if 'train' not in model.meta:
            raise StreamFormatError(f'{path}: checkpoint has no training metadata')
        models.append(model)
    datasets = [load_dataset(path) for path in args.data]
    mode = args.mode

    with worker_limit(args.threads or 1):
        matrix = [[evaluate_checkpoint(model, dataset, args.split, mode)
                   for dataset in datasets] for model in models]

    rows = [dataset_label(m.meta.get('dataset', {})) for m in models]
    columns = [dataset_label(d.params) for d in datasets]
    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, 'eval.json')
    csv_path = os.path.join(args.out, 'eval.csv')
    dump_json(dict(trained=rows, evaluated=columns, checkpoints=args.checkpoints,
                   datasets=args.data, split=args.split, mse=matrix), json_path, indent=1)
    with open(csv_path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['trained \\ evaluated'] + columns)
        for label, values in zip(rows, matrix):
            writer.writerow([label] + [repr(v) for v in values])

    config = dict(checkpoints=[file_md5_digest(p) for p in args.checkpoints],
                  datasets=args.data, split=args.split, mode=mode)
    write_run_manifest(args.out, run_manifest(
        'eval', config, args.seed, args.checkpoints + args.data, [json_path, csv_path],
        started))
    return EXIT_OK


def cmd_inspect(args):
    if args.decode:
        document = load_text(args.source)
        try:
            path = RealizedPath.from_json(document['path'])
            config = EmbeddingConfig(**{k: v for k, v in document['config'].items()
                                        if k != 'd_x'})
        except (KeyError, TypeError) as exc:
            raise StreamFormatError(f'{args.source}: not a realised path: {exc}') from exc
        stream, continuous = decode(path, config)
        stream.to_jsonl(args.out, continuous)
    else:
        stream, continuous = _read_stream(args.source, not args.no_time)
        config = EmbeddingConfig.for_stream(
            stream, continuous, args.depth or 2, include_counts=not args.no_counts)
        path = realize(stream, continuous, config)
        dump_json(dict(config=config.to_json(), path=path.to_json()), args.out, indent=1)
    return EXIT_OK


class UsageError(Exception):
    """Bad combination of command line arguments"""


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='random seed')
    common.add_argument('--depth', type=int, default=None, help='log-signature depth')
    common.add_argument('--no-counts', action='store_true',
                        help='leave out the observation count channels')
    common.add_argument('--no-time', action='store_true',
                        help='do not append physical time as a continuous channel')
    common.add_argument('--mode', choices=('sequential', 'scan'), default=None,
                        help='sequential fold or chunked reduction with parallel scan')
    common.add_argument('--threads', type=int, default=None, help='worker cap')
    return common


def build_parser():
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='streamsig', description='Log-signatures of irregular streams and Log-SLiCE models')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', parents=[common], help='generate a synthetic dataset')
    gen.add_argument('task', choices=('sinusoid', 'brownian'))
    gen.add_argument('--regime', choices=REGIMES)
    gen.add_argument('--m', type=int, choices=BROWNIAN_INTERVALS, help='query intervals')
    gen.add_argument('--n', type=int, required=True, help='number of samples')
    gen.add_argument('--subgrid', type=int, default=16, help='Brownian subgrid factor')
    gen.add_argument('--out', required=True, help='dataset directory')
    gen.set_defaults(func=cmd_gen)

    logsig = commands.add_parser('logsig', parents=[common],
                                 help='interval log-signatures of a stream')
    logsig.add_argument('stream', help='JSON Lines stream file')
    logsig.add_argument('partition', help='JSON array of query times')
    logsig.add_argument('--out', help='output file, stdout if omitted')
    logsig.set_defaults(func=cmd_logsig)

    train_cmd = commands.add_parser('train', parents=[common], help='train a Log-SLiCE model')
    train_cmd.add_argument('dataset', help='dataset directory')
    train_cmd.add_argument('--config', help='training config (yml or json)')
    train_cmd.add_argument('--test-dir', help='separate test dataset directory')
    train_cmd.add_argument('--logsigs', help='directory of logsig command outputs, one per sample')
    train_cmd.add_argument('--level1-inputs', action='store_true',
                           help='drop higher-order event records before embedding')
    train_cmd.add_argument('--out', required=True, help='run directory')
    train_cmd.set_defaults(func=cmd_train)

    eval_cmd = commands.add_parser('eval', parents=[common], help='evaluate checkpoints')
    eval_cmd.add_argument('checkpoints', nargs='+', help='model checkpoint files')
    eval_cmd.add_argument('--data', nargs='+', required=True, help='dataset directories')
    eval_cmd.add_argument('--split', choices=('test', 'all'), default='test',
                          help='held out part of each dataset, or all of it')
    eval_cmd.add_argument('--out', required=True, help='output directory')
    eval_cmd.set_defaults(func=cmd_eval)

    inspect = commands.add_parser('inspect', parents=[common],
                                  help='realise a stream as a path, or decode a path')
    inspect.add_argument('source', help='stream file, or path file with --decode')
    inspect.add_argument('--decode', action='store_true', help='decode a realised path')
    inspect.add_argument('--out', required=True, help='output file')
    inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    streamsig_logging_to_console()

    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f'streamsig: error: {exc}\n')
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        sys.stderr.write(f'streamsig: data error: {exc}\n')
        return EXIT_DATA
    except NUMERICAL_ERRORS as exc:
        sys.stderr.write(f'streamsig: numerical error: {exc}\n')
        return EXIT_NUMERICAL


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
