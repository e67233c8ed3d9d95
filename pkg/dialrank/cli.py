"""
Command line interface. Every command reads its inputs, runs one pipeline step and writes its artifacts; reports go
to standard output unless --out is given. Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations
import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence
from dialrank.config import RunConfig, load_config
from dialrank.corpus import (NEGATIVE, POSITIVE, SIGNALS, USER, FeedbackDetector, RankingContext, Turn,
                             TurnAnnotator, build_dataset, extract_feedback_set, filter_corpus, ingest_transcripts,
                             read_dataset, read_tuples, write_dataset, write_transcripts, write_tuples)
from dialrank.errors import CheckpointError, ConfigError, DataError, ModelError
from dialrank.evaluation import compare_rankers, correlation_study, learning_curve, pairwise_eval, testset_loss
from dialrank.rankers import KINDS, grid_search, load_checkpoint, rank, save_checkpoint, train_ranker
from dialrank.rankers.graph import architecture_graph
from dialrank.synthgen import generate_corpus, plant_eval_split

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """
    argparse reports usage errors with exit code 2, which is the data error code here.
    """

    def error(self, message):
        raise UsageError('{}: {}'.format(self.prog, message))


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument('--seed', type=int, default=42, help='Seed of all random choices. Default is 42.')
    p.add_argument('--config', dest='config', help='Plain text key = value configuration file.')
    p.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                   help='Override one configuration value, e.g. neural.gru_size=64. May be repeated.')
    p.add_argument('--out', dest='out', help='Output file (directory for build-datasets).')
    p.add_argument('-v', '--verbose', action='store_true', help='Log debug messages.')
    p.add_argument('-q', '--quiet', action='store_true', help='Only log warnings and errors.')
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog='dialrank', description='Train and evaluate dialogue response rankers.')
    sub = parser.add_subparsers(dest='command', metavar='command', parser_class=_Parser)
    sub.required = True

    p = sub.add_parser('ingest', parents=[common], help='Validate transcripts and write them in canonical form.')
    p.add_argument('input', help='Transcript file.')

    p = sub.add_parser('synth', parents=[common], help='Generate a synthetic corpus.')
    p.add_argument('--n', type=int, dest='n_dialogues', help='Number of dialogues.')

    p = sub.add_parser('filter', parents=[common], help='Remove non-social turns and outlier dialogues.')
    p.add_argument('input', help='Transcript file.')

    p = sub.add_parser('holdout', parents=[common],
                       help='Reserve dialogues for evaluation and extract their feedback tuples.')
    p.add_argument('input', help='Filtered transcript file.')
    p.add_argument('--fraction', type=float, default=0.1, help='Share of reserved dialogues. Default is 0.1.')
    p.add_argument('--tuples', required=True, help='Output file of the held-out feedback tuples.')

    p = sub.add_parser('feedback', parents=[common], help='Extract feedback tuples from a whole corpus.')
    p.add_argument('input', help='Transcript file.')
    p.add_argument('--polarity', choices=(POSITIVE, NEGATIVE), default=POSITIVE,
                   help='Feedback kind that marks the good response. Default is positive.')

    p = sub.add_parser('build-datasets', parents=[common], help='Build balanced length and rating datasets.')
    p.add_argument('input', help='Filtered transcript file.')
    p.add_argument('--size', type=int, required=True, help='Instances per dataset, even.')
    p.add_argument('--signal', choices=SIGNALS + ('both',), default='both',
                   help='Dataset(s) to build. Default is both.')

    p = sub.add_parser('train', parents=[common], help='Train a ranker and write its checkpoint.')
    p.add_argument('--data', required=True, help='Dataset file or directory written by build-datasets.')
    p.add_argument('--signal', choices=SIGNALS, default='length', help='Dataset in a directory. Default is length.')
    p.add_argument('--ranker', choices=sorted(KINDS), default='neural', help='Ranker kind. Default is neural.')
    p.add_argument('--grid', action='store_true',
                   help='Neural ranker only: try all GRU sizes and predictor layouts, keep the best on dev.')

    p = sub.add_parser('evaluate', parents=[common], help='Pairwise precision at 1 on feedback tuples.')
    p.add_argument('--model', required=True, help='Checkpoint.')
    p.add_argument('--tuples', required=True, help='Feedback tuple file.')
    p.add_argument('--data', help='Dataset file whose test split gives the test loss.')

    p = sub.add_parser('correlate', parents=[common], help='Correlation study of rating, length and feedback.')
    p.add_argument('input', help='Transcript file.')

    p = sub.add_parser('learning-curve', parents=[common], help='P@1 over growing length datasets.')
    p.add_argument('input', help='Filtered training transcripts, disjoint from the tuples.')
    p.add_argument('--tuples', required=True, help='Held-out feedback tuples.')
    p.add_argument('--sizes', required=True, help='Comma separated, strictly increasing dataset sizes.')
    p.add_argument('--rankers', default='neural', help='Comma separated ranker kinds. Default is neural.')
    p.add_argument('--no-rating-baseline', dest='rating_baseline', action='store_false',
                   help='Do not add the <kind>@rating series.')

    p = sub.add_parser('compare', parents=[common], help='All rankers on length and rating datasets.')
    p.add_argument('input', help='Filtered training transcripts, disjoint from the tuples.')
    p.add_argument('--tuples', required=True, help='Held-out feedback tuples.')
    p.add_argument('--size', type=int, required=True, help='Instances per dataset.')
    p.add_argument('--rankers', default=','.join(sorted(KINDS)), help='Comma separated ranker kinds.')

    p = sub.add_parser('rank', parents=[common], help='Rank candidates for a context, best first, as TSV.')
    p.add_argument('--model', required=True, help='Checkpoint.')
    p.add_argument('input', nargs='?', help='JSON record {"context": [...], "candidates": [...]}, stdin if absent.')

    p = sub.add_parser('graph', parents=[common], help='Write the layer graph of a network ranker as dot.')
    p.add_argument('--model', required=True, help='Checkpoint of a neural or dual encoder ranker.')
    return parser


def _overrides(pairs: Sequence[str]) -> dict:
    out = {}
    for item in pairs:
        if '=' not in item:
            raise ConfigError('--set expects KEY=VALUE, got {!r}'.format(item))
        k, v = item.split('=', 1)
        out[k.strip()] = v.strip()
    return out


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _require_out(run: RunConfig):
    if not run.out:
        raise UsageError('{} needs --out'.format(run.command))


def _dataset_path(data: str, signal: str) -> str:
    return os.path.join(data, '{}.jsonl'.format(signal)) if os.path.isdir(data) else data


def _split_list(raw: str) -> List[str]:
    return [s.strip() for s in raw.split(',') if s.strip()]


def parse_rank_record(record: dict, annotator: Optional[TurnAnnotator] = None):
    """
    Context and candidates of a rank request. Turn timestamps default to 0.
    :return: (RankingContext, [Candidate])
    """
    annotator = annotator or TurnAnnotator()
    try:
        turns = tuple(Turn(str(t['agent']), str(t['text']), float(t.get('timestamp', 0.0)))
                      for t in record['context'])
        ts = turns[-1].timestamp if turns else 0.0
        candidates = [annotator.candidate(Turn(str(c['bot']), str(c['text']), ts)) for c in record['candidates']]
        context = RankingContext(turns, tuple(annotator.entities(t.text) for t in turns),
                                 int(record.get('position', len(turns))), turns[0].timestamp if turns else 0.0)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError('invalid rank record: {}'.format(e))
    if any(c.bot == USER for c in candidates):
        raise DataError('a candidate cannot come from the user')
    return context, candidates


INPUT_ARGS = ('input', 'data', 'model')


def run_config(args) -> RunConfig:
    """
    The RunConfig of parsed arguments. The configuration is loaded later from its overrides. Commands without
    --signal or --ranker keep the defaults, build-datasets with both signals keeps length.
    """
    inputs = [getattr(args, n) for n in INPUT_ARGS if getattr(args, n, None)]
    if args.command != 'holdout' and getattr(args, 'tuples', None):
        inputs.append(args.tuples)
    signal = getattr(args, 'signal', 'length')
    return RunConfig(args.command, inputs, args.out, 'length' if signal == 'both' else signal,
                     getattr(args, 'ranker', 'neural'), _overrides(args.overrides), args.seed)


def run_command(args, run: RunConfig) -> int:
    cfg = run.config
    cmd = args.command
    missing = [p for p in run.inputs if not os.path.exists(p)]
    if missing:
        raise DataError('missing input {}'.format(', '.join(missing)))
    if cmd == 'ingest':
        _require_out(run)
        write_transcripts(ingest_transcripts(args.input), run.out)
    elif cmd == 'synth':
        _require_out(run)
        if args.n_dialogues is not None:
            cfg.generator.n_dialogues = args.n_dialogues
        cfg.generator.seed = run.seed
        write_transcripts(generate_corpus(cfg.generator, cfg.text, cfg.feedback, cfg.corpus), run.out)
    elif cmd == 'filter':
        _require_out(run)
        corpus, report = filter_corpus(ingest_transcripts(args.input), cfg.corpus)
        write_transcripts(corpus, run.out)
        sys.stdout.write('dialogues_in\tdialogues_out\ttoo_short\ttoo_long\tblacklisted_turns\tlength_cutoff\n'
                         '{}\t{}\t{}\t{}\t{}\t{}\n'.format(report.dialogues_in, report.dialogues_out,
                                                          report.too_short, report.too_long,
                                                          report.blacklisted_turns, report.length_cutoff))
    elif cmd == 'holdout':
        _require_out(run)
        if not 0.0 < args.fraction < 1.0:
            raise UsageError('--fraction must be in (0, 1), got {}'.format(args.fraction))
        train, tuples = plant_eval_split(ingest_transcripts(args.input), args.fraction, run.seed,
                                         detector=FeedbackDetector.from_config(cfg.feedback), cfg=cfg.corpus)
        write_transcripts(train, run.out)
        write_tuples(tuples, args.tuples)
    elif cmd == 'feedback':
        _require_out(run)
        detector = FeedbackDetector.from_config(cfg.feedback, args.polarity)
        write_tuples(extract_feedback_set(ingest_transcripts(args.input), detector, run.seed,
                                          cfg=cfg.corpus).tuples, run.out)
    elif cmd == 'build-datasets':
        _require_out(run)
        corpus = ingest_transcripts(args.input)
        os.makedirs(run.out, exist_ok=True)
        annotator = TurnAnnotator()
        for signal in (SIGNALS if args.signal == 'both' else (run.signal,)):
            dataset = build_dataset(corpus, signal, args.size, run.seed, cfg.corpus, annotator)
            write_dataset(dataset, os.path.join(run.out, '{}.jsonl'.format(signal)))
    elif cmd == 'train':
        _require_out(run)
        dataset = read_dataset(_dataset_path(args.data, run.signal))
        if args.grid:
            if run.ranker != 'neural':
                raise UsageError('--grid is only defined for the neural ranker')
            result = grid_search(dataset, cfg.neural, run.seed, cfg.text)
            ranker, report = result.model, result.report
            _emit(result.to_tsv(), run.out + '.grid.tsv')
        else:
            ranker, report = train_ranker(run.ranker, dataset, cfg, run.seed)
        save_checkpoint(ranker, run.out)
        if report is not None:
            _emit(report.to_tsv(), run.out + '.epochs.tsv')
    elif cmd == 'evaluate':
        ranker = load_checkpoint(args.model)
        report = pairwise_eval(ranker, read_tuples(args.tuples))
        if args.data:
            report.test_loss = testset_loss(ranker, read_dataset(args.data).test)
        sys.stdout.write(report.to_tsv())
        if run.out:
            _emit(report.to_json() + '\n', run.out)
    elif cmd == 'correlate':
        positive = FeedbackDetector.from_config(cfg.feedback, POSITIVE)
        negative = FeedbackDetector.from_config(cfg.feedback, NEGATIVE)
        _emit(correlation_study(ingest_transcripts(args.input), positive, negative).to_tsv(), run.out)
    elif cmd == 'learning-curve':
        sizes = [int(s) for s in _split_list(args.sizes)]
        curve = learning_curve(ingest_transcripts(args.input), read_tuples(args.tuples), _kinds(args.rankers), sizes,
                               run.seed, cfg, args.rating_baseline)
        _emit(curve.to_tsv(), run.out)
    elif cmd == 'compare':
        result = compare_rankers(ingest_transcripts(args.input), read_tuples(args.tuples), _kinds(args.rankers),
                                 args.size, run.seed, cfg)
        _emit(result.to_tsv(), run.out)
    elif cmd == 'rank':
        ranker = load_checkpoint(args.model)
        if args.input:
            with open(args.input, encoding='utf-8') as f:
                raw = f.read()
        else:
            raw = sys.stdin.read()
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as e:
            raise DataError('rank input is not JSON: {}'.format(e))
        context, candidates = parse_rank_record(record)
        lines = ['rank\tscore\tbot\ttext']
        for i, (c, s) in enumerate(rank(ranker, context, candidates), 1):
            lines.append('{}\t{:.6f}\t{}\t{}'.format(i, s, c.bot, c.text))
        _emit('\n'.join(lines) + '\n', run.out)
    elif cmd == 'graph':
        _emit(architecture_graph(load_checkpoint(args.model)).to_string(), run.out)
    return EXIT_OK


def _kinds(raw: str) -> List[str]:
    kinds = _split_list(raw)
    unknown = [k for k in kinds if k not in KINDS]
    if unknown or not kinds:
        raise UsageError('unknown ranker kinds {}, expected some of {}'.format(unknown, ', '.join(sorted(KINDS))))
    return kinds


def setup_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format='%(asctime)s %(levelname)s %(name)s: %(message)s',
                        force=True)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.
    :param argv: Arguments without the program name, sys.argv[1:] if None.
    :return: Exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
    except UsageError as e:
        sys.stderr.write('{}\n{}'.format(e, parser.format_usage()))
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    setup_logging(args.verbose, args.quiet)
    try:
        run = run_config(args)
        run.config = load_config(args.config, run.overrides)
        return run_command(args, run)
    except (UsageError, ConfigError) as e:
        log.error('%s', e)
        return EXIT_USAGE
    except (DataError, ModelError, CheckpointError, OSError) as e:
        log.error('%s', e)
        return EXIT_DATA
