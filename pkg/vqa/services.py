"""Training, evaluation, reports, sweeps and ablations, shared by the management commands."""
from dataclasses import asdict, dataclass, field
import json
import logging
import math
import time

from django.db import DatabaseError, transaction
import numpy as np

from .checkpoint import save_checkpoint
from .exceptions import ConfigError, DataError
from .files import atomic_write_text
from .layers import ForwardContext
from .network import QdgfnNetwork, Vocabularies
from .optim import LrSchedule, adamax_step, lr_at
from .synth import ANSWERS, QUESTION_TYPES, parse_question

logger = logging.getLogger(__name__)

ENCODER_PREFIX = 'question.'
SWEEP_PARAMETERS = ('k', 'P')
ANSWER_COUNT = len(ANSWERS)
# (enable_gfm, enable_of) for FULL, FULL-GFM, FULL-OF and FULL-OF-GFM
ABLATION_SWITCHES = ((True, True), (False, True), (True, False), (False, False))


@dataclass
class Accuracy:
    overall: float
    per_type: dict  # question type -> accuracy, None for a type with no examples
    count: int

    @classmethod
    def score(cls, scenes, predictions):
        if len(scenes) != len(predictions):
            raise DataError("one prediction per scene is required")
        correct = np.array([p == s.answer_id for s, p in zip(scenes, predictions)], dtype=bool)
        types = np.array([s.question_type for s in scenes], dtype=np.int64)
        per_type = {}
        for index, name in enumerate(QUESTION_TYPES):
            chosen = types == index
            per_type[name] = float(correct[chosen].mean()) if chosen.any() else None
        overall = float(correct.mean()) if len(scenes) else 0.0
        return cls(overall=overall, per_type=per_type, count=len(scenes))


@dataclass
class EpochSummary:
    epoch: int
    lr: float
    encoder_lr: float
    loss: float
    train_accuracy: float
    val_accuracy: float
    val_per_type: dict

    def record(self):
        return {'record': 'epoch', **asdict(self)}


@dataclass
class RunReport:
    """Per-epoch training curve plus a final summary; only wall_time varies between identical runs."""

    fingerprint: str
    variant: str
    seed: int
    epochs: list = field(default_factory=list)
    split: str = 'val'
    accuracy: Accuracy = None
    train_accuracy: Accuracy = None  # eval mode, on the training split
    wall_time: float = 0.0

    def records(self):
        for epoch in self.epochs:
            yield epoch.record()
        summary = {
            'record': 'summary',
            'fingerprint': self.fingerprint,
            'variant': self.variant,
            'seed': self.seed,
            'split': self.split,
        }
        if self.accuracy is not None:
            summary.update(accuracy=self.accuracy.overall, per_type=self.accuracy.per_type, count=self.accuracy.count)
        if self.train_accuracy is not None:
            summary.update(train_accuracy=self.train_accuracy.overall, train_per_type=self.train_accuracy.per_type)
        yield summary
        yield {'record': 'timing', 'wall_time': self.wall_time}

    def to_jsonl(self):
        return ''.join(json.dumps(record, sort_keys=True) + '\n' for record in self.records())

    def write(self, path):
        atomic_write_text(path, self.to_jsonl())


def evaluate(network, scenes, batch_size=None):
    predictions = network.predict(scenes, batch_size)
    return Accuracy.score(scenes, predictions), predictions


def question_templates(question_vocab, scenes):
    return [parse_question(question_vocab.decode(scene.question_ids)).template for scene in scenes]


def chance_accuracy(predictions, answers, groups):
    """
    Accuracy expected if each prediction were independent of its answer within
    its group: per group, the overlap of the predicted and true answer
    frequencies, weighted by the group's share of the questions.
    """
    predictions, answers, groups = np.asarray(predictions), np.asarray(answers), np.asarray(groups)
    if not len(predictions) or not len(predictions) == len(answers) == len(groups):
        raise DataError("chance needs one prediction, answer and group per question")
    total = 0.0
    for group in np.unique(groups):
        chosen = groups == group
        predicted = np.bincount(predictions[chosen], minlength=ANSWER_COUNT) / chosen.sum()
        actual = np.bincount(answers[chosen], minlength=ANSWER_COUNT) / chosen.sum()
        total += chosen.mean() * float(predicted @ actual)
    return total


def chance_band(chance, count, sigmas=3.0):
    """Binomial interval around a chance accuracy for ``count`` questions."""
    spread = sigmas * math.sqrt(chance * (1.0 - chance) / count)
    return chance - spread, chance + spread


class TrainingService:
    """
    Trains one network on a corpus with the warm-up schedule and Adamax.

    The question encoder steps at the fixed encoder rate, everything else at the
    scheduled rate. Initialisation, shuffling and dropout each draw from their own
    generator derived from the config seed.
    """

    def __init__(self, config, corpus):
        self.config = config.validate()
        self.corpus = corpus
        self.schedule = LrSchedule.from_config(config)
        self.network = QdgfnNetwork(config, Vocabularies.for_corpus(corpus), rng=np.random.default_rng([config.seed, 0]))
        self.shuffle_rng = np.random.default_rng([config.seed, 1])
        self.ctx = ForwardContext(training=True, rng=np.random.default_rng([config.seed, 2]))
        names = self.network.store.names()
        self.encoder_names = [name for name in names if name.startswith(ENCODER_PREFIX)]
        self.other_names = [name for name in names if not name.startswith(ENCODER_PREFIX)]

    def train_epoch(self, epoch):
        config = self.config
        train = self.corpus.split('train')
        if not train:
            raise DataError("the training split is empty")
        lr, encoder_lr = lr_at(self.schedule, epoch)
        order = self.shuffle_rng.permutation(len(train))
        loss_sum = 0.0
        correct = 0
        for start in range(0, len(train), config.batch_size):
            batch = [train[index] for index in order[start:start + config.batch_size]]
            loss, traces = self.network.loss(batch, self.ctx)
            loss.backward()
            adamax_step(self.network.store, encoder_lr, config.beta1, config.beta2, config.eps, names=self.encoder_names)
            adamax_step(self.network.store, lr, config.beta1, config.beta2, config.eps, names=self.other_names)
            loss_sum += loss.item() * len(batch)
            correct += sum(trace.answer_id == scene.answer_id for scene, trace in zip(batch, traces))
        return lr, encoder_lr, loss_sum / len(train), correct / len(train)

    def train(self, on_epoch=None):
        started = time.perf_counter()
        report = RunReport(fingerprint=self.config.fingerprint(), variant=self.config.variant, seed=self.config.seed)
        val = self.corpus.split('val')
        for epoch in range(self.config.epochs):
            lr, encoder_lr, loss, train_accuracy = self.train_epoch(epoch)
            if not np.isfinite(loss):
                logger.error(f"Loss became {loss} in epoch {epoch}")
            accuracy, _ = evaluate(self.network, val)
            summary = EpochSummary(
                epoch=epoch,
                lr=lr,
                encoder_lr=encoder_lr,
                loss=loss,
                train_accuracy=train_accuracy,
                val_accuracy=accuracy.overall,
                val_per_type=accuracy.per_type,
            )
            report.epochs.append(summary)
            report.accuracy = accuracy
            logger.info(
                f"Epoch {epoch}: lr {lr:.2e}, loss {loss:.4f}, train {train_accuracy:.3f}, val {accuracy.overall:.3f}"
            )
            if on_epoch is not None:
                on_epoch(summary)
        report.train_accuracy, _ = evaluate(self.network, self.corpus.split('train'))
        report.wall_time = time.perf_counter() - started
        return report

    def save(self, checkpoint_path):
        save_checkpoint(checkpoint_path, self.network, self.config.epochs)


def record_run(report, corpus_dir, checkpoint_path='', report_path='', sweep_parameter='', sweep_value=None, kind=None):
    """Index a finished run in the ledger; a database failure only logs a warning."""
    from .models import EpochRecord, TrainingRun

    last = report.epochs[-1] if report.epochs else None
    if report.train_accuracy is not None:
        train_accuracy = report.train_accuracy.overall
    else:
        train_accuracy = last.train_accuracy if last else None
    try:
        with transaction.atomic():
            run = TrainingRun.objects.create(
                kind=kind or ('sweep' if sweep_parameter else 'train'),
                fingerprint=report.fingerprint,
                variant=report.variant,
                seed=report.seed,
                corpus_dir=str(corpus_dir),
                checkpoint_path=str(checkpoint_path or ''),
                report_path=str(report_path or ''),
                sweep_parameter=sweep_parameter,
                sweep_value=sweep_value,
                train_accuracy=train_accuracy,
                val_accuracy=last.val_accuracy if last else None,
                wall_time=report.wall_time,
            )
            EpochRecord.objects.bulk_create([
                EpochRecord(
                    run=run,
                    epoch=epoch.epoch,
                    lr=epoch.lr,
                    encoder_lr=epoch.encoder_lr,
                    loss=epoch.loss,
                    train_accuracy=epoch.train_accuracy,
                    val_accuracy=epoch.val_accuracy,
                    per_type_accuracy=epoch.val_per_type,
                )
                for epoch in report.epochs
            ])
        return run
    except DatabaseError as e:
        logger.warning(f"Run ledger unavailable, run not recorded: {e}")
        return None


@dataclass
class SweepRow:
    parameter: str
    value: int
    train_accuracy: float
    val_accuracy: float
    val_per_type: dict
    fingerprint: str

    def record(self):
        return {'record': 'sweep', **asdict(self)}


class SweepService:
    """Trains and evaluates one run per value of k or P, all from the same seed."""

    def __init__(self, config, corpus, parameter, values):
        if parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"can only sweep {' or '.join(SWEEP_PARAMETERS)}, not {parameter!r}")
        if not values:
            raise ConfigError("a sweep needs at least one value")
        self.config = config
        self.corpus = corpus
        self.parameter = parameter
        # validate every value before any training starts
        self.configs = [config.with_overrides(**{parameter: int(value)}) for value in values]

    def run(self, on_row=None):
        rows = []
        for config in self.configs:
            value = getattr(config, self.parameter)
            logger.info(f"Sweep {self.parameter}={value}")
            report = TrainingService(config, self.corpus).train()
            last = report.epochs[-1]
            row = SweepRow(
                parameter=self.parameter,
                value=value,
                train_accuracy=report.train_accuracy.overall,
                val_accuracy=last.val_accuracy,
                val_per_type=last.val_per_type,
                fingerprint=report.fingerprint,
            )
            rows.append((row, report))
            if on_row is not None:
                on_row(row, report)
        return rows


@dataclass
class AblationRow:
    variant: str
    seed: int
    train_accuracy: float
    val_accuracy: float
    val_per_type: dict
    fingerprint: str

    def record(self):
        return {'record': 'ablation', **asdict(self)}


@dataclass
class AblationSummary:
    """Median accuracies per variant over the seeds of an ablation run."""

    rows: list

    def variants(self):
        return list(dict.fromkeys(row.variant for row in self.rows))

    def median(self, variant, field_name='val_accuracy'):
        values = [getattr(row, field_name) for row in self.rows if row.variant == variant]
        if not values:
            raise DataError(f"no runs of variant {variant}")
        return float(np.median(values))

    def failures(self, train_floor, val_floor, min_gap, min_lead=0.0):
        """
        Messages for every unmet acceptance bar; empty when all are met.

        FULL must lead FULL-OF-GFM by ``min_gap`` and every other ablation by ``min_lead``.
        """
        full_val = self.median('FULL')
        found = []
        if self.median('FULL', 'train_accuracy') < train_floor:
            found.append(f"FULL train accuracy {self.median('FULL', 'train_accuracy'):.4f} is below {train_floor}")
        if full_val < val_floor:
            found.append(f"FULL val accuracy {full_val:.4f} is below {val_floor}")
        for variant in self.variants():
            if variant == 'FULL':
                continue
            lead = full_val - self.median(variant)
            required = min_gap if variant == 'FULL-OF-GFM' else min_lead
            if lead < required:
                found.append(f"FULL leads {variant} by {lead:.4f}, less than {required}")
        return found

    def record(self):
        return {
            'record': 'ablation-summary',
            'seeds': sorted({row.seed for row in self.rows}),
            'median_val': {variant: self.median(variant) for variant in self.variants()},
            'median_train': {variant: self.median(variant, 'train_accuracy') for variant in self.variants()},
        }


class AblationService:
    """Trains the four variants once per seed on the same corpus and config."""

    def __init__(self, config, corpus, seeds):
        if not seeds:
            raise ConfigError("an ablation needs at least one seed")
        self.corpus = corpus
        self.configs = [
            config.with_overrides(seed=int(seed), enable_gfm=gfm, enable_of=of)
            for seed in seeds
            for gfm, of in ABLATION_SWITCHES
        ]

    def run(self, on_row=None):
        rows = []
        for config in self.configs:
            logger.info(f"Ablation {config.variant}, seed {config.seed}")
            report = TrainingService(config, self.corpus).train()
            row = AblationRow(
                variant=config.variant,
                seed=config.seed,
                train_accuracy=report.train_accuracy.overall,
                val_accuracy=report.accuracy.overall,
                val_per_type=report.accuracy.per_type,
                fingerprint=report.fingerprint,
            )
            rows.append(row)
            if on_row is not None:
                on_row(row, report)
        return AblationSummary(rows)


def format_table(headers, rows):
    """Left-aligned text table with one space-padded column per header."""
    cells = [[str(h) for h in headers]] + [[format_cell(value) for value in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    return '\n'.join('  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in cells)


def format_cell(value):
    if value is None:
        return '-'
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
