"""ModelConfig: every dimension and hyperparameter of a run, with presets and INI overlays."""
from configparser import Error as IniError
from dataclasses import asdict, dataclass, fields, replace
import hashlib
import json
import logging
from pathlib import Path

from decouple import RepositoryIni
from django.conf import settings

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

GRAPH_COUNT = 3


def _as_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class ModelConfig:
    d: int
    heads: int
    graphs: int
    layers: int
    k: int
    P: int
    max_question_length: int
    hidden_multiplier: int
    dropout: float
    classifier_dropout: float
    enable_gfm: bool
    enable_of: bool
    kept_row_renorm: bool
    scale_filter_scores: bool
    seed: int
    batch_size: int
    epochs: int
    warmup_start: float
    warmup_end: float
    warmup_epochs: int
    decay_start_epoch: int
    decay_factor: float
    decay_every: int
    fixed_encoder_lr: float
    beta1: float
    beta2: float
    eps: float

    def validate(self):
        """Raise ConfigError on the first violated invariant; return self otherwise."""
        if self.d < 1 or self.heads < 1 or self.d % self.heads:
            raise ConfigError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if self.graphs != GRAPH_COUNT:
            raise ConfigError(f"exactly {GRAPH_COUNT} relation graphs are supported, got {self.graphs}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.P < 1:
            raise ConfigError(f"P must be >= 1, got {self.P}")
        if self.layers < 1 or self.max_question_length < 1 or self.hidden_multiplier < 1:
            raise ConfigError("layers, max_question_length and hidden_multiplier must be >= 1")
        for name in ('dropout', 'classifier_dropout'):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {value}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.eps > 0.0):
            raise ConfigError("Adamax needs 0 <= beta1, beta2 < 1 and eps > 0")
        # the schedule validates its own fields
        from .optim import LrSchedule
        LrSchedule.from_config(self)
        return self

    @property
    def head_dim(self):
        return self.d // self.heads

    @property
    def hidden(self):
        return self.d * self.hidden_multiplier

    @property
    def variant(self):
        """Ablation variant name: FULL, FULL-GFM, FULL-OF or FULL-OF-GFM."""
        name = 'FULL'
        if not self.enable_of:
            name += '-OF'
        if not self.enable_gfm:
            name += '-GFM'
        return name

    def fingerprint(self):
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **overrides):
        return replace(self, **overrides).validate()

    @classmethod
    def from_dict(cls, values):
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = sorted(set(known) - set(values))
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        return cls(**{name: _coerce(name, known[name], values[name]) for name in known}).validate()

    @classmethod
    def from_preset(cls, name=None):
        name = name or settings.QDGFN_DEFAULT_PRESET
        presets = settings.QDGFN_PRESETS
        if name not in presets:
            raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(presets))}")
        return cls.from_dict(dict(presets[name]))

    @classmethod
    def load(cls, path=None, preset=None, **overrides):
        """Preset, then the INI file's [settings] section, then explicit overrides."""
        values = dict(settings.QDGFN_PRESETS.get(preset or settings.QDGFN_DEFAULT_PRESET, {}))
        if not values:
            raise ConfigError(f"unknown preset {preset!r}")
        if path is not None:
            values.update(read_config_file(path))
        values.update({key: value for key, value in overrides.items() if value is not None})
        config = cls.from_dict(values)
        logger.info(f"Loaded {config.variant} config {config.fingerprint()[:12]} (preset {preset or settings.QDGFN_DEFAULT_PRESET})")
        return config


_CASTS = {'int': int, 'float': float, 'bool': _as_bool}


def _coerce(name, annotation, value):
    cast = _CASTS[annotation if isinstance(annotation, str) else annotation.__name__]
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field {name!r}: cannot read {value!r} as {cast.__name__}") from exc


def read_config_file(path):
    """Read the [settings] section of an INI config file into a plain dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        repository = RepositoryIni(str(path))
    except IniError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    section = RepositoryIni.SECTION
    if not repository.parser.has_section(section):
        raise ConfigError(f"config file {path} has no [{section}] section")
    keys = repository.parser.options(section)
    by_lower = {f.name.lower(): f.name for f in fields(ModelConfig)}
    unknown = sorted(key for key in keys if key not in by_lower)
    if unknown:
        raise ConfigError(f"unknown config fields in {path}: {', '.join(unknown)}")
    # read the section itself; decouple.Config would let os.environ shadow it
    return {by_lower[key]: repository[key] for key in keys}
