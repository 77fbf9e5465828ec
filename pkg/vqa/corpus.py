"""
Corpus files: the JSON manifest, the length-prefixed binary split files and the
four vocabulary files that sit next to them.

Split file layout (little-endian): magic ``QDGC``, u16 version, u16 d_in, u32
record count, then per record a u32 payload length followed by the payload:

    u16 m | f32 features[m*d_in] | f32 boxes[m*4] | u16 semantic[m*m]
    u8 types[m] | u8 colors[m] | u8 n | u16 tokens[n] | u16 answer
    u8 question_type | u64 scene seed
"""
from dataclasses import asdict, dataclass, field
import json
import logging
from pathlib import Path
import struct

import numpy as np

from .exceptions import ConfigError, CorpusFormatError, DataError
from .files import atomic_output, atomic_write_text
from .synth import (
    GENERATOR_VERSION, QUESTION_TYPES, SceneGenerator, SceneInstance, answer_vocabulary, generate_split,
    question_vocabulary, semantic_label_vocabulary, spatial_label_vocabulary,
)
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b'QDGC'
CORPUS_VERSION = 1
HEADER = struct.Struct('<4sHHI')
LENGTH = struct.Struct('<I')
SPLITS = ('train', 'val')

MANIFEST_FILE = 'manifest.json'
VOCAB_FILES = {
    'question_vocab': 'question_vocab.txt',
    'answer_vocab': 'answer_vocab.txt',
    'semantic_labels': 'semantic_labels.txt',
    'spatial_labels': 'spatial_labels.txt',
}


@dataclass
class CorpusManifest:
    train_size: int
    train_seed: int
    val_size: int
    val_seed: int
    m_max: int = 10
    d_in: int = 32
    feature_seed: int = 0
    prior_shift: bool = False
    generator_version: int = GENERATOR_VERSION
    vocab_files: dict = field(default_factory=lambda: dict(VOCAB_FILES))

    def validate(self):
        for split in SPLITS:
            if getattr(self, f"{split}_size") < 0:
                raise ConfigError(f"{split}_size must be >= 0")
        if self.train_seed == self.val_seed:
            raise ConfigError("train and val seeds must differ")
        if not 2 <= self.m_max <= 255:
            raise ConfigError(f"m_max must be in [2, 255], got {self.m_max}")
        if not 1 <= self.d_in <= 0xFFFF:
            raise ConfigError(f"d_in must be in [1, 65535], got {self.d_in}")
        if self.generator_version != GENERATOR_VERSION:
            raise ConfigError(
                f"manifest targets generator version {self.generator_version}; this build has {GENERATOR_VERSION}"
            )
        if set(self.vocab_files) != set(VOCAB_FILES):
            raise ConfigError(f"vocab_files must name exactly {', '.join(sorted(VOCAB_FILES))}")
        return self

    def split(self, name):
        """(size, seed) of a split."""
        if name not in SPLITS:
            raise DataError(f"unknown split {name!r}; choose from {', '.join(SPLITS)}")
        return getattr(self, f"{name}_size"), getattr(self, f"{name}_seed")

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + '\n'

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            values = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"manifest {path} must hold a JSON object")
        try:
            return cls(**values).validate()
        except TypeError as exc:
            raise ConfigError(f"manifest {path}: {exc}") from exc


def encode_record(scene, d_in):
    count = scene.count
    if scene.features.shape != (count, d_in):
        raise DataError(f"scene features {scene.features.shape} do not match d_in={d_in}")
    if not 2 <= count <= 0xFFFF:
        raise DataError(f"object count {count} does not fit the record format")
    if len(scene.question_ids) > 0xFF:
        raise DataError("questions longer than 255 tokens do not fit the record format")
    parts = [
        struct.pack('<H', count),
        np.asarray(scene.features, dtype='<f4').tobytes(),
        np.asarray(scene.boxes, dtype='<f4').tobytes(),
        np.asarray(scene.semantic_labels, dtype='<u2').tobytes(),
        np.asarray(scene.types, dtype='u1').tobytes(),
        np.asarray(scene.colors, dtype='u1').tobytes(),
        struct.pack('<B', len(scene.question_ids)),
        np.asarray(scene.question_ids, dtype='<u2').tobytes(),
        struct.pack('<HBQ', scene.answer_id, scene.question_type, scene.seed),
    ]
    payload = b''.join(parts)
    return LENGTH.pack(len(payload)) + payload


class _Reader:
    """Cursor over one record's payload; every short read is a CorpusFormatError."""

    def __init__(self, data, start, end):
        self.data = data
        self.position = start
        self.end = end

    def take(self, size):
        if self.position + size > self.end:
            raise CorpusFormatError("record is truncated", self.position)
        chunk = self.data[self.position:self.position + size]
        self.position += size
        return chunk

    def array(self, dtype, count, shape):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).reshape(shape).copy()

    def unpack(self, fmt):
        layout = struct.Struct(fmt)
        return layout.unpack(self.take(layout.size))


def decode_record(data, offset, d_in):
    """Decode the record at ``offset``; return (SceneInstance, offset of the next record)."""
    if offset + LENGTH.size > len(data):
        raise CorpusFormatError("missing record length", offset)
    (length,) = LENGTH.unpack_from(data, offset)
    start = offset + LENGTH.size
    end = start + length
    if end > len(data):
        raise CorpusFormatError(f"record length {length} runs past the end of the file", offset)
    reader = _Reader(data, start, end)
    (count,) = reader.unpack('<H')
    if count < 2:
        raise CorpusFormatError(f"record holds {count} objects; scenes need at least two", start)
    features = reader.array('<f4', count * d_in, (count, d_in)).astype(np.float32)
    boxes = reader.array('<f4', count * 4, (count, 4)).astype(np.float32)
    semantic = reader.array('<u2', count * count, (count, count)).astype(np.uint16)
    types = reader.array('u1', count, (count,))
    colors = reader.array('u1', count, (count,))
    (token_count,) = reader.unpack('<B')
    tokens = reader.array('<u2', token_count, (token_count,))
    answer_id, question_type, seed = reader.unpack('<HBQ')
    if reader.position != end:
        raise CorpusFormatError(f"{end - reader.position} unread bytes at the end of the record", reader.position)
    if question_type >= len(QUESTION_TYPES):
        raise CorpusFormatError(f"unknown question type {question_type}", end - 9)
    scene = SceneInstance(
        features=features,
        boxes=boxes,
        semantic_labels=semantic,
        types=types,
        colors=colors,
        question_ids=[int(token) for token in tokens],
        answer_id=int(answer_id),
        question_type=int(question_type),
        seed=int(seed),
    )
    return scene, end


def write_corpus(scenes, path, d_in):
    """Write one split file atomically."""
    with atomic_output(path, 'wb') as stream:
        stream.write(HEADER.pack(MAGIC, CORPUS_VERSION, d_in, len(scenes)))
        for scene in scenes:
            stream.write(encode_record(scene, d_in))


def read_corpus(path):
    """Read one split file; return (d_in, scenes)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    if len(data) < HEADER.size:
        raise CorpusFormatError(f"{path} is shorter than the corpus header", 0)
    magic, version, d_in, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorpusFormatError(f"{path} is not a corpus file", 0)
    if version != CORPUS_VERSION:
        raise CorpusFormatError(f"corpus version {version} does not match {CORPUS_VERSION}", 4)
    offset = HEADER.size
    scenes = []
    for _ in range(count):
        scene, offset = decode_record(data, offset, d_in)
        scenes.append(scene)
    if offset != len(data):
        raise CorpusFormatError(f"{len(data) - offset} trailing bytes after {count} records", offset)
    return d_in, scenes


@dataclass
class Corpus:
    manifest: CorpusManifest
    question_vocab: Vocabulary
    answer_vocab: Vocabulary
    semantic_labels: Vocabulary
    spatial_labels: Vocabulary
    splits: dict

    def split(self, name):
        self.manifest.split(name)
        return self.splits[name]


def generate_corpus(manifest, out_dir):
    """Generate every split and vocabulary file described by ``manifest`` into ``out_dir``."""
    manifest.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    generator = SceneGenerator(
        m_max=manifest.m_max, d_in=manifest.d_in, feature_seed=manifest.feature_seed, prior_shift=manifest.prior_shift,
    )
    splits = {}
    for name in SPLITS:
        size, seed = manifest.split(name)
        splits[name] = generate_split(generator, name, size, seed)
    check_disjoint(splits)
    for name, scenes in splits.items():
        write_corpus(scenes, out_dir / f"{name}.bin", manifest.d_in)

    vocabularies = {
        'question_vocab': question_vocabulary(),
        'answer_vocab': answer_vocabulary(),
        'semantic_labels': semantic_label_vocabulary(),
        'spatial_labels': spatial_label_vocabulary(),
    }
    for key, vocab in vocabularies.items():
        vocab.save(out_dir / manifest.vocab_files[key])
    atomic_write_text(out_dir / MANIFEST_FILE, manifest.to_json())
    logger.info(f"Wrote corpus to {out_dir}: " + ', '.join(f"{len(s)} {n}" for n, s in splits.items()))
    return Corpus(manifest=manifest, splits=splits, **vocabularies)


def check_disjoint(splits):
    seen = {}
    for name, scenes in splits.items():
        for scene in scenes:
            other = seen.setdefault(scene.seed, name)
            if other != name:
                raise DataError(f"scene seed {scene.seed} appears in both {other} and {name}")


def load_corpus(corpus_dir):
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / MANIFEST_FILE
    if not manifest_path.is_file():
        raise DataError(f"no {MANIFEST_FILE} in {corpus_dir}")
    manifest = CorpusManifest.load(manifest_path)
    files = manifest.vocab_files
    splits = {}
    for name in SPLITS:
        d_in, scenes = read_corpus(corpus_dir / f"{name}.bin")
        if d_in != manifest.d_in:
            raise CorpusFormatError(f"{name}.bin has d_in={d_in}, manifest says {manifest.d_in}", 6)
        splits[name] = scenes
    corpus = Corpus(
        manifest=manifest,
        question_vocab=Vocabulary.load(corpus_dir / files['question_vocab'], offset=1),
        answer_vocab=Vocabulary.load(corpus_dir / files['answer_vocab'], offset=0),
        semantic_labels=Vocabulary.load(corpus_dir / files['semantic_labels'], offset=1),
        spatial_labels=Vocabulary.load(corpus_dir / files['spatial_labels'], offset=1),
        splits=splits,
    )
    logger.info(f"Loaded corpus {corpus_dir}: " + ', '.join(f"{len(s)} {n}" for n, s in splits.items()))
    return corpus
