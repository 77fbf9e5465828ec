from pathlib import Path
import json

from vqa.corpus import CorpusManifest, generate_corpus
from vqa.gradcheck import small_config


def tiny_manifest(**overrides):
    values = dict(train_size=8, train_seed=7, val_size=4, val_seed=8, m_max=5, d_in=4)
    values.update(overrides)
    return CorpusManifest(**values)


def tiny_corpus(out_dir, **overrides):
    return generate_corpus(tiny_manifest(**overrides), out_dir)


def training_config(**overrides):
    values = dict(epochs=2, batch_size=4, warmup_epochs=0, decay_start_epoch=0, decay_every=1, max_question_length=16)
    values.update(overrides)
    return small_config(**values)


def write_ini(path, **values):
    lines = ['[settings]'] + [f"{key} = {value}" for key, value in values.items()]
    Path(path).write_text('\n'.join(lines) + '\n')
    return path


def write_manifest(path, **overrides):
    manifest = tiny_manifest(**overrides)
    Path(path).write_text(manifest.to_json())
    return path


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
