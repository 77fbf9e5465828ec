"""
Checkpoints: parameters and Adamax state in an ``.npz`` archive with a JSON metadata entry.

Archive members are written in sorted order with a fixed timestamp so that equal
models produce equal bytes.
"""
import json
import logging
from pathlib import Path
import zipfile

import numpy as np

from .config import ModelConfig
from .exceptions import CheckpointError, ConfigError
from .files import atomic_output
from .network import QdgfnNetwork, Vocabularies

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
META_KEY = 'meta'
ARCHIVE_TIME = (1980, 1, 1, 0, 0, 0)


def checkpoint_arrays(network, epochs_trained):
    meta = {
        'version': CHECKPOINT_VERSION,
        'fingerprint': network.config.fingerprint(),
        'config': network.config.to_dict(),
        'sizes': network.sizes.to_dict(),
        'epochs_trained': epochs_trained,
    }
    arrays = {META_KEY: np.array(json.dumps(meta, sort_keys=True))}
    for name, tensor in network.store.items():
        state = network.store.state(name)
        arrays[f"param/{name}"] = tensor.data
        arrays[f"adamax.m/{name}"] = state.m
        arrays[f"adamax.u/{name}"] = state.u
        arrays[f"adamax.step/{name}"] = np.array(state.step, dtype=np.int64)
    return arrays


def save_checkpoint(path, network, epochs_trained):
    arrays = checkpoint_arrays(network, epochs_trained)
    with atomic_output(path, 'wb') as stream:
        with zipfile.ZipFile(stream, 'w', compression=zipfile.ZIP_STORED) as archive:
            for key in sorted(arrays):
                info = zipfile.ZipInfo(f"{key}.npy", date_time=ARCHIVE_TIME)
                with archive.open(info, 'w', force_zip64=True) as member:
                    np.lib.format.write_array(member, np.asarray(arrays[key]), allow_pickle=False)
    logger.info(f"Saved checkpoint {path} ({len(network.store)} parameters, {epochs_trained} epochs)")


def read_meta(archive):
    try:
        meta = json.loads(str(archive[META_KEY]))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint metadata is missing or unreadable: {exc}") from exc
    if meta.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {meta.get('version')} is not {CHECKPOINT_VERSION}")
    return meta


def load_checkpoint(path, expected_fingerprint=None, sizes=None):
    """
    Rebuild the network stored at ``path``; return (network, meta).

    A fingerprint or vocabulary sizes that differ from the expected ones are a
    CheckpointError.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with archive:
        meta = read_meta(archive)
        try:
            config = ModelConfig.from_dict(meta['config'])
        except ConfigError as exc:
            raise CheckpointError(f"checkpoint config is invalid: {exc}") from exc
        if config.fingerprint() != meta['fingerprint']:
            raise CheckpointError("checkpoint config does not hash to its recorded fingerprint")
        if expected_fingerprint is not None and expected_fingerprint != meta['fingerprint']:
            raise CheckpointError(
                f"checkpoint fingerprint {meta['fingerprint'][:12]} does not match config {expected_fingerprint[:12]}"
            )
        stored_sizes = Vocabularies(**meta['sizes'])
        if sizes is not None and sizes != stored_sizes:
            raise CheckpointError(f"checkpoint was trained on vocabularies {stored_sizes}, corpus has {sizes}")

        network = QdgfnNetwork(config, stored_sizes)
        expected = {f"param/{name}" for name in network.store.names()}
        stored = {key for key in archive.files if key.startswith('param/')}
        if expected != stored:
            missing = sorted(expected - stored)[:3]
            extra = sorted(stored - expected)[:3]
            raise CheckpointError(f"checkpoint parameters do not match the network (missing {missing}, extra {extra})")
        for name in network.store.names():
            try:
                network.store.load(
                    name,
                    archive[f"param/{name}"],
                    m=archive[f"adamax.m/{name}"],
                    u=archive[f"adamax.u/{name}"],
                    step=int(archive[f"adamax.step/{name}"]),
                )
            except KeyError as exc:
                raise CheckpointError(f"checkpoint lacks optimizer state for {name!r}") from exc
    logger.info(f"Loaded checkpoint {path} ({config.variant}, {meta['epochs_trained']} epochs)")
    return network, meta
