"""Atomic file output: write to a temporary sibling, then rename into place."""
from contextlib import contextmanager
import os
from pathlib import Path
import tempfile


@contextmanager
def atomic_output(path, mode='wb'):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
    encoding = None if 'b' in mode else 'utf-8'
    try:
        with os.fdopen(handle, mode, encoding=encoding) as stream:
            yield stream
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.remove(temp_name)
        raise


def atomic_write_text(path, text):
    with atomic_output(path, 'w') as stream:
        stream.write(text)
