"""Closed vocabularies stored as plain text, one token per line."""
from pathlib import Path

from .exceptions import DataError, VocabularyError
from .files import atomic_write_text


class Vocabulary:
    """
    Token <-> id mapping.

    ``offset`` is the id of the first line: 1 for question words and relation
    labels (id 0 is padding or "no relation"), 0 for answers.
    """

    def __init__(self, tokens, offset=1):
        tokens = list(tokens)
        if len(set(tokens)) != len(tokens):
            raise DataError("vocabulary contains duplicate tokens")
        for token in tokens:
            if not token or any(ch.isspace() for ch in token):
                raise DataError(f"vocabulary token {token!r} is empty or contains whitespace")
        self.tokens = tokens
        self.offset = offset
        self._ids = {token: index + offset for index, token in enumerate(tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._ids

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens and self.offset == other.offset

    @property
    def id_limit(self):
        """One past the largest id; the size of an embedding or bias table."""
        return len(self.tokens) + self.offset

    def id(self, token):
        try:
            return self._ids[token]
        except KeyError:
            raise VocabularyError(f"unknown token {token!r}") from None

    def token(self, token_id):
        index = token_id - self.offset
        if not 0 <= index < len(self.tokens):
            raise VocabularyError(f"id {token_id} outside the vocabulary")
        return self.tokens[index]

    def decode(self, ids):
        return [self.token(token_id) for token_id in ids if token_id >= self.offset]

    def save(self, path):
        atomic_write_text(path, ''.join(f"{token}\n" for token in self.tokens))

    @classmethod
    def load(cls, path, offset=1):
        try:
            lines = Path(path).read_text(encoding='utf-8').splitlines()
        except OSError as exc:
            raise DataError(f"cannot read vocabulary {path}: {exc}") from exc
        return cls([line.strip() for line in lines if line.strip()], offset=offset)


def tokenize(text, vocab):
    """Split on whitespace and map every word to its id; unknown words are an error."""
    words = text.split()
    if not words:
        raise VocabularyError("cannot tokenize an empty question")
    return [vocab.id(word) for word in words]
