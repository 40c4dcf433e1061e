"""Static word embedding table used for sub-graph feature similarity.

File format: text, one token per line, the token followed by
whitespace-separated floats. Dimension is inferred from the first line.
"""

import numpy as np

from .kg import label_tokens


class WordEmbeddings:
    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise ValueError("empty embedding table")
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        dims = {v.shape[0] for v in self.vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()

    @classmethod
    def load(cls, path) -> "WordEmbeddings":
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                token, values = parts[0], parts[1:]
                try:
                    vectors[token] = np.array([float(x) for x in values], dtype=np.float64)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad float in embedding row") from exc
        return cls(vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def mean_vector(self, tokens: list[str]) -> np.ndarray | None:
        """Mean of the in-vocabulary token vectors; None if none are in vocabulary."""
        hits = [self.vectors[t] for t in tokens if t in self.vectors]
        if not hits:
            return None
        return np.mean(hits, axis=0)

    def label_vector(self, label: str) -> np.ndarray | None:
        return self.mean_vector(label_tokens(label))


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
