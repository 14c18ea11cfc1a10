"""Appearance embeddings: EMA bank and cosine distances"""

from collections import deque
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from loguru import logger

from src.errors import InputError, NumericalError, PreconditionError

NORM_EPS = 1e-12


def normalize(values: np.ndarray) -> np.ndarray:
    """Return values / ||values||_2"""
    values = np.asarray(values, dtype=float)
    norm = np.linalg.norm(values)
    if norm < NORM_EPS:
        raise NumericalError("cannot normalize a zero embedding")
    return values / norm


class EmaBank:
    """Bounded buffer of EMA appearance states of one track

    momentum 0 stores raw features (DeepSORT), capacity 1 keeps a single
    running EMA (JDE/FairMOT).
    """

    def __init__(self, capacity: int = 100, momentum: float = 0.9):
        if capacity < 1:
            raise InputError(f"bank capacity must be >= 1, got {capacity}")
        if not 0.0 <= momentum <= 1.0:
            raise InputError(f"momentum must lie in [0, 1], got {momentum}")
        self.capacity = capacity
        self.momentum = momentum
        self.entries: deque[np.ndarray] = deque(maxlen=capacity)

    @property
    def dim(self) -> Optional[int]:
        return len(self.entries[0]) if self.entries else None

    def matrix(self) -> np.ndarray:
        return np.vstack(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


class EmbeddingStore:
    """Embeddings keyed by (frame, det_idx)"""

    def __init__(
        self,
        vectors: Optional[dict[tuple[int, int], np.ndarray]] = None,
        dim: Optional[int] = None,
    ):
        self.vectors = vectors or {}
        self.dim = dim

    def get(self, frame: int, det_idx: Optional[int]) -> Optional[np.ndarray]:
        if det_idx is None:
            return None
        return self.vectors.get((frame, det_idx))

    def __len__(self) -> int:
        return len(self.vectors)

    def __bool__(self) -> bool:
        return bool(self.vectors)


class AppearanceService:
    """EMA updates, bank maintenance and cosine distances"""

    @staticmethod
    def ema_update(prev: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
        """
        Blend the previous state with a new embedding and re-normalize

        Args:
            prev: Previous EMA state (normalized)
            f: New detection embedding (normalized)
            alpha: Momentum in [0, 1]

        Returns:
            Normalized alpha * prev + (1 - alpha) * f

        Raises:
            NumericalError: If the blend is the zero vector
        """
        if alpha == 1.0:
            return np.array(prev, dtype=float)
        if alpha == 0.0:
            return np.array(f, dtype=float)
        return normalize(alpha * np.asarray(prev) + (1.0 - alpha) * np.asarray(f))

    @staticmethod
    def bank_push(bank: EmaBank, f: np.ndarray) -> EmaBank:
        """
        Append the EMA of the newest entry and f; the oldest entry is evicted
        past capacity

        Args:
            bank: Track bank, mutated in place
            f: New detection embedding

        Returns:
            The same bank
        """
        f = np.asarray(f, dtype=float)
        if bank.dim is not None and len(f) != bank.dim:
            raise InputError(
                f"embedding dimension {len(f)} does not match bank dimension {bank.dim}"
            )
        if not bank.entries:
            # first embedding seeds the EMA
            bank.entries.append(f.copy())
            return bank
        bank.entries.append(
            AppearanceService.ema_update(bank.entries[-1], f, bank.momentum)
        )
        return bank

    @staticmethod
    def min_cosine_distance(bank: EmaBank, f: np.ndarray) -> float:
        """
        Smallest cosine distance between f and any bank entry

        Raises:
            PreconditionError: If the bank is empty
        """
        if not bank.entries:
            raise PreconditionError("cosine distance against an empty bank")
        return float(np.min(1.0 - bank.matrix() @ np.asarray(f)))

    @staticmethod
    def cosine_cost_matrix(banks: list[EmaBank], features: np.ndarray) -> np.ndarray:
        """
        (tracks x detections) min cosine distances

        Raises:
            InputError: On dimension mismatch between features and banks
        """
        cost = np.zeros((len(banks), len(features)))
        if len(features) == 0:
            return cost
        for row, bank in enumerate(banks):
            if not bank.entries:
                raise PreconditionError("cosine distance against an empty bank")
            if bank.dim != features.shape[1]:
                raise InputError(
                    f"embedding dimension {features.shape[1]} does not match bank "
                    f"dimension {bank.dim}"
                )
            cost[row] = np.min(1.0 - bank.matrix() @ features.T, axis=0)
        return cost

    @staticmethod
    def load_store(path: Optional[Path]) -> EmbeddingStore:
        """
        Load an embedding sidecar: `dim=D` then `frame,det_idx,v0,...,v{D-1}`

        Args:
            path: Sidecar path; None or a missing file gives an empty store

        Returns:
            EmbeddingStore with normalized vectors

        Raises:
            InputError: On a malformed line (with its line number)
        """
        if path is None:
            return EmbeddingStore()
        path = Path(path)
        if not path.exists():
            logger.warning(f"Embedding sidecar {path} not found; motion-only association")
            return EmbeddingStore()
        with open(path, "r", encoding="utf-8") as f:
            return AppearanceService.parse_store(f, path)

    @staticmethod
    def parse_store(lines: Iterable[str], path: Optional[Path] = None) -> EmbeddingStore:
        vectors: dict[tuple[int, int], np.ndarray] = {}
        dim: Optional[int] = None
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            if dim is None:
                key, _, value = line.partition("=")
                if key.strip() != "dim":
                    raise InputError("expected header 'dim=D'", path, lineno)
                try:
                    dim = int(value)
                except ValueError as e:
                    raise InputError(f"invalid dimension {value!r}", path, lineno) from e
                if dim < 1:
                    raise InputError(f"invalid dimension {dim}", path, lineno)
                continue
            fields = line.split(",")
            if len(fields) != dim + 2:
                raise InputError(
                    f"expected {dim + 2} fields, got {len(fields)}", path, lineno
                )
            try:
                key = (int(fields[0]), int(fields[1]))
                values = np.array([float(v) for v in fields[2:]])
            except ValueError as e:
                raise InputError(f"malformed number: {e}", path, lineno) from e
            if key in vectors:
                raise InputError(f"duplicate embedding key {key}", path, lineno)
            norm = np.linalg.norm(values)
            if norm < NORM_EPS:
                raise InputError("zero embedding vector", path, lineno)
            # already-unit vectors are kept bit-exact
            vectors[key] = values if abs(norm - 1.0) <= 1e-9 else values / norm
        return EmbeddingStore(vectors, dim)
