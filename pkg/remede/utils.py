# remede/utils.py
import hashlib
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, List

import numpy as np

_LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s %(message)s"


def get_logger(name: str) -> logging.Logger:
    """Library logger with a single stream handler; level from REMEDE_LOG_LEVEL."""
    logger = logging.getLogger(name)
    if not logger.handlers:
        ch = logging.StreamHandler()
        ch.setFormatter(logging.Formatter(_LOG_FORMAT))
        logger.addHandler(ch)
        logger.propagate = False
    logger.setLevel(os.environ.get("REMEDE_LOG_LEVEL", "INFO").upper())
    return logger


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, *keys); same inputs give the same stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))


def derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def mean_std(values: List[float]) -> Dict[str, float]:
    """Mean and sample standard deviation (n-1); a single value has std 0."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return {"mean": float("nan"), "std": float("nan")}
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(np.mean(arr)), "std": std}


def format_mean_std(mean: float, std: float, digits: int = 3) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


class StagedOutputs:
    """
    Writes artifacts into a private staging directory and moves them into place
    only on commit(). On abort() (or an exception inside the with-block) every
    staged file is discarded, so a failed command leaves no partial outputs.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self._stage: Path | None = None
        self._targets: Dict[Path, Path] = {}

    def __enter__(self) -> "StagedOutputs":
        self.root.mkdir(parents=True, exist_ok=True)
        self._stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.root))
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.abort()
        return False

    def path(self, target: Path) -> Path:
        """Staging path for the final artifact `target`."""
        assert self._stage is not None, "use StagedOutputs as a context manager"
        target = Path(target)
        staged = self._stage / f"{len(self._targets)}-{target.name}"
        self._targets[target] = staged
        return staged

    def hashes(self) -> List[Dict[str, str]]:
        return [
            {"path": str(target), "sha256": sha256_file(staged)}
            for target, staged in self._targets.items()
            if staged.exists()
        ]

    def commit(self) -> None:
        for target, staged in self._targets.items():
            if not staged.exists():
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(staged, target)
        self._cleanup()

    def abort(self) -> None:
        self._targets.clear()
        self._cleanup()

    def _cleanup(self) -> None:
        if self._stage is not None:
            shutil.rmtree(self._stage, ignore_errors=True)
            self._stage = None
