"""Disk cache for Monte Carlo ensembles, keyed by the full sampling contract."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .evolve import EnsembleConfig, EnsembleResult, exact_ensemble, load_maps, save_maps
from .noise import NoiseModel
from .plme import DriveProfile

ENV_CACHE_DIR = "PLME_CACHE_DIR"


def cache_key(noise: NoiseModel, drive: DriveProfile, cfg: EnsembleConfig) -> str:
    if not drive.is_constant:
        raise ValueError("ensemble caching supports constant drives only")
    payload = {
        "noise": noise.to_dict(),
        "omega": drive.omega,
        "n_traj": cfg.n_traj,
        "dt": cfg.dt,
        "seed": cfg.seed,
        "grid": [float(t) for t in cfg.grid],
        "n_batches": cfg.n_batches,
        "format": 1,
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:20]


class EnsembleCache:
    """Reuses serialized ensembles across runs; safe because trajectory draws
    are a pure function of (noise, drive, grid, seed, stream)."""

    def __init__(self, directory: str | os.PathLike | None = None):
        if directory is None:
            directory = os.environ.get(ENV_CACHE_DIR)
        self.directory = Path(directory) if directory else None

    def get_or_compute(self, noise: NoiseModel, drive: DriveProfile,
                       cfg: EnsembleConfig) -> EnsembleResult:
        if self.directory is None:
            return exact_ensemble(noise, drive, cfg)
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"ensemble_{cache_key(noise, drive, cfg)}.maps"
        if path.exists():
            maps, batches, header = load_maps(path)
            if batches is not None:
                grid = np.asarray(header["t"], dtype=float)
                return EnsembleResult(grid=grid, maps=maps, batch_deviations=batches,
                                      n_traj=header.get("n_traj") or cfg.n_traj,
                                      seed=header.get("seed") if header.get("seed") is not None else cfg.seed)
        result = exact_ensemble(noise, drive, cfg)
        save_maps(path, result.maps, seed=cfg.seed,
                  batch_deviations=result.batch_deviations)
        return result
