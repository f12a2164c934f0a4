from __future__ import annotations

import os
from dataclasses import dataclass

from dotenv import load_dotenv

from src.core.matrixcore import Tolerance
from src.services.perturbation import MAX_WITNESS_EPSILON, RngConfig

load_dotenv()

OUTPUT_FORMATS = ("text", "json")


@dataclass(frozen=True)
class Settings:
    rank_tol: float
    eig_tol: float
    seed: int
    trials: int
    epsilon: float
    condition_bound: float
    log_level: str
    output_format: str

    def tolerance(self) -> Tolerance:
        return Tolerance(rank_tol=self.rank_tol, eig_tol=self.eig_tol)

    def rng(self) -> RngConfig:
        return RngConfig(seed=self.seed, condition_bound=self.condition_bound)


def _get_env(name: str, default: str = "") -> str:
    return os.getenv(name, default).strip()


def validate_settings(settings: Settings) -> Settings:
    """Range checks shared by the environment loader and CLI overrides."""
    if not 0 < settings.rank_tol < 1:
        raise ValueError("CONGRUA_TOL_RANK must be in (0, 1)")
    if not 0 < settings.eig_tol < 1:
        raise ValueError("CONGRUA_TOL_EIG must be in (0, 1)")
    if settings.seed < 0:
        raise ValueError("CONGRUA_SEED must be >= 0")
    if settings.trials < 1:
        raise ValueError("CONGRUA_TRIALS must be >= 1")
    if not 0 < settings.epsilon <= MAX_WITNESS_EPSILON:
        raise ValueError(f"CONGRUA_EPSILON must be in (0, {MAX_WITNESS_EPSILON}]")
    if settings.condition_bound < 1:
        raise ValueError("CONGRUA_CONDITION_BOUND must be >= 1")
    if settings.output_format not in OUTPUT_FORMATS:
        raise ValueError("CONGRUA_OUTPUT_FORMAT must be 'text' or 'json'")
    return settings


def load_settings() -> Settings:
    rank_tol_raw = _get_env("CONGRUA_TOL_RANK", "1e-8")
    eig_tol_raw = _get_env("CONGRUA_TOL_EIG", "1e-6")
    seed_raw = _get_env("CONGRUA_SEED", "42")
    trials_raw = _get_env("CONGRUA_TRIALS", "1000")
    epsilon_raw = _get_env("CONGRUA_EPSILON", "1e-3")
    condition_bound_raw = _get_env("CONGRUA_CONDITION_BOUND", "10")

    try:
        rank_tol = float(rank_tol_raw)
        eig_tol = float(eig_tol_raw)
        seed = int(seed_raw)
        trials = int(trials_raw)
        epsilon = float(epsilon_raw)
        condition_bound = float(condition_bound_raw)
    except ValueError as error:
        raise ValueError(
            "CONGRUA_TOL_RANK, CONGRUA_TOL_EIG, CONGRUA_EPSILON and CONGRUA_CONDITION_BOUND "
            "must be numbers, and CONGRUA_SEED and CONGRUA_TRIALS must be integers"
        ) from error

    return validate_settings(
        Settings(
            rank_tol=rank_tol,
            eig_tol=eig_tol,
            seed=seed,
            trials=trials,
            epsilon=epsilon,
            condition_bound=condition_bound,
            log_level=_get_env("CONGRUA_LOG_LEVEL", "WARNING").upper(),
            output_format=_get_env("CONGRUA_OUTPUT_FORMAT", "text").lower(),
        )
    )
