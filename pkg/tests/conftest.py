import json
from pathlib import Path

import pytest

from accwave import cli

RESULTS = Path(__file__).resolve().parent.parent / "results" / "acceptance"
CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TRAIN_SEEDS = (0, 1, 2)


def train_once(config_name: str, seed: int) -> dict:
    """Run (or reuse) one training job; returns its result record."""
    out = RESULTS / f"{config_name}_seed{seed}"
    result_file = out / "train_result.json"
    if result_file.is_file() and (out / "checkpoint.npz").is_file():
        return json.loads(result_file.read_text())
    out.mkdir(parents=True, exist_ok=True)
    cli.main(["train", "--config", str(CONFIGS / f"{config_name}.yaml"),
              "--out", str(out), "--seed", str(seed)])
    return json.loads(result_file.read_text())


def train_until_two_converge(config_name: str) -> dict:
    """Train seeds in order until two converge (or all three are spent)."""
    results = {}
    converged = 0
    for seed in TRAIN_SEEDS:
        results[seed] = train_once(config_name, seed)
        if results[seed]["converged"]:
            converged += 1
        if converged >= 2:
            break
    return results


@pytest.fixture(scope="session")
def delay_free_training():
    return train_until_two_converge("train_delay_free")


@pytest.fixture(scope="session")
def delay4_training():
    return train_until_two_converge("train_delay4")


@pytest.fixture(scope="session")
def delay4_checkpoint(delay4_training):
    for seed, rec in delay4_training.items():
        if rec["converged"]:
            return RESULTS / f"train_delay4_seed{seed}" / "checkpoint.npz"
    pytest.fail("no converged 4 s-delay training run available")
