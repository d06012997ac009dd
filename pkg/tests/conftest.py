import numpy as np
import pytest

from duet.corpus import fixture_corpus
from duet.models import DuetModel, ModelConfig
from duet.rewards import RewardEnsemble

# small enough for per-test forwards, window geometry still meaningful
TINY = ModelConfig(note_embed=8, beat_embed=4, hidden=16, layers=1, summary=32,
                   window=16, pre=16, delta=16, post=16)


@pytest.fixture(scope="session")
def chorales():
    return fixture_corpus()


@pytest.fixture(scope="session")
def tiny_policy():
    return DuetModel.init("GEN", TINY, rng_seed=100)


@pytest.fixture(scope="session")
def tiny_ensemble():
    """Six untrained reward models in the shipped layout (3x view a, b, c, d)."""
    models = [DuetModel.init("RWD_A", TINY, rng_seed=s) for s in (1, 2, 3)]
    models.append(DuetModel.init("RWD_B", TINY, rng_seed=4))
    models.append(DuetModel.init("RWD_C", TINY, rng_seed=5))
    models.append(DuetModel.init("RWD_D", TINY, rng_seed=6))
    return RewardEnsemble(models)
