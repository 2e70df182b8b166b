import numpy as np
import pytest

from rssinav import model, rfsim
from rssinav.cli import run_training_pipeline


@pytest.fixture(scope="session")
def ref_world():
    return rfsim.reference_world(noise_sigma=2.0, rng_seed=7)


@pytest.fixture(scope="session")
def ref_dataset(ref_world):
    return rfsim.generate_synthetic_dataset(ref_world, resamples=3)


@pytest.fixture(scope="session")
def trained(ref_dataset):
    """Reference training run: (bundle, report, split); ~1 s, shared."""
    bundle, report, split_data = run_training_pipeline(ref_dataset, train_config=model.TrainConfig(seed=0))
    return bundle, report, split_data
