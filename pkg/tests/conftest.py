from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", deadline=None, derandomize=True)
settings.load_profile("ci")

MODELS = Path(__file__).resolve().parents[1] / "models"


@pytest.fixture(scope="session")
def scalar_model():
    from sddde import load_model

    return load_model(MODELS / "scalar_nested.mdl")


@pytest.fixture(scope="session")
def poscontrol_model():
    from sddde import load_model

    return load_model(MODELS / "position_control.mdl")


@pytest.fixture(scope="session")
def poscontrol_ref():
    """Reference parameter assignment used throughout."""
    return {"tau0": 1.0, "s0": 4.0, "k": 1.0, "c": 2.0, "gamma": 1.0}


@pytest.fixture(autouse=True)
def _quiet_root_warnings():
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="requested .* roots")
        yield


def model_path(name):
    return MODELS / name


@pytest.fixture(scope="session")
def pi_half():
    return float(np.pi / 2)
