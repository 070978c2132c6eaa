from importlib.resources import files

import pytest

from jetbc.modelio import load_model

MODELS = files("jetbc") / "models"


def model_path(name):
    return str(MODELS / f"{name}.vb")


def load(name):
    return load_model(model_path(name))


@pytest.fixture(scope="session")
def models():
    return {n: load(n) for n in ("timoshenko", "euler_bernoulli", "kirchhoff", "kirchhoff_ph", "beam_ph")}
