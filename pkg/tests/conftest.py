"""Shared fixtures. Tests import the flat top-level modules from the repo root."""

import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import gradcheck_config  # noqa: E402
from skeleton import load_topology  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def torch_gen():
    return torch.Generator().manual_seed(1234)


@pytest.fixture
def h36m():
    return load_topology("h36m17")


@pytest.fixture
def tiny_config():
    return gradcheck_config()
