import numpy as np
import pytest

from channels import DistortionMatrix, Pmf
from codec import CodecParams, build_stacked_codebook


@pytest.fixture
def bern_half():
    return Pmf.uniform(2)


@pytest.fixture
def hamming2():
    return DistortionMatrix.hamming(2)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_params(bern_half, hamming2):
    return CodecParams(N=4, R=0.25, L=2, epsilon=0.05, D1=0.5, d=hamming2, p_S=bern_half, seed=0)


@pytest.fixture
def small_codebook(small_params):
    return build_stacked_codebook(small_params)


@pytest.fixture(autouse=True)
def no_ledger(monkeypatch):
    import database
    monkeypatch.setattr(database, 'DATABASE_URL', None)
