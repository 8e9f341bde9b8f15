import numpy as np
import pytest

from faceforge.embedding import EmbeddingNet, FinetuneConfig, OracleConfig, finetune, synthesize_oracle_triplets
from faceforge.generator import FaceGenerator


@pytest.fixture(scope="session")
def generator():
    return FaceGenerator()


@pytest.fixture(scope="session")
def pools(generator):
    return generator.build_aux_pools(np.random.default_rng(123))


@pytest.fixture(scope="session")
def base_net():
    return EmbeddingNet(init_seed=1)


@pytest.fixture(scope="session")
def oracle_cfg():
    return OracleConfig()


@pytest.fixture(scope="session")
def tuned_net(generator, base_net, oracle_cfg):
    # small but real fine-tuning run; enough to beat the base net clearly
    triplets = synthesize_oracle_triplets(generator, oracle_cfg, 300, np.random.default_rng(5))
    return finetune(base_net, triplets, FinetuneConfig(epochs=4, seed=2))
