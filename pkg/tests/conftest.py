import pytest

from attnchain.core_chain import ChainConfig


@pytest.fixture
def tight_config() -> ChainConfig:
    return ChainConfig(alpha=0.85, tau=1e-26, max_iters=5000)
