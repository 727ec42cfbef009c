import numpy as np
import pytest

from cvqkd.mlc import LikelihoodModel, MultilevelSpec, QuantizerConfig, design_quantizer
from cvqkd.mlc.ldpc import build_ldpc
from cvqkd.rates import ChannelModel, DetectorModel, Modulation

# the 25 km reference operating point
T25, EPS25, ETA25, VEL25, VA25 = 0.302, 0.005, 0.606, 0.041, 18.5
REP25 = 350e3
BETA25 = 0.898


@pytest.fixture(scope="session")
def paper_models():
    return Modulation(VA25), ChannelModel(T25, EPS25), DetectorModel(ETA25, VEL25)


@pytest.fixture(scope="session")
def paper_channel(paper_models):
    mod, ch, det = paper_models
    return LikelihoodModel.from_models(mod, ch, det)


@pytest.fixture(scope="session")
def paper_quantizer(paper_channel):
    """The operating quantizer: practical rates 0/0/0.42/0.95 at 0.031-bit margin."""
    return design_quantizer(paper_channel, level_rates=(0, 0, 0.42, 0.95),
                            margin=0.031)


@pytest.fixture(scope="session")
def desk_quantizer(paper_channel):
    """Desk-scale width: wider margin so n = 10^4 codes decode reliably."""
    return QuantizerConfig(0.3515 * paper_channel.output_std, 4)


@pytest.fixture(scope="session")
def desk_spec():
    return MultilevelSpec((0.0, 0.0, 0.42, 0.95), 10_000)


@pytest.fixture(scope="session")
def desk_codes(desk_spec):
    return {j: build_ldpc(desk_spec.block_length, desk_spec.level_rates[j],
                          20_250_101 + j)
            for j in desk_spec.coded_levels}


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250809)
