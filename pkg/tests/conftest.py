import pytest

from mecoffload import dp, model
from mecoffload.channel import make_channel

# Reference parameter set used across the suite:
# c0=40, T=20 ms, T_f=2 ms, D=4e4 nats, f_l^U=0.5 GHz, f_e=1 GHz,
# k=1e-23, W=1 MHz, exponential gain with mean 100.


@pytest.fixture(scope="session")
def ref_task():
    return model.TaskProfile(deadline=0.02, data=4e4, cycles_per_nat=40.0,
                             local_cpu_cap=0.5e9, cpu_coeff=1e-23)


@pytest.fixture(scope="session")
def ref_edge():
    return model.EdgeProfile(cpu=1e9)


@pytest.fixture(scope="session")
def ref_radio():
    return model.RadioProfile(bandwidth=1e6, block=0.002)


@pytest.fixture(scope="session")
def ref_channel():
    return make_channel(100.0)


@pytest.fixture(scope="session")
def ref_cache(ref_channel, ref_radio):
    # tables are immutable; sharing one cache across tests only saves rebuilds
    return dp.TableCache(ref_channel.rule, ref_radio, grid_size=513)
