import pytest

from wavediv.oracles import parse_distribution
from wavediv.wavelets import FAMILIES, build_scaling_table, get_filter


@pytest.fixture(scope="session")
def tables():
    return {name: build_scaling_table(get_filter(name), 12) for name in FAMILIES}


@pytest.fixture(scope="session")
def d4(tables):
    return tables["daubechies-4"]


@pytest.fixture(scope="session")
def haar(tables):
    return tables["haar"]


@pytest.fixture(scope="session")
def beta_pair():
    return parse_distribution("beta(2,5)"), parse_distribution("beta(3,3)")
