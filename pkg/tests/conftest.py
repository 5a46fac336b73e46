import pytest

from radext.geometry import cap_chart_build


@pytest.fixture(scope="session")
def chart2():
    return cap_chart_build(2)


@pytest.fixture(scope="session")
def chart3():
    return cap_chart_build(3)
