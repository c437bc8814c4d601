import os
from typing import Iterator

import pytest

from rail.restless import library
from rail.restless.chain_core import RestlessInstance
from rail.restless.instance_factory import builtin_instance


@pytest.fixture(autouse=True)
def clear_library() -> Iterator[None]:
    library.clear()
    yield
    library.clear()


@pytest.fixture(name="paper_1")
def paper_1_fixture() -> RestlessInstance:
    return builtin_instance("paper-1")


@pytest.fixture(name="paper_2")
def paper_2_fixture() -> RestlessInstance:
    return builtin_instance("paper-2")


@pytest.fixture(name="temp_area", scope="package")
def temp_area(request: pytest.FixtureRequest) -> str:
    os.makedirs("tests/temp_data", exist_ok=True)

    def teardown() -> None:  # pragma: no cover
        if not os.environ.get("NO_TEARDOWN"):
            os.system("\\rm -rf tests/temp_data")

    request.addfinalizer(teardown)
    return "tests/temp_data"
