import pytest

from blockbridge import library


@pytest.fixture(scope="session")
def single_bridge():
    return library.load_builtin("single_bridge")


@pytest.fixture(scope="session")
def two_tables():
    return library.load_builtin("two_tables")


@pytest.fixture(scope="session")
def swap_bridge():
    return library.load_builtin("swap_bridge")
