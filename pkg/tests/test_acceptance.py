"""One test per acceptance criterion; tolerances and budgets live in loschmidt.validation."""
import pytest

from loschmidt import validation

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module", autouse=True)
def compiled_kernels():
    validation.warm_up()


@pytest.mark.parametrize("check", validation.CRITERIA, ids=[c.key for c in validation.CRITERIA])
def test_criterion(check):
    result = check()
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
