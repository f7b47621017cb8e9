"""The thirteen acceptance criteria at their stated tolerances.

Each test prints one pass/fail line.  Criteria 8 to 10 read the replica
ensemble cache (``python -m soswall.ensembles`` fills it; SOSWALL_CACHE
overrides its location).
"""

import pytest

from soswall import acceptance, ensembles

from conftest import CRITERIA

CACHE = ensembles.DEFAULT_CACHE
USES_CACHE = {8, 9, 10}


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 14), ids=[f"criterion{k:02d}" for k in range(1, 14)])
def test_criterion(number):
    fn = acceptance.ALL[number - 1]
    result = fn(cache=CACHE) if number in USES_CACHE else fn()
    print()
    print(result.line())
    CRITERIA.append(result.line())
    assert result.number == number
    assert result.passed, result.line()
