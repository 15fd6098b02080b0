"""One test per acceptance criterion; each prints its pass/fail line."""
import pytest

import oracles
from lelong_lab import acceptance


def test_fixture_constant_matches_oracle():
    assert acceptance.ORACLE_NU1_ALPHA == pytest.approx(oracles.nu_alpha_top(3, 1, 1, 1), abs=1e-12)


def test_table_covers_fifteen_criteria():
    assert [r.number for r in acceptance.ROWS] == list(range(1, 16))


@pytest.mark.parametrize("row", acceptance.ROWS, ids=lambda r: f"{r.number:02d}-{r.name.replace(' ', '_')}")
def test_criterion(row, acceptance_log):
    outcome = acceptance.run_row(row)
    print(outcome.line())
    acceptance_log.append((row.number, outcome.line()))
    assert outcome.passed, outcome.detail
