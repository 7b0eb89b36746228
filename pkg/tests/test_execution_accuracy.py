import pytest

from querybot.errors import InvalidGoldError
from querybot.evaluation.execution import (
    cells_equal,
    compare_execution,
    execution_accuracy,
    has_top_level_order_by,
    results_match,
)
from querybot.generation.models import ExecutionOutcome

CHARTER = '"Charter School (Y/N)"'
ENROLLMENT = '"Enrollment (K-12)"'

# (prediction, gold, mode, expected EX) against the schools fixture database
CASES = [
    ("SELECT COUNT(*) FROM schools WHERE County = 'Alameda'",
     "SELECT COUNT(CDSCode) FROM schools WHERE County = 'Alameda'", "multiset", True),
    ("SELECT School FROM schools WHERE County = 'Fresno'",
     "SELECT School FROM schools WHERE County = 'Fresno' ORDER BY School DESC", "multiset", False),
    ("SELECT School FROM schools WHERE County = 'Fresno' ORDER BY School DESC",
     "SELECT School FROM schools WHERE County = 'Fresno'", "multiset", True),
    ("SELECT School FROM schools ORDER BY School",
     "SELECT School FROM schools ORDER BY School ASC", "multiset", True),
    (f"SELECT s.School FROM schools s JOIN frpm f ON s.CDSCode = f.CDSCode WHERE f.{CHARTER} = 1",
     f"SELECT School FROM schools WHERE CDSCode IN (SELECT CDSCode FROM frpm WHERE {CHARTER} = 1)", "multiset", True),
    ("SELECT \"Free Meal Count (K-12)\" FROM frpm WHERE CDSCode = 'S006'", "SELECT NULL", "multiset", True),
    ("SELECT \"Free Meal Count (K-12)\" FROM frpm WHERE CDSCode = 'S006'", "SELECT 0", "multiset", False),
    ("SELECT 1.0 / 3", "SELECT 0.3333333333", "multiset", True),
    ("SELECT 1.0 / 3", "SELECT 0.333", "multiset", False),
    ("SELECT 1200", f"SELECT {ENROLLMENT} FROM frpm WHERE CDSCode = 'S001'", "multiset", True),
    ("SELECT '1200'", "SELECT 1200", "multiset", False),
    ("SELECT School, County FROM schools", "SELECT School FROM schools", "multiset", False),
    ("SELECT County FROM schools", "SELECT DISTINCT County FROM schools", "multiset", False),
    ("SELECT County FROM schools", "SELECT DISTINCT County FROM schools", "set", True),
    ("SELECT School FROM schools WHERE County IN ('Fresno', 'Alameda')",
     "SELECT School FROM schools WHERE County = 'Fresno'", "multiset", False),
    ("SELECT School FROM schools WHERE 0", "SELECT School FROM schools WHERE County = 'Nowhere'", "multiset", True),
    (f"SELECT AVG({ENROLLMENT}) FROM frpm", f"SELECT SUM({ENROLLMENT}) / COUNT(*) FROM frpm", "multiset", True),
    (f"SELECT MAX({ENROLLMENT}) FROM frpm", f"SELECT MIN({ENROLLMENT}) FROM frpm", "multiset", False),
    ("SELECT School FROM schools ORDER BY OpenDate DESC LIMIT 1",
     "SELECT School FROM schools WHERE OpenDate = (SELECT MAX(OpenDate) FROM schools)", "multiset", True),
    ("SELECT School FROM schools",
     "SELECT School FROM (SELECT School FROM schools ORDER BY School DESC)", "multiset", True),
    ("SELECT City AS c FROM schools WHERE CDSCode = 'S002'",
     "SELECT City FROM schools WHERE CDSCode = 'S002'", "multiset", True),
    ("SELECT School FROM schools WHERE County = 'alameda'",
     "SELECT School FROM schools WHERE County = 'Alameda'", "multiset", False),
    ("SELECT County FROM schools WHERE County = 'Fresno'", "SELECT 'Fresno'", "multiset", False),
    ("SELECT County FROM schools WHERE County = 'Fresno'", "SELECT 'Fresno'", "set", True),
    ("SELECT 1.0000001, 'a' UNION ALL SELECT 1.0, 'b'",
     "SELECT 1.0, 'a' UNION ALL SELECT 1.0000001, 'b'", "multiset", True),
    ("SELECT 1.0000001, 'a' UNION ALL SELECT 1.0, 'a'",
     "SELECT 1.0, 'a' UNION ALL SELECT 1.0000001, 'b'", "multiset", False),
]


@pytest.mark.parametrize("pred,gold,mode,expected", CASES)
def test_execution_accuracy_cases(schools_db, pred, gold, mode, expected):
    assert execution_accuracy(pred, gold, schools_db, mode=mode) is expected


def test_failed_prediction_is_wrong(schools_db):
    comparison = compare_execution("SELECT Fone FROM schools", "SELECT School FROM schools", schools_db)
    assert comparison.ex is False
    assert comparison.reason == "prediction sql-error"


def test_missing_prediction_is_wrong(schools_db):
    comparison = compare_execution("  ", "SELECT School FROM schools", schools_db)
    assert comparison.ex is False
    assert comparison.reason == "no prediction"


def test_invalid_gold_raises(schools_db):
    with pytest.raises(InvalidGoldError) as info:
        execution_accuracy("SELECT 1", "SELECT Fone FROM schools", schools_db)
    assert "no such column" in info.value.engine_message


def test_supplied_outcome_is_reused(schools_db):
    outcome = ExecutionOutcome(status="ok", rows=[(3,)], columns=["n"])
    comparison = compare_execution(
        "SELECT this would not run", "SELECT COUNT(*) FROM schools WHERE County = 'Alameda'",
        schools_db, pred_outcome=outcome,
    )
    assert comparison.ex is True


@pytest.mark.parametrize("sql,ordered", [
    ("SELECT a FROM t ORDER BY a", True),
    ("select a from t order by a desc limit 3", True),
    ("SELECT a FROM (SELECT a FROM t ORDER BY a)", False),
    ("SELECT 'ORDER BY' FROM t", False),
    ("SELECT a FROM t", False),
])
def test_top_level_order_by(sql, ordered):
    assert has_top_level_order_by(sql) is ordered


def test_cells_and_rows():
    assert cells_equal(1, 1.0000001)
    assert not cells_equal(1, 1.01)
    assert cells_equal(None, None)
    assert not cells_equal(None, 0)
    assert not cells_equal("1", 1)
    assert results_match([(1, "a"), (2, "b")], [(2, "b"), (1, "a")])
    assert not results_match([(1, "a"), (2, "b")], [(2, "b"), (1, "a")], ordered=True)
    assert results_match([(None,), (1,)], [(1,), (None,)])


def test_unordered_rows_pair_within_tolerance():
    # the float order disagrees with the row pairing on the two sides
    assert results_match([(1.0000001, "a"), (1.0, "b")], [(1.0, "a"), (1.0000001, "b")])
    assert results_match([(1.0, "b"), (1.0000001, "a")], [(1.0000001, "b"), (1.0, "a")])
    assert not results_match([(1.0, "a"), (1.0, "a")], [(1.0, "a"), (1.0000001, "b")])
    assert not results_match([(1.0, "a")], [(1.0, "a"), (1.0, "a")])
