import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" in report.nodeid:
        _ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")


@pytest.fixture
def tiny_source():
    from fixtures import make_dataset

    return make_dataset(
        {
            "figo_stage": ["IA", "IB", "IA", "IIB"],
            "age": ["34", "40", "51", "29"],
            "sex": ["M", "F", "F", "M"],
            "tumor_site": ["lung", "breast", "lung", "colon"],
        }
    )


@pytest.fixture
def tiny_target():
    from fixtures import make_schema

    return make_schema(
        [
            {
                "name": "figo_stage",
                "supercategory": "clinical",
                "category": "diagnosis",
                "value_type": "enumeration",
                "enum_values": ["IA", "IB", "IIA", "IIB"],
            },
            {
                "name": "age_at_index",
                "supercategory": "clinical",
                "category": "demographic",
                "value_type": "integer",
                "description": "Age in years at the reference point.",
            },
            {
                "name": "gender",
                "supercategory": "clinical",
                "category": "demographic",
                "value_type": "enumeration",
                "enum_values": ["M", "F"],
            },
            {
                "name": "site_of_resection",
                "supercategory": "biospecimen",
                "category": "sample",
                "value_type": "enumeration",
                "enum_values": ["lung", "breast", "colon", "kidney"],
            },
            {
                "name": "days_to_birth",
                "supercategory": "clinical",
                "category": "demographic",
                "value_type": "integer",
            },
            {
                "name": "bmi",
                "supercategory": "clinical",
                "category": "exposure",
                "value_type": "number",
            },
        ]
    )
