"""
Shared runner for the test scripts.

Each test script lists its test functions in `run_tests()`; this module runs
them, logs failures and prints the summary block.
"""

import logging
import os
import sys
from typing import Callable, Dict

# Add the parent directory to the system path to import the activity_shift package
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

logger = logging.getLogger(__name__)


def run_module_tests(title: str, tests: Dict[str, Callable[[], None]]) -> bool:
    """
    Run test functions and print a PASS/FAIL summary.

    Args:
        title: Name printed above the summary
        tests: Test name -> test function (raises on failure)

    Returns:
        True if every test passed
    """
    results = {}
    for name, test in tests.items():
        logger.info(f"Testing {name}...")
        try:
            test()
            results[name] = True
        except Exception as e:
            logger.error(f"{name} failed: {type(e).__name__}: {e}")
            results[name] = False

    print("\n" + "=" * 80)
    print(f"TEST RESULTS SUMMARY: {title}")
    print("=" * 80)

    all_passed = True
    for test_name, result in results.items():
        status = "PASS" if result else "FAIL"
        if not result:
            all_passed = False
        print(f"{test_name}: {status}")

    print("=" * 80)
    print(f"OVERALL: {'PASS' if all_passed else 'FAIL'}")
    print("=" * 80)

    return all_passed


def collect(namespace: Dict[str, object]) -> Dict[str, Callable[[], None]]:
    """Every `test_*` function of a module namespace, in definition order."""
    return {
        name[len("test_"):]: value
        for name, value in namespace.items()
        if name.startswith("test_") and callable(value)
    }
