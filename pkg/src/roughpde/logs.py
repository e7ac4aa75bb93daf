"""
Console logging and check bookkeeping for roughpde runs.

Log lines go to stderr so that stdout stays free for machine-readable output.

Environment Variables:
- ROUGHPDE_VERBOSE: Enable DEBUG output from log_verbose (default: 0)
"""

import datetime
import os
import sys
from typing import Any, Dict

VERBOSE = os.getenv("ROUGHPDE_VERBOSE", "0") == "1"

# Acceptance/check results of the current process, keyed by check name
check_results: Dict[str, Dict[str, Any]] = {}


def log(message: str, level: str = "INFO") -> None:
    """Log a message with timestamp and level."""
    timestamp = datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    print(f"[{timestamp}] [{level}] [roughpde] {message}", file=sys.stderr, flush=True)


def log_verbose(message: str) -> None:
    """Log verbose message only if ROUGHPDE_VERBOSE is enabled."""
    if VERBOSE:
        log(message, "DEBUG")


def record_check(name: str, passed: bool, details: str = "", skipped: bool = False) -> None:
    """Record the outcome of a named check and log it."""
    check_results[name] = {
        "passed": bool(passed),
        "details": details,
        "skipped": skipped,
    }
    if skipped:
        status = "⚠ SKIP"
    else:
        status = "✓ PASS" if passed else "✗ FAIL"
    log(f"{status}: {name} - {details}")


def summarize_checks() -> Dict[str, int]:
    """
    Log a summary of the recorded checks.

    Returns:
        dict: counts of passed, failed and skipped checks
    """
    passed = sum(1 for r in check_results.values() if r["passed"] and not r["skipped"])
    skipped = sum(1 for r in check_results.values() if r["skipped"])
    failed = len(check_results) - passed - skipped
    log(f"Checks: {passed} passed, {failed} failed, {skipped} skipped")
    for name, result in check_results.items():
        if not result["passed"] and not result["skipped"]:
            log(f"  failed: {name} - {result['details']}", "WARNING")
    return {"passed": passed, "failed": failed, "skipped": skipped}
