#!/usr/bin/env python3
"""
Tests for roughpde.logs

Covers:
- Log line format on stderr
- Check bookkeeping and summaries
"""

import re

from roughpde.logs import check_results, log, record_check, summarize_checks


class TestLogging:
    """Test log output."""

    def test_log_format(self, capsys):
        """Lines carry timestamp, level and the package tag on stderr."""
        log("hello", "WARNING")
        captured = capsys.readouterr()
        assert captured.out == ""
        assert re.match(r"^\[\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}\] \[WARNING\] \[roughpde\] hello$", captured.err.strip())


class TestChecks:
    """Test check bookkeeping."""

    def test_record_check(self, capsys):
        """Outcomes are stored and logged with a status mark."""
        record_check("semigroup", True, "residual 1e-15")
        record_check("schauder", False, "unstable")
        err = capsys.readouterr().err
        assert "✓ PASS: semigroup" in err
        assert "✗ FAIL: schauder" in err
        assert check_results["schauder"] == {"passed": False, "details": "unstable", "skipped": False}

    def test_summary_counts(self, capsys):
        """Skipped checks count separately from failures."""
        record_check("a", True)
        record_check("b", False, "too large")
        record_check("c", False, skipped=True)
        assert summarize_checks() == {"passed": 1, "failed": 1, "skipped": 1}
        assert "failed: b - too large" in capsys.readouterr().err
