#!/usr/bin/env python3
"""
Tests for roughpde.artifacts

Covers:
- Config hashing and artifact names
- JSON, NDJSON, CSV and snapshot writers with provenance headers
"""

import json

import numpy as np
import pandas as pd
import pytest

from roughpde.artifacts import (
    ArtifactWriter,
    artifact_name,
    canonical_json,
    config_hash,
    read_csv,
    read_ndjson,
    save_json,
)
from roughpde.grid import load_snapshot


@pytest.fixture
def writer(tmp_path):
    return ArtifactWriter(tmp_path, "solve", "ab" * 32, 7)


class TestNaming:
    """Test hashes and names."""

    def test_hash_ignores_output(self):
        """The output section does not enter the hash."""
        base = {"grid": {"n1": 32}, "output": {"dir": "a"}}
        moved = {"grid": {"n1": 32}, "output": {"dir": "b"}}
        assert config_hash(base) == config_hash(moved)
        assert config_hash(base) != config_hash({"grid": {"n1": 64}, "output": {"dir": "a"}})

    def test_hash_key_order(self):
        """Key order does not change the hash."""
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})

    def test_artifact_name(self):
        """Names carry subcommand, hash prefix and seed."""
        assert artifact_name("solve", "0123456789abcdef", 3, "json", "-history") == "solve-0123456789ab-s3-history.json"

    def test_canonical_json_numpy(self):
        """numpy scalars and non-finite floats serialize."""
        text = canonical_json({"x": np.float64(0.5), "y": float("nan"), "z": np.arange(2)})
        assert json.loads(text) == {"x": 0.5, "y": None, "z": [0, 1]}


class TestWriters:
    """Test the locked writers."""

    def test_json(self, writer):
        """JSON documents carry the header."""
        path = writer.write_json({"pass": True, "value": np.float64(1.5)})
        document = json.loads(path.read_text())
        assert document["header"]["subcommand"] == "solve"
        assert document["header"]["seed"] == 7
        assert document["value"] == 1.5
        assert path.name == "solve-abababababab-s7.json"

    def test_ndjson(self, writer):
        """The header is the first line, records follow."""
        path = writer.write_ndjson([{"T": 0.5, "value": 1.0}, {"T": 0.25, "value": 2.0}])
        lines = read_ndjson(path)
        assert "header" in lines[0]
        assert [line["T"] for line in lines[1:]] == [0.5, 0.25]

    def test_csv(self, writer):
        """CSV files start with a comment header and round-trip exactly."""
        frame = pd.DataFrame({"eps": [2.0 ** -8, 1 / 3], "c1": [0.1, 0.2]})
        path = writer.write_csv(frame, suffix="-table")
        assert path.read_text().startswith("# subcommand=solve")
        loaded = read_csv(path)
        assert loaded["eps"].tolist() == frame["eps"].tolist()

    def test_snapshot(self, writer, trig_field):
        """Snapshots reload bit-exact."""
        path = writer.write_snapshot(trig_field)
        assert np.array_equal(load_snapshot(path).values, trig_field.values)
        assert path.suffix == ".rpf"

    def test_written_list(self, writer):
        """Every write is recorded and no temp files remain."""
        writer.write_json({"a": 1})
        writer.write_json({"b": 2}, suffix="-extra")
        assert len(writer.written) == 2
        assert not list(writer.out_dir.glob("*.tmp"))

    def test_save_json(self, tmp_path):
        """save_json writes outside a run."""
        path = save_json(tmp_path / "sub" / "result.json", {"x": 1})
        assert json.loads(path.read_text())["x"] == 1

    def test_save_json_replaces(self, tmp_path):
        """A second save replaces the file through a temp file that does not linger."""
        target = tmp_path / "result.json"
        target.write_text("{\"x\": ")
        path = save_json(target, {"x": 2}, header={"subcommand": "solve"})
        document = json.loads(path.read_text())
        assert document["x"] == 2
        assert document["header"] == {"subcommand": "solve"}
        assert not list(tmp_path.glob("*.tmp"))
