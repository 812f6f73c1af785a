"""Artifact file formats.

Claims exercised here:
- distribution files round-trip exactly: exact values reparse to equal
  exact values, float values reparse bit-for-bit;
- malformed distribution files (missing header, duplicate rows, missing
  events, short rows) are rejected with clear messages;
- strategy parameter files round-trip bit-for-bit and reject bad counts;
- manifests round-trip through their text form;
- writers return the digest of exactly the bytes they wrote.
"""

from fractions import Fraction

import numpy as np
import pytest

from causalcompat.events import Distribution, EventSpace
from causalcompat.graphs import NodeId
from causalcompat.inequalities import fritz_distribution
from causalcompat.io import (
    RunManifest,
    format_distribution,
    format_strategy_params,
    parse_distribution,
    parse_manifest,
    parse_strategy_params,
    sha256_file,
    write_artifact,
)

A, B = NodeId("A"), NodeId("B")


class TestDistributionFormat:
    """Text round-trips for exact and float distributions."""

    def test_exact_roundtrip(self):
        d = fritz_distribution()
        back = parse_distribution(format_distribution(d))
        assert back.space == d.space
        assert back.is_exact
        assert all(u == v for u, v in zip(back.values, d.values))

    def test_float_roundtrip_is_bit_exact(self):
        space = EventSpace.over({A: 2, B: 3})
        rng = np.random.default_rng(0)
        vals = rng.dirichlet(np.ones(6))
        d = Distribution(space, vals)
        back = parse_distribution(format_distribution(d))
        assert not back.is_exact
        assert np.array_equal(back.values, vals)

    def test_missing_header_rejected(self):
        with pytest.raises(ValueError, match="header"):
            parse_distribution("variables: A\ncards: 2\n0 1\n1 0\n")

    def test_duplicate_row_rejected(self):
        text = (
            "distribution\nvariables: A\ncards: 2\nvalues: exact\n"
            "0 1/2\n0 1/2\n"
        )
        with pytest.raises(ValueError, match="duplicate"):
            parse_distribution(text)

    def test_missing_event_rejected(self):
        text = "distribution\nvariables: A\ncards: 2\nvalues: exact\n0 1\n"
        with pytest.raises(ValueError, match="misses"):
            parse_distribution(text)

    def test_short_row_rejected(self):
        text = (
            "distribution\nvariables: A B\ncards: 2 2\nvalues: exact\n"
            "0 0 1/4\n0 1 1/4\n1 0 1/4\n1 1/4\n"
        )
        with pytest.raises(ValueError, match="malformed"):
            parse_distribution(text)


class TestStrategyParamsFormat:
    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(3)
        vec = rng.uniform(0, 2 * np.pi, size=105)
        back = parse_strategy_params(format_strategy_params(vec))
        assert np.array_equal(back, vec)

    def test_wrong_count_rejected(self):
        with pytest.raises(ValueError, match="parameter lines"):
            parse_strategy_params("strategy-params: 3\n0.1\n0.2\n")

    def test_wrong_header_rejected(self):
        with pytest.raises(ValueError, match="strategy"):
            parse_strategy_params("0.1\n0.2\n")


class TestManifestFormat:
    def test_roundtrip(self):
        man = RunManifest(
            command=("derive", "triangle", "spiral", "fritz"),
            version="0.1.0",
            rng_seed=7,
            wall_clock=1.234,
            inputs=(("fritz", "ab" * 32),),
            outputs=(("report.txt", "cd" * 32), ("a.txt", "ef" * 32)),
            workers=2,
        )
        back = parse_manifest(man.to_text())
        assert back.command == man.command
        assert back.version == man.version
        assert back.rng_seed == man.rng_seed
        assert back.workers == man.workers
        assert set(back.outputs) == set(man.outputs)
        assert back.inputs == man.inputs

    def test_no_seed_marker(self):
        man = RunManifest(("eval",), "0.1.0", None, 0.0, (), ())
        assert parse_manifest(man.to_text()).rng_seed is None

    def test_version_guard(self):
        with pytest.raises(ValueError, match="version"):
            parse_manifest("command: x\n")


class TestWriteArtifact:
    def test_digest_matches_file(self, tmp_path):
        path = tmp_path / "x.txt"
        digest = write_artifact(path, "payload\n")
        assert sha256_file(path) == digest
