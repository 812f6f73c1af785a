"""Command-line layer.

Claims exercised here:
- named built-ins and file paths both load; unknown names exit nonzero
  with a message;
- derive on the spiral inflation reports compatible-at-inflation with a
  witness file, and witnesses a perfectly-correlated distribution with an
  inequality that reparses and evaluates negatively plus an exact JSON
  certificate;
- the symmetric route stays conservative: a witness lost by orbit
  contraction yields compatible-at-inflation, never a false certificate;
- every output file is listed in the manifest with its correct content
  digest, and reruns with identical inputs are byte-identical except the
  manifest wall-clock line;
- structure/inflation mismatches exit nonzero;
- eval prints exact values with a violated flag and rejects variable
  mismatches; the empty inequality evaluates to zero, not violated;
- noise-scan writes the threshold, a curve whose endpoints are
  violated/unviolated, and a full 4x4x4 grid export; it refuses a base
  that does not violate;
- optimize at budget zero reports the seed's own evaluation and support
  pattern; a config file overrides flags; the worker-count variable is
  validated and recorded in the manifest;
- show prints the exact-literal distribution, the built-in inequality,
  both ai-expressible tables, and the stabilizer generators.
"""

import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from causalcompat.cli import main
from causalcompat.events import Distribution, EventSpace
from causalcompat.exact import Root2
from causalcompat.graphs import NodeId
from causalcompat.inequalities import evaluate, parse_inequality
from causalcompat.io import (
    parse_manifest,
    parse_strategy_params,
    read_distribution,
    sha256_file,
    write_distribution,
)

A, B, C = NodeId("A"), NodeId("B"), NodeId("C")


@pytest.fixture
def ghz_file(tmp_path):
    """A perfectly correlated two-event distribution the spiral witnesses."""
    space = EventSpace.over({A: 4, B: 4, C: 4})
    vals = np.array([Fraction(0)] * 64, dtype=object)
    vals[0] = Fraction(1, 2)
    vals[63] = Fraction(1, 2)
    path = tmp_path / "ghz.txt"
    write_distribution(path, Distribution(space, vals))
    return path


def _check_manifest(out_dir: Path):
    """Every output the manifest lists exists with the recorded digest."""
    man = parse_manifest((out_dir / "manifest.txt").read_text())
    listed = {name for name, _ in man.outputs}
    on_disk = {p.name for p in out_dir.iterdir()} - {"manifest.txt"}
    assert listed == on_disk
    for name, digest in man.outputs:
        assert sha256_file(out_dir / name) == digest
    return man


class TestInputLoading:
    """Unknown names fail fast with a nonzero exit."""

    @pytest.mark.parametrize(
        "argv",
        [
            ["derive", "square", "spiral", "fritz"],
            ["derive", "triangle", "helix", "fritz"],
            ["derive", "triangle", "spiral", "nonesuch"],
            ["eval", "nonesuch", "fritz"],
            ["optimize", "wagon-wheel", "--seed", "nonesuch", "--budget", "0"],
        ],
    )
    def test_unknown_names_exit_nonzero(self, argv, tmp_path, capsys):
        code = main(argv + ["--out-dir", str(tmp_path)] if argv[0] != "eval" else argv)
        assert code == 2
        assert capsys.readouterr().err.strip()


class TestDerive:
    """The end-to-end pipeline command."""

    def test_spiral_fritz_compatible(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["derive", "triangle", "spiral", "fritz", "--out-dir", str(out)])
        assert code == 0
        assert "compatible-at-inflation" in capsys.readouterr().out
        report = (out / "report.txt").read_text()
        assert "verdict: compatible-at-inflation" in report
        assert (out / "witness.txt").read_text().startswith("witness\ncolumns: 4096")
        _check_manifest(out)

    def test_spiral_witnesses_correlated_distribution(self, tmp_path, ghz_file):
        out = tmp_path / "run"
        code = main(["derive", "triangle", "spiral", str(ghz_file),
                     "--out-dir", str(out)])
        assert code == 0
        report = (out / "report.txt").read_text()
        assert "verdict: witnessed-incompatible" in report
        assert "value: -3/2" in report

        ineq = parse_inequality((out / "inequality.txt").read_text())
        ghz = read_distribution(ghz_file)
        assert evaluate(ineq, ghz) == Fraction(-3, 2)

        cert = json.loads((out / "certificate.json").read_text())
        assert cert["kind"] == "marginal-infeasibility-certificate"
        assert cert["rows"] == "context-events"
        assert cert["value"] == "-3/2"
        for c in cert["certificate"]:
            Root2.parse(c)  # every coefficient is an exact literal
        _check_manifest(out)

    def test_symmetric_contraction_stays_conservative(self, tmp_path, ghz_file):
        """Orbit aggregation can lose this witness; the verdict must then be
        the honest compatible-at-inflation, never a bogus certificate."""
        out = tmp_path / "run"
        code = main(["derive", "triangle", "spiral", str(ghz_file),
                     "--symmetric", "--out-dir", str(out)])
        assert code == 0
        report = (out / "report.txt").read_text()
        assert "symmetric: yes" in report
        assert "group-order: 6" in report
        assert "verdict: compatible-at-inflation" in report
        _check_manifest(out)

    def test_rerun_is_byte_identical(self, tmp_path, ghz_file, monkeypatch):
        outs = []
        for sub in ("one", "two"):
            cwd = tmp_path / sub
            cwd.mkdir()
            monkeypatch.chdir(cwd)
            assert main(["derive", "triangle", "spiral", str(ghz_file),
                         "--out-dir", "run"]) == 0
            outs.append(cwd / "run")
        first, second = outs
        for p in sorted(first.iterdir()):
            a, b = p.read_bytes(), (second / p.name).read_bytes()
            if p.name == "manifest.txt":
                strip = lambda raw: [
                    ln for ln in raw.decode().splitlines()
                    if not ln.startswith("wall-clock")
                ]
                assert strip(a) == strip(b)
            else:
                assert a == b

    def test_structure_inflation_mismatch(self, tmp_path, capsys):
        code = main(["derive", "bell", "spiral", "fritz", "--out-dir", str(tmp_path)])
        assert code == 2
        assert "different structure" in capsys.readouterr().err


class TestEval:
    """Value printing and the violated flag."""

    def test_builtin_on_fritz(self, capsys):
        assert main(["eval", "wagon-wheel", "fritz"]) == 0
        out = capsys.readouterr().out
        assert "value: -1/16" in out
        assert "violated: yes" in out

    def test_builtin_on_uniform(self, capsys):
        assert main(["eval", "wagon-wheel", "uniform"]) == 0
        out = capsys.readouterr().out
        assert "violated: no" in out

    def test_empty_inequality_is_zero(self, tmp_path, capsys):
        path = tmp_path / "zero.txt"
        path.write_text("name: zero\n0 * P[A](0)\n")
        assert main(["eval", str(path), "fritz"]) == 0
        out = capsys.readouterr().out
        assert "value: 0" in out
        assert "violated: no" in out

    def test_variable_mismatch_exits_nonzero(self, tmp_path, capsys):
        path = tmp_path / "alien.txt"
        path.write_text("1 * P[D](0)\n")
        assert main(["eval", str(path), "fritz"]) == 2
        assert "references variables" in capsys.readouterr().err


class TestNoiseScan:
    """Threshold, curve, and grid export."""

    def test_builtin_scan(self, tmp_path, capsys):
        out = tmp_path / "scan"
        code = main(["noise-scan", "wagon-wheel", "--eps-step", "0.05",
                     "--out-dir", str(out)])
        assert code == 0
        report = (out / "report.txt").read_text()
        line = next(ln for ln in report.splitlines() if ln.startswith("threshold:"))
        threshold = float(line.split()[1])
        assert 0 < threshold < 1

        rows = [
            tuple(map(float, ln.split()))
            for ln in (out / "curve.txt").read_text().splitlines()
            if not ln.startswith("#")
        ]
        assert rows[0][0] == 0.0 and rows[0][1] < 0  # noiseless end violates
        assert rows[-1][0] == 1.0 and rows[-1][1] >= 0  # fully mixed does not

        grid = read_distribution(out / "noisy_grid.txt")
        assert grid.space.size == 64
        _check_manifest(out)

    def test_nonviolating_base_is_refused(self, tmp_path, capsys):
        path = tmp_path / "zero.txt"
        path.write_text("0 * P[A](0)\n")
        code = main(["noise-scan", str(path), "--out-dir", str(tmp_path / "scan")])
        assert code == 2
        assert "does not violate" in capsys.readouterr().err


class TestOptimize:
    """The violation-search command surface."""

    def test_budget_zero_reports_seed(self, tmp_path):
        out = tmp_path / "opt"
        code = main(["optimize", "wagon-wheel", "--seed", "fritz",
                     "--budget", "0", "--out-dir", str(out)])
        assert code == 0
        result = (out / "result.txt").read_text()
        assert "status: seed_only" in result
        line = next(ln for ln in result.splitlines() if ln.startswith("violation:"))
        assert float(line.split()[1]) == pytest.approx(1 / 16, abs=1e-12)
        assert "matches-fritz-support: yes" in result

        dist = read_distribution(out / "distribution.txt")
        assert float(dist.values.sum()) == pytest.approx(1.0, abs=1e-9)
        params = parse_strategy_params((out / "strategy.txt").read_text())
        assert params.size == 105
        man = _check_manifest(out)
        assert man.rng_seed == 0

    def test_config_file_overrides_flags(self, tmp_path):
        cfg = tmp_path / "opts.cfg"
        cfg.write_text("budget = 0  # seed evaluation only\n")
        out = tmp_path / "opt"
        code = main(["optimize", "wagon-wheel", "--budget", "5000",
                     "--config", str(cfg), "--out-dir", str(out)])
        assert code == 0
        result = (out / "result.txt").read_text()
        assert "status: seed_only" in result
        assert "budget: 0" in result

    def test_workers_env_recorded_and_validated(self, tmp_path, monkeypatch, capsys):
        out = tmp_path / "opt"
        monkeypatch.setenv("CAUSALCOMPAT_WORKERS", "3")
        assert main(["optimize", "wagon-wheel", "--budget", "0",
                     "--out-dir", str(out)]) == 0
        man = parse_manifest((out / "manifest.txt").read_text())
        assert man.workers == 3

        monkeypatch.setenv("CAUSALCOMPAT_WORKERS", "zero")
        assert main(["optimize", "wagon-wheel", "--budget", "0",
                     "--out-dir", str(out)]) == 2
        assert "CAUSALCOMPAT_WORKERS" in capsys.readouterr().err

    def test_strategy_file_seed_roundtrip(self, tmp_path):
        out1 = tmp_path / "first"
        assert main(["optimize", "wagon-wheel", "--budget", "0",
                     "--out-dir", str(out1)]) == 0
        out2 = tmp_path / "second"
        assert main(["optimize", "wagon-wheel", "--budget", "0",
                     "--seed", str(out1 / "strategy.txt"),
                     "--out-dir", str(out2)]) == 0
        r1 = (out1 / "result.txt").read_text()
        r2 = (out2 / "result.txt").read_text()
        v1 = next(ln for ln in r1.splitlines() if ln.startswith("violation:"))
        v2 = next(ln for ln in r2.splitlines() if ln.startswith("violation:"))
        assert abs(float(v1.split()[1]) - float(v2.split()[1])) < 1e-9

    def test_bad_seed_file(self, tmp_path, capsys):
        path = tmp_path / "junk.txt"
        path.write_text("not a strategy\n")
        assert main(["optimize", "wagon-wheel", "--seed", str(path),
                     "--budget", "0", "--out-dir", str(tmp_path / "o")]) == 2
        assert capsys.readouterr().err.strip()


class TestShow:
    """Pretty-printing of the built-ins."""

    def test_fritz_exact_literals(self, capsys):
        assert main(["show", "fritz"]) == 0
        out = capsys.readouterr().out
        assert "(2+sqrt2)/32" in out
        assert "(2-sqrt2)/32" in out
        assert out.count("\n") == 4 + 64  # header lines + one row per event

    def test_builtin_inequality(self, capsys):
        assert main(["show", "wagon-wheel-inequality"]) == 0
        out = capsys.readouterr().out
        assert "P[" in out and "sqrt2" in out
        assert len([ln for ln in out.splitlines() if "*" in ln]) == 242

    def test_tables(self, capsys):
        assert main(["show", "tables"]) == 0
        out = capsys.readouterr().out
        assert "wagon-wheel: 4 maximal ai-expressible sets" in out
        assert "web: 12 maximal ai-expressible sets" in out
        assert "blocks:" in out

    def test_web_generators(self, capsys):
        assert main(["show", "web-generators"]) == 0
        out = capsys.readouterr().out
        assert "order 48" in out
        gens = [ln for ln in out.splitlines() if ln.strip().startswith("(")]
        assert len(gens) >= 1
        assert all("(" in g and ")" in g for g in gens)
