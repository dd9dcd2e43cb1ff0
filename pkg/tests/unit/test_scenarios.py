"""
Unit tests for scenario orchestration.
"""
import json

import pytest
from unittest.mock import patch

from wavelab.core.model import AbcdParams
from wavelab.core.spectral import GridSpec
from wavelab.errors import ConfigurationError, ParameterError
from wavelab.harness import scenarios
from wavelab.schemas import ScenarioConfig
from wavelab.storage import field_io


class TestValidationScenarios:
    """Test the cheap validation scenarios end to end."""

    def test_soliton_validate(self, tmp_path):
        """Test the Chen wave passes every check and writes its artifacts."""
        cfg = ScenarioConfig.from_dict({"grid": {"n": 512}})
        outcome = scenarios.run_scenario(cfg, tmp_path)
        root = tmp_path / "soliton-validate"

        assert outcome.passed, outcome.summary["checks"]
        assert outcome.exit_code == 0
        assert (root / "profile_eta.bin").exists()
        assert (root / "profile.txt").read_text(encoding="utf-8").startswith("# omega")
        assert len(field_io.read_table(root / "spectrum.tsv")) == 6

    def test_linear_validate(self, tmp_path):
        """Test RK4 at tiny amplitude matches the exact flat propagator."""
        cfg = ScenarioConfig.from_dict({"grid": {"n": 256}, "scenario": {"kind": "linear-validate"}})
        outcome = scenarios.run_scenario(cfg, tmp_path)
        names = [c["name"] for c in outcome.summary["checks"]]

        assert outcome.passed, outcome.summary["checks"]
        assert names == ["rk4_vs_exact", "sigma_unit"]
        assert (tmp_path / "linear-validate" / "linear_final_u.bin").exists()

    def test_summary_file(self, tmp_path):
        """Test summary.json carries the kind, the verdict and the config."""
        cfg = ScenarioConfig.from_dict({"grid": {"n": 256}, "scenario": {"kind": "linear-validate"}})
        scenarios.run_scenario(cfg, tmp_path)
        summary = json.loads((tmp_path / "linear-validate" / "summary.json").read_text(encoding="utf-8"))

        assert summary["kind"] == "linear-validate"
        assert summary["passed"] is True
        assert summary["config"]["grid"]["n"] == 256


class TestRunScenario:
    """Test dispatch and failure handling."""

    def test_failed_checks_exit_code(self, tmp_path):
        """Test a failing check gives exit code 3."""
        def failing(cfg, out):
            return {"checks": [scenarios._check("x", 1.0, False)]}

        with patch.dict(scenarios.SCENARIOS, {"soliton-validate": failing}):
            outcome = scenarios.run_scenario(ScenarioConfig(), tmp_path)

        assert not outcome.passed
        assert outcome.exit_code == 3

    def test_wavelab_error_logged_and_raised(self, tmp_path):
        """Test expected failures are logged once and propagate."""
        def broken(cfg, out):
            raise ParameterError("omega is supersonic")

        with patch.dict(scenarios.SCENARIOS, {"soliton-validate": broken}):
            with patch.object(scenarios.logger, 'error') as mock_error:
                with pytest.raises(ParameterError):
                    scenarios.run_scenario(ScenarioConfig(), tmp_path)
                mock_error.assert_called_once()

        assert not (tmp_path / "soliton-validate" / "summary.json").exists()


class TestHelpers:
    """Test shared builders."""

    def test_map_epsilons(self, tmp_path):
        """Test one member per epsilon, in sweep order, each in its own directory."""
        cfg = ScenarioConfig.from_dict({"scenario": {"epsilons": [0.05, 0.2, 0.1]}})
        seen = []

        def member(c, eps, out):
            seen.append(out.name)
            return {"eps": eps}

        result = scenarios._map_epsilons(member, cfg, tmp_path)

        assert list(result) == [0.2, 0.1, 0.05]
        assert result[0.1] == {"eps": 0.1}
        assert sorted(seen) == ["eps_0.05", "eps_0.1", "eps_0.2"]

    def test_kernel_cache_follows_grid(self):
        """Test the kernel lattice lives on the scenario grid."""
        cfg = ScenarioConfig.from_dict({"grid": {"n": 512, "half_length": 80.0}})
        cache = scenarios.kernel_cache(cfg)

        assert cache.grid == GridSpec(512, 80.0)
        assert cache.params == cfg.params.to_params()

    def test_solve_profile_needs_speed(self, small_grid):
        """Test non-Chen constants without a speed are refused."""
        with pytest.raises(ConfigurationError):
            scenarios.solve_profile(AbcdParams(a=-0.8), small_grid, alpha=-1.0)

    def test_seed_round_trip(self, tmp_path, stable_chen):
        """Test a written profile reloads as a seed."""
        scenarios.write_profile(stable_chen, tmp_path / "seed")
        pair = scenarios.load_seed(tmp_path / "seed_eta.bin")

        assert pair.grid == stable_chen.grid
        assert (pair.eta == stable_chen.R).all()

    def test_seed_path_suffix(self, tmp_path):
        """Test seed paths must name an _eta.bin dump."""
        with pytest.raises(ConfigurationError):
            scenarios.load_seed(tmp_path / "seed.txt")
