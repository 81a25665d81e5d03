import json

import pytest

import robustirs.robust as robust
from robustirs.cli import main
from robustirs.config import ExperimentConfig
from robustirs.lmi import AffineLMI, build_energy_lmi
from robustirs.verify import (
    REPORT_FIELDS,
    kronecker_error,
    monte_carlo_robustness,
    run_verification,
    schur_equivalence_error,
    validate_report,
)

LIGHT = {"instances": 2, "mc_samples": 500, "train_steps": 80, "action_samples": 500}


def light_config():
    return ExperimentConfig().with_updates(verify=LIGHT)


def sign_flipped_energy_lmi(H_bar, rho, delta_h, eta, mu, N, compressed=False):
    """The energy LMI with ``+tau delta_h^2`` in the corner instead of ``-tau delta_h^2``."""
    lmi = build_energy_lmi(H_bar, rho, delta_h, eta, mu, N, compressed)
    correct = lmi.block

    def block(W, tau):
        F = correct(W, tau).copy()
        F[-1, -1] += 2 * tau * delta_h**2
        return F

    return AffineLMI(lmi.name, lmi.M, lmi.aux, block, lmi.meta)


def test_light_verification_passes_and_validates(tmp_path):
    report = run_verification(light_config(), tmp_path)
    validate_report(report)
    assert report["passed"], [c for c in report["checks"] if not c["passed"]]
    on_disk = json.loads((tmp_path / "verify" / "report.json").read_text())
    assert on_disk == report
    names = {c["name"] for c in report["checks"]}
    assert {"critic_gradient_fd", "actor_gradient_fd", "kronecker_identity", "schur_delta0_equivalence",
            "action_validity", "zero_reward_all_outage", "merged_target_dominance",
            "robust_feasibility_mc"} == names


def test_monte_carlo_detects_energy_sign_error(monkeypatch):
    cfg = ExperimentConfig()
    v = cfg.verify
    snr_ok, energy_ok = monte_carlo_robustness(cfg.geometry, v.rho, v.beta, 3, 1000)
    assert min(snr_ok, energy_ok) >= 0.999
    monkeypatch.setattr(robust, "build_energy_lmi", sign_flipped_energy_lmi)
    snr_bad, energy_bad = monte_carlo_robustness(cfg.geometry, v.rho, v.beta, 3, 1000)
    assert energy_bad < 0.999


def test_verify_command_fails_under_mutation(monkeypatch, tmp_path, capsys):
    path = tmp_path / "light.json"
    path.write_text(json.dumps({"verify": LIGHT}))
    monkeypatch.setattr(robust, "build_energy_lmi", sign_flipped_energy_lmi)
    code = main(["verify", "--config", str(path), "--out", str(tmp_path)])
    assert code != 0
    out = capsys.readouterr().out
    assert "FAIL robust_feasibility_mc" in out
    report = json.loads((tmp_path / "verify" / "report.json").read_text())
    assert not report["passed"]


def test_numeric_identities():
    assert kronecker_error(seed=5) <= 1e-9
    assert schur_equivalence_error(seed=5) <= 1e-6


def test_validate_report_rejects_bad_schema():
    good = {"schema_version": 1, "passed": True,
            "checks": [{"name": "x", "passed": True, "measured": 0.0, "tolerance": 1.0, "detail": ""}]}
    validate_report(good)
    assert set(good["checks"][0]) == set(REPORT_FIELDS)
    for bad in (
        {**good, "schema_version": 9},
        {**good, "passed": "yes"},
        {**good, "checks": [{"name": "x", "passed": True}]},
        {**good, "checks": [{**good["checks"][0], "measured": "big"}]},
        {**good, "checks": [{**good["checks"][0], "passed": 1}]},
    ):
        with pytest.raises(ValueError):
            validate_report(bad)
