import pytest

from odal.labels import FrameLabel, GroundTruthObject
from odal.ontology import load_ontology


@pytest.fixture(scope="session")
def ontology():
    return load_ontology()


def make_label(frame_id, objects, image_ref=""):
    """objects: {class: (position, visible)} or {class: position} (visible)."""
    built = {}
    for cls, value in objects.items():
        if isinstance(value, tuple):
            position, visible = value
        else:
            position, visible = value, True
        built[cls] = GroundTruthObject(position=position, is_visible=visible)
    return FrameLabel(frame_id=frame_id, image_ref=image_ref, objects=built)


# One human-readable line per acceptance criterion, printed after the run.
ACCEPTANCE_CRITERIA = {
    "test_frame_scoring_matches_brute_force": "frame scoring matches brute-force recomputation on 10,000 random verdicts",
    "test_scoring_edge_cases": "bonus-point and SNR edge cases reproduce pinned values",
    "test_zero_error_oracle_is_perfect": "zero-error oracle loopback run scores a perfect report, 3x deterministic",
    "test_error_injection_statistics": "error-injection run matches configured rates and analytic score",
    "test_envelope_round_trip_and_corruption": "envelope codec round-trips and rejects corrupted payloads",
    "test_parser_inverts_clean_oracle": "parser inverts the zero-error oracle on random labels",
    "test_dataset_operation_laws": "split partitions, upsample extends, double flip restores",
    "test_report_fidelity": "report renders the expected best-row values in descending SNR order",
    "test_simnet_closed_form_and_ratio": "simulated latency matches the closed form; uplink ratio exact",
    "test_adapter_contract_fixtures": "adapter contract fixtures are pinned and self-consistent",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            name = getattr(report, "nodeid", "").split("::")[-1]
            if name in ACCEPTANCE_CRITERIA:
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, f"[{status}] {ACCEPTANCE_CRITERIA[name]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _name, line in sorted(lines):
            terminalreporter.write_line(line)
