import pytest

from ovlinf.simulate import build_synthetic_longform, write_jsonl


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Three ~40 s synthetic long-form utterances written to disk."""
    root = tmp_path_factory.mktemp("corpus")
    manifest, audio, _ = build_synthetic_longform(str(root), n_long=3, target_s=40.0, seed=1)
    path = root / "longform.jsonl"
    write_jsonl(path, manifest)
    return str(path), manifest, audio


# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def record():
    def _record(criterion, passed, detail):
        ACCEPTANCE.append((criterion, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")
