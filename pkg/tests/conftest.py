import random
from pathlib import Path

import pytest

from avaddon_rescue.cipher import SessionKey
from avaddon_rescue.emulator import generate_session_key


@pytest.fixture
def session_key() -> SessionKey:
    return generate_session_key(1234)


@pytest.fixture
def other_key() -> SessionKey:
    return generate_session_key(9999)


def make_tree(root: Path, files: dict[str, bytes]) -> dict[Path, bytes]:
    """Materialize {relative_path: content} under root; returns abs paths."""
    out = {}
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
        out[path] = content
    return out


def random_corpus(seed: int, n_files: int, min_size: int = 0, max_size: int = 4096) -> dict[str, bytes]:
    """Deterministic corpus spec: nested dirs, varied sizes."""
    rng = random.Random(seed)
    files = {}
    for i in range(n_files):
        depth = rng.randint(0, 3)
        parts = [f"d{rng.randint(0, 5)}" for _ in range(depth)]
        parts.append(f"file_{i:05d}.txt")
        files["/".join(parts)] = rng.randbytes(rng.randint(min_size, max_size))
    return files


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion at the end of a run."""
    lines = []
    for outcome in ("passed", "failed", "error", "xfailed", "xpassed"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and "criterion" in nodeid:
                name = nodeid.split("::")[-1]
                lines.append((name, outcome.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(set(lines)):
            terminalreporter.write_line(f"{outcome:>8}  {name}")
