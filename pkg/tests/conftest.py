import re
from pathlib import Path

import pytest

from adspeech.synth import CohortSpec, generate_cohort

CRITERIA = {
    "c1": "gradient suite",
    "c2": "convolution and gated-unit oracles",
    "c3": "feature dimensional contract",
    "c4": "synthetic separability",
    "c5": "voting and fold properties",
    "c6": "SMO correctness",
    "c7": "overfit sanity",
    "c8": "corpus-mode sweep report",
    "c9": "determinism",
}

TINY_CONFIG = """\
[data]
manifest = {manifest}
feature_set = IS09

[model]
arch = gcnn
depth = 2
kernels = 4
hidden = 8

[train]
max_epochs = 2
batch_size = 8

[cv]
k = 3
fold_seed = 1

[sweep]
depths = {depths}
lengths_ms = 500,1000
length_depths = 1
feature_sets = IS09

[output]
dir = run
"""


def write_tiny_config(directory: Path, manifest: Path, depths="1,2") -> Path:
    path = Path(directory) / "run.ini"
    path.write_text(TINY_CONFIG.format(manifest=Path(manifest).resolve(), depths=depths))
    return path


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohort")
    return generate_cohort(CohortSpec(n_subjects=6, utterances_per_subject=(2, 3), seed=4), root)


def _criterion(nodeid: str):
    if "test_acceptance.py" not in nodeid:
        return None
    m = re.search(r"::test_(c\d)_", nodeid)
    return m.group(1) if m else None


def pytest_terminal_summary(terminalreporter):
    outcomes: dict[str, list] = {}
    for key in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(key, []):
            c = _criterion(getattr(rep, "nodeid", ""))
            if c is None or (key == "passed" and rep.when != "call"):
                continue
            details = [str(v) for k, v in getattr(rep, "user_properties", []) if k == "detail"]
            outcomes.setdefault(c, []).append((key, details))
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(outcomes, key=lambda s: int(s[1:])):
        keys = {k for k, _ in outcomes[c]}
        if keys & {"failed", "error"}:
            verdict = "FAIL"
        elif keys == {"skipped"}:
            verdict = "SKIP"
        else:
            verdict = "PASS"
        details = "; ".join(d for _, ds in outcomes[c] for d in ds)
        terminalreporter.write_line(f"{c.upper()} {verdict} {CRITERIA[c]}" + (f" ({details})" if details else ""))
