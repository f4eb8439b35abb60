import numpy as np
import pytest

from ctxnmt.corpus import Batch, TrainingInstance
from ctxnmt.transformer import TransformerConfig


def tiny_config(**overrides) -> TransformerConfig:
    base = dict(
        d_model=16, d_ff=32, num_layers=2, num_heads=2, src_vocab=20, tgt_vocab=20, max_len=12,
        dropout=0.0, label_smoothing=0.0,
    )
    base.update(overrides)
    return TransformerConfig(**base)


def random_instances(n: int, vocab: int = 20, seed: int = 0, with_tgt: bool = True, max_len: int = 6):
    """Document-shaped instances: each group of three shares neighbours."""
    rng = np.random.default_rng(seed)

    def sent():
        return tuple(int(t) for t in rng.integers(6, vocab, size=int(rng.integers(1, max_len + 1))))

    out = []
    while len(out) < n:
        doc = [sent() for _ in range(3)]
        for i, cur in enumerate(doc):
            out.append(
                TrainingInstance(
                    cur_src=cur,
                    prev_src=doc[i - 1] if i > 0 else None,
                    next_src=doc[i + 1] if i < 2 else None,
                    tgt=sent() if with_tgt else None,
                )
            )
    return out[:n]


@pytest.fixture
def cfg():
    return tiny_config()


@pytest.fixture
def batch():
    return Batch.from_instances(random_instances(4))


# --- acceptance summary --------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number = int(name.split("_")[2])
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[number] = (name, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {name}  {detail}".rstrip())
