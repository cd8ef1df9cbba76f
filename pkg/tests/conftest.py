from pathlib import Path

import pytest

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


def corpus_programs() -> list[Path]:
    return sorted(CORPUS.glob("*.mc"))


def read_corpus(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")
