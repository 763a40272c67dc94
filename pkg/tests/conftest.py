import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trialfacts.cfg import load_default_grammar
from trialfacts.cfg.lexer import LexCatalog
from trialfacts.config import PipelineConfig
from trialfacts.kb import load_knowledge_base

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def kb():
    config = PipelineConfig()
    return load_knowledge_base(config.kb_concepts, config.kb_attributes)


@pytest.fixture(scope="session")
def grammar():
    return load_default_grammar()


@pytest.fixture(scope="session")
def lex_catalog(kb):
    return LexCatalog(kb.attributes)


@pytest.fixture()
def tiny_kb(tmp_path):
    """Hand-built three-level vocabulary used by the spec's worked examples."""
    concepts = tmp_path / "concepts.tsv"
    concepts.write_text(
        "D009369\tneoplasms\tcancer\tcancer\t\n"
        "D007938\tleukemia\tleukaemia\tcancer\tD009369\n"
        "D015470\tacute myeloid leukemia\taml\tcancer\tD007938\n"
        "D051437\tkidney failure\trenal failure\tchronic_disease\t\n",
        encoding="utf-8",
    )
    attributes = tmp_path / "attributes.tsv"
    attributes.write_text(
        "A001\tage\taged\tnumeric\tyears\tyears=1,months=1/12\n"
        "A002\tbody mass index\tbmi\tnumeric\tkg/m2\tkg/m2=1\n",
        encoding="utf-8",
    )
    return load_knowledge_base(concepts, attributes)
