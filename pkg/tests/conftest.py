"""
Pytest configuration and global fixtures for groupcodes tests
"""
import json
from pathlib import Path

import pytest

from app.models.graph import BipartiteGraph
from app.models.group import AbelianGroup, PermutationGroup
from app.models.word import WordSet
from app.services.construction_service import construction_service


def pytest_configure(config):
    config.addinivalue_line("markers", "unit: fast checks of a single service")
    config.addinivalue_line("markers", "integration: command line and cross-module runs")
    config.addinivalue_line("markers", "slow: desk-scale reproduction runs")


# Word sets

@pytest.fixture
def sample_three_words() -> WordSet:
    """{x1, x2, x1 x2} over F_2"""
    return WordSet(rank=2, words=((1,), (2,), (1, 2)), label="three")


@pytest.fixture
def sample_basis() -> WordSet:
    """Basis of F_4"""
    return WordSet.basis(4)


@pytest.fixture
def sample_hadamard() -> WordSet:
    """Hadamard code of rank 3"""
    return construction_service.hadamard_code(3)


@pytest.fixture
def sample_identity_words() -> WordSet:
    """Only the empty word"""
    return WordSet(rank=2, words=((),), label="identity")


# Groups

@pytest.fixture
def sample_s3() -> PermutationGroup:
    """S_3 generated by (1 2) and (1 2 3)"""
    return PermutationGroup.from_cycles(3, [[[1, 2]], [[1, 2, 3]]])


@pytest.fixture
def sample_z6() -> AbelianGroup:
    return AbelianGroup([6])


@pytest.fixture
def sample_z2_squared() -> AbelianGroup:
    return AbelianGroup.zmr(2, 2)


# Graphs

@pytest.fixture
def sample_triangle_graph() -> BipartiteGraph:
    """N(b1) = {1, 2}, N(b2) = {1, 3}, N(b3) = {2, 3}"""
    return BipartiteGraph(n=3, m=3, d=2, adj=((1, 2), (1, 3), (2, 3)))


@pytest.fixture
def sample_twin_graph() -> BipartiteGraph:
    """Two left vertices sharing both neighbours"""
    return BipartiteGraph(n=2, m=2, d=2, adj=((1, 2), (1, 2)))


# Files for the command line

@pytest.fixture
def write_json(tmp_path: Path):
    """Write a JSON document under tmp_path and return its path as a string"""
    def _write(name: str, payload) -> str:
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)

    return _write
