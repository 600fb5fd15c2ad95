from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.common import Rational


class LengthStats(BaseModel):
    max_len: int = Field(ge=0)
    avg_len: Rational


class ClosureBlockDocument(BaseModel):
    offset: int
    base: List[List[int]]


class WordSetDocument(BaseModel):
    """On-disk form of a word set, plus whatever the producing command embedded."""

    rank: int
    label: str = ""
    words: List[List[int]]
    closure: Optional[List[ClosureBlockDocument]] = None
    params: Optional[Dict[str, Any]] = None
    certificate: Optional[Dict[str, Any]] = None
    manifest_digest: Optional[str] = None

    class Config:
        json_schema_extra = {
            "example": {
                "rank": 2,
                "label": "hadamard(k=2)",
                "words": [[], [1], [2], [1, 2]],
            }
        }
