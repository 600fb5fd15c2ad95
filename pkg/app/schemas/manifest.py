from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """
    Everything needed to rerun a command. `digest` hashes the deterministic
    fields only, so identical reruns embed identical digests in their outputs.
    """

    command: str
    argv: List[str]
    seed: int
    params: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    version: str
    digest: str = ""
    started_at: Optional[datetime] = None
    finished_at: Optional[datetime] = None
