import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from app.core.config import settings
from app.schemas.manifest import RunManifest

logger = logging.getLogger(__name__)


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


class ManifestService:
    def __init__(self):
        self.version = settings.VERSION

    def file_digest(self, path: str) -> str:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def start(
        self,
        command: str,
        argv: Sequence[str],
        seed: int,
        params: Optional[Dict[str, Any]] = None,
        inputs: Sequence[str] = (),
    ) -> RunManifest:
        manifest = RunManifest(
            command=command,
            argv=list(argv),
            seed=seed,
            params=params or {},
            inputs={path: self.file_digest(path) for path in inputs},
            version=self.version,
            started_at=datetime.now(timezone.utc),
        )
        manifest.digest = hashlib.sha256(
            canonical_json(
                {
                    "command": manifest.command,
                    "argv": manifest.argv,
                    "seed": manifest.seed,
                    "params": manifest.params,
                    "inputs": manifest.inputs,
                    "version": manifest.version,
                }
            ).encode("utf-8")
        ).hexdigest()
        return manifest

    def render(self, payload: Dict[str, Any], manifest: RunManifest) -> str:
        """Output document with the manifest digest embedded, stable key order."""
        document = dict(payload)
        document["manifest_digest"] = manifest.digest
        return json.dumps(document, indent=2, sort_keys=True, default=str) + "\n"

    def write_output(self, path: str, payload: Dict[str, Any], manifest: RunManifest) -> None:
        Path(path).write_text(self.render(payload, manifest), encoding="utf-8")
        manifest.outputs[path] = self.file_digest(path)
        logger.info(f"Wrote {path} ({manifest.outputs[path][:12]})")

    def write_manifest(self, manifest: RunManifest, output_path: str) -> str:
        """Sidecar `<output>.manifest.json`; the only file that carries wall-clock times."""
        manifest.finished_at = datetime.now(timezone.utc)
        path = f"{output_path}.manifest.json"
        Path(path).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path


manifest_service = ManifestService()
