"""Atomic artifact persistence with provenance.

Every JSON report carries the config hash, the seed in effect, and a
creation timestamp. Files are written to a temporary sibling and renamed, so
no partial artifact is ever observable. Reports are byte-identical across
reruns with the same config and seeds except for the `created_at` field.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path


def config_hash(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def provenance(config_dict: dict | None, seed: int | None) -> dict:
    return {
        "config_sha256": None if config_dict is None else config_hash(config_dict),
        "seed": seed,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path, payload: dict, config_dict: dict | None = None,
                      seed: int | None = None) -> None:
    body = dict(payload)
    body["provenance"] = provenance(config_dict, seed)
    write_text_atomic(path, json.dumps(body, sort_keys=True, indent=2) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def strip_timestamp(report: dict) -> dict:
    """Report content with the volatile timestamp removed (for byte comparisons)."""
    out = json.loads(json.dumps(report))
    if "provenance" in out:
        out["provenance"].pop("created_at", None)
    return out
