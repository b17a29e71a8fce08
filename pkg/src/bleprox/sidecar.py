"""Model/schema persistence: JSON documents written atomically.

JSON keeps the sidecars self-describing; floats use Python's shortest
round-trip decimal representation, so parameters reload bit for bit.
"""

from __future__ import annotations

import json
import os


def write_text_atomic(path, text: str):
    """Write via a sibling temp file + rename so readers never see partials."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_document(path, doc: dict):
    write_text_atomic(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_document(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
