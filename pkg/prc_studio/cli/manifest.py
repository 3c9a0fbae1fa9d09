"""
Run manifests: the command, its flags, seeds and input digests that produced an output file.

The manifest id hashes everything except timing, so reruns with the same flags and inputs write
byte-identical outputs. Timing lives only in the `<output>.manifest.json` sidecar.
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

from prc_studio import __version__


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    flags: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    version: str = __version__
    started_at: float = field(default_factory=time.time)
    elapsed_seconds: float | None = None

    @staticmethod
    def for_command(command: str, flags: dict, input_paths: list[str], seeds: dict | None = None):
        return RunManifest(
            command=command,
            flags={key: _plain(value) for key, value in sorted(flags.items())},
            seeds=seeds or {},
            inputs={path: file_digest(path) for path in input_paths},
        )

    @property
    def id(self) -> str:
        payload = {
            "command": self.command,
            "flags": self.flags,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "version": self.version,
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def finish(self):
        self.elapsed_seconds = time.time() - self.started_at

    def to_dict(self) -> dict:
        return {"id": self.id, **asdict(self)}

    def write_sidecar(self, output_path: str) -> str:
        path = f"{output_path}.manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _plain(value):
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    return str(value)
