"""
Manifest Module - Reproducible Outputs
Builds the RunManifest embedded in every report and writes JSON/CSV
artifacts in a byte-stable way
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

TOOL_VERSION = '1.0.0'


@dataclass(frozen=True)
class RunManifest:
    """What produced an artifact: rerunning it gives the same bytes"""
    command: str
    config: dict
    inputs: dict = field(default_factory=dict)  # {role: {'path': str, 'sha256': str}}
    seed: int = 0
    tool_version: str = TOOL_VERSION

    def to_dict(self):
        return asdict(self)


def file_digest(path):
    """SHA-256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def describe_inputs(**paths):
    """{role: {'path', 'sha256'}} for every given file path (None entries skipped)"""
    return {
        role: {'path': str(path), 'sha256': file_digest(path)}
        for role, path in sorted(paths.items()) if path is not None
    }


def dump_json(payload):
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)"""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + '\n'


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)
    return path


def write_frame(frame, path):
    """CSV with LF line endings regardless of platform"""
    return write_text(path, frame.to_csv(index=False, lineterminator='\n'))
