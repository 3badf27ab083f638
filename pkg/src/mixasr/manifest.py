"""JSON Lines manifests tying audio files to transcripts.

The first line is a header object ({"header": true, ...}) recording the
seeds and protocol used to produce the data; every following line is one
example. Audio paths are relative to the manifest's directory unless the
header declares another root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .audio import read_wav
from .errors import ManifestError
from .simulate import MixtureExample, Reference

MANIFEST_VERSION = 1


@dataclass
class ManifestEntry:
    id: str
    audio: str
    speakers: list[str]
    transcripts: list[str]
    delays_s: list[float]
    enrollment: str | None = None
    target_index: int | None = None
    enrollment_speaker: str | None = None
    language: str = "en"

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "audio": self.audio,
            "speakers": self.speakers,
            "transcripts": self.transcripts,
            "delays_s": self.delays_s,
            "language": self.language,
        }
        if self.enrollment is not None:
            out["enrollment"] = self.enrollment
            out["target_index"] = self.target_index
            out["enrollment_speaker"] = self.enrollment_speaker
        return out

    @classmethod
    def from_json(cls, obj: dict, line_no: int) -> "ManifestEntry":
        try:
            entry = cls(
                id=obj["id"],
                audio=obj["audio"],
                speakers=list(obj["speakers"]),
                transcripts=list(obj["transcripts"]),
                delays_s=[float(d) for d in obj["delays_s"]],
                enrollment=obj.get("enrollment"),
                target_index=obj.get("target_index"),
                enrollment_speaker=obj.get("enrollment_speaker"),
                language=obj.get("language", "en"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"line {line_no}: malformed entry ({exc})")
        if len(entry.speakers) != len(entry.transcripts) or len(entry.speakers) != len(entry.delays_s):
            raise ManifestError(f"line {line_no}: speakers/transcripts/delays length mismatch")
        if any(d < 0 for d in entry.delays_s):
            raise ManifestError(f"line {line_no}: negative delay")
        if entry.enrollment is not None and entry.target_index is None:
            raise ManifestError(f"line {line_no}: enrollment without target_index")
        return entry

    @property
    def has_enrollment(self) -> bool:
        return self.enrollment is not None


@dataclass
class Manifest:
    path: Path
    header: dict
    entries: list[ManifestEntry] = field(default_factory=list)

    @property
    def root(self) -> Path:
        declared = self.header.get("root")
        return Path(declared) if declared else self.path.parent

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def load_example(self, entry: ManifestEntry) -> MixtureExample:
        """Materialize one entry: read the audio and wrap it."""
        audio_path = self.resolve(entry.audio)
        if not audio_path.exists():
            raise ManifestError(f"{entry.id}: audio file missing: {audio_path}")
        mixture = read_wav(audio_path)
        enrollment = None
        if entry.enrollment is not None:
            enr_path = self.resolve(entry.enrollment)
            if not enr_path.exists():
                raise ManifestError(f"{entry.id}: enrollment file missing: {enr_path}")
            enrollment = read_wav(enr_path)
        return MixtureExample(
            id=entry.id,
            mixture=mixture,
            references=[
                Reference(s, t) for s, t in zip(entry.speakers, entry.transcripts)
            ],
            delays_s=entry.delays_s,
            target_index=entry.target_index,
            enrollment=enrollment,
            enrollment_speaker_id=entry.enrollment_speaker,
            language=entry.language,
        )


def write_manifest(path: str | Path, entries: list[ManifestEntry], header: dict | None = None) -> None:
    path = Path(path)
    head = {"header": True, "manifest_version": MANIFEST_VERSION}
    head.update(header or {})
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(head, sort_keys=True) + "\n")
        for e in entries:
            f.write(json.dumps(e.to_json(), sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    header: dict = {}
    entries: list[ManifestEntry] = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {i + 1}: invalid JSON ({exc})")
            if i == 0 and obj.get("header"):
                header = obj
                continue
            entries.append(ManifestEntry.from_json(obj, i + 1))
    return Manifest(path=path, header=header, entries=entries)
