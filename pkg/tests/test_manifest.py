"""Manifest files: roundtrip, the one-per-directory rule, failure modes."""

import pytest

from madpl_lab.errors import MissingArtifact, ParseError
from madpl_lab.manifest import (
    MANIFEST_NAME,
    RunManifest,
    describe_tree,
    read_manifest,
    write_manifest,
)


def sample():
    return RunManifest(
        command="gen-corpus",
        options={"world": "/tmp/w", "n_dialogs": 50, "seed": 3, "out": "/tmp/c"},
        seed=3,
        git_describe="abc1234",
        created_at="2026-01-01T00:00:00+00:00",
        finished_at="2026-01-01T00:00:05+00:00",
        outputs=["corpus.txt"],
    )


def test_json_roundtrip():
    man = sample()
    again = RunManifest.from_json(man.to_json())
    assert again == man


def test_write_read_and_single_file_invariant(tmp_path):
    write_manifest(tmp_path, sample())
    write_manifest(tmp_path, sample())
    files = list(tmp_path.iterdir())
    assert [f.name for f in files] == [MANIFEST_NAME]
    assert read_manifest(tmp_path) == sample()
    assert read_manifest(tmp_path / MANIFEST_NAME) == sample()


def test_read_missing(tmp_path):
    with pytest.raises(MissingArtifact):
        read_manifest(tmp_path)


def test_bad_json(tmp_path):
    (tmp_path / MANIFEST_NAME).write_text("{oops")
    with pytest.raises(ParseError):
        read_manifest(tmp_path)


def test_missing_keys():
    with pytest.raises(ParseError, match="seed"):
        RunManifest.from_json('{"command": "train", "options": {}}')
    with pytest.raises(ParseError):
        RunManifest.from_json('[1, 2]')


def test_describe_tree_returns_string():
    text = describe_tree()
    assert isinstance(text, str) and text
