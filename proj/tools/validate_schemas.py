#!/usr/bin/env python3
"""Checks the JSON schemas in docs/schemas against the example configs and a live
`sarap serve --stdio` session driven by docs/examples/session.ndjson."""

import argparse
import json
import pathlib
import subprocess
import sys

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

ROOT = pathlib.Path(__file__).resolve().parent.parent
SCHEMAS = ROOT / "docs" / "schemas"
EXAMPLES = ROOT / "docs" / "examples"


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sarap", required=True, help="path to the sarap binary")
    args = parser.parse_args()

    schemas = {p.name: load(p) for p in SCHEMAS.glob("*.schema.json")}
    registry = Registry()
    for name, schema in schemas.items():
        Draft202012Validator.check_schema(schema)
        registry = registry.with_resource(schema["$id"], Resource.from_contents(schema))
    validator = {n: Draft202012Validator(s, registry=registry) for n, s in schemas.items()}

    failures = 0

    def check(schema_name, instance, label):
        nonlocal failures
        errors = list(validator[schema_name].iter_errors(instance))
        if errors:
            failures += 1
            print(f"FAIL {label}: {errors[0].message}")

    for path in sorted(EXAMPLES.glob("*.json")):
        doc = load(path)
        kind = doc.get("$schema", "")
        schema_name = pathlib.Path(kind).name
        if schema_name not in validator:
            print(f"FAIL {path.name}: unknown $schema {kind!r}")
            failures += 1
            continue
        check(schema_name, doc, path.name)

    script = (EXAMPLES / "session.ndjson").read_text(encoding="utf-8")
    for i, line in enumerate(script.splitlines()):
        check("session_message.schema.json", json.loads(line), f"request line {i + 1}")

    proc = subprocess.run([args.sarap, "serve", "--stdio"], input=script, capture_output=True,
                          text=True, timeout=120, check=False)
    if proc.returncode != 0:
        print(f"FAIL serve exited with {proc.returncode}: {proc.stderr}")
        failures += 1
    replies = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
    seen = set()
    for i, msg in enumerate(replies):
        seen.add(msg.get("type"))
        check("session_message.schema.json", msg, f"reply {i + 1} ({msg.get('type')})")
    for needed in ("MeshTopology", "Frame", "Ack", "Error"):
        if needed not in seen:
            print(f"FAIL no {needed} reply in the example session")
            failures += 1

    # negative controls: the schemas must reject these
    bad = [
        ("job_config.schema.json", {"mesh": "a.obj", "extra": 1}),
        ("job_config.schema.json", {"mesh": "a.obj", "params": {"lambda": 1.0}}),
        ("session_message.schema.json", {"v": 2, "id": 1, "type": "Step"}),
        ("session_message.schema.json", {"v": 1, "id": 1, "type": "MoveHandle", "vertex": 0}),
        ("bench_config.schema.json", {"runs": 3}),
    ]
    for schema_name, instance in bad:
        if validator[schema_name].is_valid(instance):
            print(f"FAIL {schema_name} accepted {json.dumps(instance)}")
            failures += 1

    print(f"{len(replies)} replies checked, {failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
