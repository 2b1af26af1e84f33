"""Validates every JSON config in a directory against configs/schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "schema.json").read_text())
jsonschema.Draft7Validator.check_schema(schema)
failures = 0
for path in sorted(root.glob("*.json")):
    if path.name == "schema.json":
        continue
    errors = list(jsonschema.Draft7Validator(schema).iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {e.message}")
    failures += bool(errors)
    print(f"{path.name}: {'ok' if not errors else 'INVALID'}")
sys.exit(1 if failures else 0)
