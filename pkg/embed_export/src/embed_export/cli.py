"""Command-line entry point: ``embed-export --manifest manifest.json``.

Exit codes: 0 success, 2 manifest error, 3 export failure.
"""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, export
from .manifest import ExportManifest, ManifestError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode a rationale corpus with a frozen pretrained "
                    "encoder and write FMAT feature files.",
    )
    parser.add_argument("--manifest", required=True, help="export manifest JSON")
    args = parser.parse_args(argv)
    try:
        manifest = ExportManifest.load(args.manifest)
    except (ManifestError, FileNotFoundError, ValueError) as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 2
    try:
        written = export(manifest)
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 3
    for kind, path in sorted(written.items()):
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
