"""Command line entry point: plotview SPEC.json

Exit codes: 0 rendered, 1 bad spec or bad input data, 2 unexpected
runtime failure.
"""

import sys

from .figures import render
from .spec import SpecError, load_spec
from .tables import TableError

USAGE = "usage: plotview SPEC.json"


def main(argv=None):
    args = sys.argv[1:] if argv is None else list(argv)
    if args and args[0] in ("-h", "--help"):
        print(USAGE)
        return 0
    if len(args) != 1:
        print(USAGE, file=sys.stderr)
        return 1
    try:
        out = render(load_spec(args[0]))
    except (SpecError, TableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
