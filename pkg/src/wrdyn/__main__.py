"""Allow ``python -m wrdyn`` as an alias for the ``wrdyn`` console script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
