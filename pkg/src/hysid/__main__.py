"""Allow `python -m hysid` as an alternative to the `hysid` script."""
import sys

from .cli import main

sys.exit(main())
