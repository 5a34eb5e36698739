import sys

from findel.cli import main

sys.exit(main())
