import sys

from qforge.cli import main

sys.exit(main())
