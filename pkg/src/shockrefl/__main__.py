import sys

from shockrefl.cli import main

sys.exit(main())
