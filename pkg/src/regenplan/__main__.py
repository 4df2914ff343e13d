import sys

from regenplan.cli import main

sys.exit(main())
