import sys

from amdl.cli import main

sys.exit(main())
