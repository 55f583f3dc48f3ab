import sys

from nhsr.cli import main

sys.exit(main())
