import sys

from privod.cli import main

sys.exit(main())
