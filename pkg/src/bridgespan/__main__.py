import sys

from bridgespan.cli import main

sys.exit(main())
