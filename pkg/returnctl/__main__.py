import sys

from returnctl.cli import main

sys.exit(main())
