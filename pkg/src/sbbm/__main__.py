import sys

from sbbm.cli import main

sys.exit(main())
