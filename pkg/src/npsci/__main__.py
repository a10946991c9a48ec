import sys

from npsci.cli import main

sys.exit(main())
