import sys

from medtest.cli import main

sys.exit(main())
