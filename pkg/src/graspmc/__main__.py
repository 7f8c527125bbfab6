import sys

from graspmc.harness.cli import main

sys.exit(main())
