import sys

from exciton_pimc.cli import main

sys.exit(main())
