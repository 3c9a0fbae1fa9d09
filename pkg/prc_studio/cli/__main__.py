import sys

from prc_studio.cli.main import main

sys.exit(main())
