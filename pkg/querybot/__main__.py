import sys

from querybot.cli import main

sys.exit(main())
