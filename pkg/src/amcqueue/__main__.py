import sys

from amcqueue.cli import main

sys.exit(main())
