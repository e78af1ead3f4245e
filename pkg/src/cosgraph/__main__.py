from cosgraph.cli import main
import sys

sys.exit(main())
