import sys

from glfm.cli import main

sys.exit(main())
