import sys

from remede.main import main

sys.exit(main())
