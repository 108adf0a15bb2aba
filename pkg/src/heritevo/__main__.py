import sys

from heritevo.cli import main

sys.exit(main())
