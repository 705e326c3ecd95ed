import sys

from judgment_rule.cli import main

sys.exit(main())
