import sys
from crowncert.cli import main
sys.exit(main())
