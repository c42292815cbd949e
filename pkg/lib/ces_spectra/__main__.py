import sys

from ces_spectra.cli import main

sys.exit(main())
