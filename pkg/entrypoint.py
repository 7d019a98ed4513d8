import sys

from buck_trojan_sim.cli.app import main

if __name__ == "__main__":
    sys.exit(main())
