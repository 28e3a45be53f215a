#!/usr/bin/env python3
import sys

from .cli import dispatch, parse_config
from .errors import MpeLabError
from .utils import setup_logger

def main(argv=None):
    try:
        cfg = parse_config(argv)
    except MpeLabError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    logger = setup_logger(verbose=cfg.verbose, debug=cfg.debug)
    sys.exit(dispatch(cfg, logger))

if __name__ == "__main__":
    main()
