import sys

from app.apis.cli import main as cli_main
from app.utils.logger import setup_logger


def main():
    """Main application entry point; `python main.py` with no arguments serves the API"""
    logger = setup_logger(__name__)
    argv = sys.argv[1:] or ["serve"]

    try:
        return cli_main(argv)
    except Exception as e:
        logger.error(f"Failed to run '{' '.join(argv)}': {str(e)}")
        raise


if __name__ == "__main__":
    sys.exit(main())
