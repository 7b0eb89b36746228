"""Entry script: `python main.py <command> ...` (see querybot/cli.py)."""
import sys

from dotenv import load_dotenv

load_dotenv()

from querybot.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
