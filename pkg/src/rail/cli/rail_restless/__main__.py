# This file must exist with these contents
from .restless_commands import restless_cli

if __name__ == "__main__":
    restless_cli()
