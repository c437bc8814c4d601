"""Command line interface for rail-restless"""

from .restless_commands import (
    restless_cli,
    inspect_command,
    run_command,
    compare_command,
    solve_command,
    verify_command,
    bench_command,
)


__all__ = [
    "restless_cli",
    "inspect_command",
    "run_command",
    "compare_command",
    "solve_command",
    "verify_command",
    "bench_command",
]
