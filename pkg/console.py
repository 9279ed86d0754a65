# v1.0.0 - Work Package 0: Console Output
import os

from rich.console import Console

# markup off: the "[Tag]" prefixes must print literally
_console = Console(stderr=True, markup=False, highlight=False, soft_wrap=True)


def is_quiet() -> bool:
    return os.getenv("MIXSINC_QUIET", "0").strip().lower() in ("1", "true", "yes")


def set_quiet(quiet: bool):
    os.environ["MIXSINC_QUIET"] = "1" if quiet else "0"


def log(tag: str, message: str):
    """Progress line, e.g. `[CpdEngine] Restart 2/5 finished.`"""
    if is_quiet():
        return
    _console.print(f"[{tag}] {message}")


def warn(tag: str, message: str):
    """Warnings are never silenced."""
    _console.print(f"[WARNING] [{tag}] {message}", style="yellow")
