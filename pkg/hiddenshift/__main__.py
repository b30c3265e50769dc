"""Entry point. Checks the interpreter and dependencies and starts main script"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import sys


def deps(error: Exception):
    print(
        "🚫 Error: you have not installed all dependencies correctly.\n"
        f"{str(error)}\n"
        "Install them with: pip install -r requirements.txt"
    )


if sys.version_info < (3, 9, 0):
    print("🚫 Error: you must use at least Python version 3.9.0")
    sys.exit(1)
elif __package__ != "hiddenshift":  # In case they did python __main__.py
    print("🚫 Error: you cannot run this as a script; you must execute as a package")
    sys.exit(1)
else:
    try:
        import numpy  # noqa: F401
        import scipy  # noqa: F401

        from . import log

        log.init()

        from . import main
    except ModuleNotFoundError as e:  # pragma: no cover
        deps(e)
        sys.exit(1)

    if __name__ == "__main__":
        sys.exit(main.main())  # Execute main function
