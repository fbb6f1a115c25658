"""
Permite ejecutar ``python -m chemostat_control`` con el código de salida del comando.
"""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
