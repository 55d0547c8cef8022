"""
Point d'entrée pour l'exécution du package via python -m kpiensemble.
"""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
