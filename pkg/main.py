#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Motor de riesgo PSP - Punto de entrada principal
"""

import sys
from pathlib import Path

# Agregar el directorio actual al path
sys.path.insert(0, str(Path(__file__).parent))

try:
    from cli.commands import main as cli_main
    from config.settings import APP_CONFIG
    from utils.logger import get_logger
except ImportError as e:
    print(f"❌ Error de importación: {e}")
    print("Asegúrate de que todas las dependencias estén instaladas:")
    print("pip install -r requirements.txt")
    sys.exit(1)

logger = get_logger("main")


def main():
    """Función principal con manejo robusto de errores"""
    logger.debug(f"Iniciando {APP_CONFIG['name']} v{APP_CONFIG['version']}")
    try:
        code = cli_main(sys.argv[1:])
    except Exception as e:
        logger.error(f"Error crítico: {e}", exc_info=True)
        print(f"❌ Error crítico: {e}")
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
