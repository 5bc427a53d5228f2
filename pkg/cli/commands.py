"""
Interfaz de línea de comandos del motor de riesgo PSP

Subcomandos: config init, synth, fit-surfaces, run, backtest, emit-plot-data.
Códigos de salida: 0 correcto, 2 configuración, 3 E/S, 4 fallo numérico.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from cli.pipeline import emit_plot_data, fit_surfaces_only, recompute_backtest, run_pipeline
from config.config_loader import ConfigLoader
from config.settings import APP_CONFIG
from modules.market_data import FilterConfig, MarketParams, write_chains_csv, write_vix_csv
from modules.synthetic import synth_from_config
from utils.errors import RiesgoPSPError
from utils.logger import get_logger, log_error

logger = get_logger("cli")

EXIT_OK = 0


def _add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, default=None, help="archivo JSON de configuración")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECCION.CLAVE=VALOR",
                        help="modifica un valor de la configuración (repetible)")
    parser.add_argument("--output-dir", type=str, default=None, help="directorio de salida")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riesgo-psp", description=APP_CONFIG['description'])
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_CONFIG['version']}")
    sub = parser.add_subparsers(dest="command", required=True)

    config = sub.add_parser("config", help="gestión de la configuración")
    config_sub = config.add_subparsers(dest="config_command", required=True)
    init = config_sub.add_parser("init", help="escribe la configuración por defecto")
    init.add_argument("--output", type=str, default=None, help="archivo destino (por defecto, salida estándar)")

    synth = sub.add_parser("synth", help="genera cadenas y VIX sintéticos en CSV")
    _add_config_args(synth)

    for name, ayuda in (("fit-surfaces", "ajusta y guarda las superficies diarias"),
                        ("run", "ejecuta la corrida completa")):
        _add_config_args(sub.add_parser(name, help=ayuda))

    backtest = sub.add_parser("backtest", help="recalcula el backtest de una corrida")
    backtest.add_argument("run_dir", type=str, help="directorio de una corrida completa")
    backtest.add_argument("--docx", type=str, default=None, help="escribe además el informe Word")

    plot = sub.add_parser("emit-plot-data", help="escribe los CSV para gráficos de violaciones")
    plot.add_argument("run_dir", type=str, help="directorio de una corrida completa")
    return parser


def _load(args):
    overrides = list(args.overrides)
    if args.output_dir:
        overrides.append(f"paths.output_dir={json.dumps(args.output_dir)}")
    loader = ConfigLoader(args.config)
    return loader.build(loader.load(overrides))


def cmd_config_init(args) -> int:
    config = ConfigLoader().load()
    if args.output:
        ConfigLoader.save(config, args.output)
    else:
        print(json.dumps(config, indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_synth(args) -> int:
    loader = ConfigLoader(args.config)
    config = loader.load(args.overrides)
    output_dir = Path(args.output_dir or config['paths']['output_dir'])
    params = MarketParams(**config['market'])
    cfg = FilterConfig(**config['filter'])
    chains, vix = synth_from_config(config['synth'], params, cfg)
    chain_path = write_chains_csv(chains, output_dir / "chains.csv")
    vix_path = write_vix_csv(vix, output_dir / "vix.csv")
    print(f"Cadenas: {chain_path}\nVIX: {vix_path}")
    return EXIT_OK


def cmd_fit_surfaces(args) -> int:
    surfaces = fit_surfaces_only(_load(args))
    print(f"{len(surfaces)} superficies ajustadas")
    return EXIT_OK


def cmd_run(args) -> int:
    manifest = run_pipeline(_load(args))
    print(f"Manifiesto: {manifest}")
    return EXIT_OK


def cmd_backtest(args) -> int:
    path = recompute_backtest(args.run_dir, args.docx)
    print(f"Informe: {path}")
    return EXIT_OK


def cmd_emit_plot_data(args) -> int:
    written = emit_plot_data(args.run_dir)
    print(f"{len(written)} archivos de datos para gráficos")
    return EXIT_OK


COMMANDS = {
    'synth': cmd_synth,
    'fit-surfaces': cmd_fit_surfaces,
    'run': cmd_run,
    'backtest': cmd_backtest,
    'emit-plot-data': cmd_emit_plot_data,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Punto de entrada; devuelve el código de salida."""
    args = build_parser().parse_args(argv)
    handler = cmd_config_init if args.command == "config" else COMMANDS[args.command]
    try:
        return handler(args)
    except RiesgoPSPError as e:
        log_error("cli", e, f"Fallo en '{args.command}'", exc_info=False)
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Ejecución interrumpida por el usuario")
        return 130
