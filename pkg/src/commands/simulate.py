"""sim: generate a synthetic scenario"""

import argparse

from src.commands.common import add_common_arguments, require_output
from src.config import Settings
from src.services.simulation_service import SimulationService


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "sim", help="write ground truth, detections and sidecars of a scenario"
    )
    add_common_arguments(parser)
    parser.set_defaults(handler=run_sim)


def run_sim(args: argparse.Namespace, settings: Settings) -> int:
    """
    Simulate SIM settings with SEED into the --out directory

    Args:
        args: Parsed arguments
        settings: Run configuration

    Returns:
        Exit code
    """
    out_dir = require_output(settings)
    spec = SimulationService.build_scenario(settings.SIM, settings.SEED)
    result = SimulationService.simulate(spec)
    paths = SimulationService.write(result, out_dir)
    print(
        f"{len(spec.objects)} objects, {spec.num_frames} frames, "
        f"{len(result.detections)} detections -> {out_dir}"
    )
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return 0
