"""eval: trajectory mAP against ground truth"""

import argparse
from pathlib import Path

from src.commands.common import add_common_arguments
from src.config import Settings
from src.services.evaluation_service import EvaluationService
from src.services.storage_service import StorageService


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("eval", help="evaluate trajectory mAP")
    parser.add_argument("predictions", type=Path, help="result file to evaluate")
    parser.add_argument("--gt", type=Path, required=True, help="ground-truth file")
    add_common_arguments(parser)
    parser.set_defaults(handler=run_eval)


def run_eval(args: argparse.Namespace, settings: Settings) -> int:
    """
    Print the AP table; with --out also write the key=value report

    Args:
        args: Parsed arguments
        settings: Run configuration

    Returns:
        Exit code
    """
    rough = settings.ONLINE.rough_classes
    predictions = StorageService.read_results(args.predictions, rough, True)
    ground_truth = StorageService.read_results(args.gt, rough, True)
    report = EvaluationService.evaluate(
        predictions,
        ground_truth,
        settings.EVAL.thresholds,
        settings.eval_classes(),
    )
    print(EvaluationService.format_table(report))
    if settings.OUTPUT is not None:
        StorageService.write_report(
            settings.OUTPUT, EvaluationService.report_values(report)
        )
    return 0
