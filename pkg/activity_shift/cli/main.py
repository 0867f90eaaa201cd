"""
Main CLI entry point for the activity-shift toolkit.

Exit codes: 0 success, 1 fatal error, 2 partial success (skipped records or
failed users).
"""

import argparse
import json
import logging
import sys
from datetime import date
from typing import Any, Dict, List, Optional

from .. import __version__
from ..config import resolve_config
from ..exceptions import ActivityShiftError, ValidationError
from ..modules.pipeline import emit, run_analysis
from ..modules.records import IngestResult, ingest, write_records
from ..modules.synthetic import PopulationSpec, generate_population, parse_schedule, validation_scenarios
from ..modules.timeline import UserClass

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

REPORT_FILES = {
    "metrics": ["activity_points.csv", "kl_rho.csv", "kl_h.csv", "before_after.csv", "weekly_activity.csv"],
    "ssr": ["jumps_ssr.csv", "breakpoints.csv", "users.csv"],
    "bayes": ["jumps_bayes.csv", "users.csv"],
    "report": None,
}


def setup_logging(verbose: bool = False) -> None:
    """
    Set up logging configuration.

    Args:
        verbose: Whether to enable verbose logging
    """
    log_level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def get_config(args: argparse.Namespace):
    """
    Build the effective RunConfig from flags, the config file and defaults.

    Raises:
        ValidationError: On unknown keys or invalid values
    """
    overrides: Dict[str, Any] = {
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "solver_bayes": getattr(args, "solver", None),
        "window_start": getattr(args, "window_start", None),
        "window_end": getattr(args, "window_end", None),
        "split_date": getattr(args, "split_date", None),
    }
    return resolve_config(getattr(args, "config", None), overrides)


def read_input(path: str) -> IngestResult:
    result = ingest(path)
    for error in result.errors:
        logging.warning(f"Rejected record: {error.message}")
    return result


def handle_ingest_check(args: argparse.Namespace) -> int:
    """Parse an input file and report what would be analyzed."""
    result = read_input(args.input)
    summary = {
        "timelines": len(result.timelines),
        "events": sum(len(t) for t in result.timelines),
        "skipped": result.skipped,
        "errors": [{"line": e.line, "message": e.message} for e in result.errors],
    }
    print(json.dumps(summary, indent=2))
    return EXIT_PARTIAL if result.skipped else EXIT_OK


def handle_synth(args: argparse.Namespace) -> int:
    """Generate a synthetic population as line-delimited records."""
    config = get_config(args)
    if args.scenario:
        schedule = validation_scenarios()[args.scenario]
    elif args.schedule:
        schedule = parse_schedule(args.schedule, config.window)
    else:
        raise ValidationError("synth needs --scenario or --schedule")
    spec = PopulationSpec(
        schedule, args.users, UserClass(args.user_class),
        rho_star=args.rho_star,
        rho_after=args.rho_after,
        rho_switch=date.fromisoformat(args.rho_switch) if args.rho_switch else None,
    )
    timelines = generate_population([spec], config.seed)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as stream:
            count = write_records(timelines, stream)
    else:
        count = write_records(timelines, sys.stdout)
    logging.info(f"Generated {count} timelines")
    return EXIT_OK


def handle_analysis(args: argparse.Namespace) -> int:
    """Run the analyses and write the files of the chosen subcommand."""
    config = get_config(args)
    result = read_input(args.input)
    if not result.timelines:
        raise ValidationError("No valid timelines in input")
    bundle = run_analysis(config, result.timelines, skipped_records=result.skipped)
    emit(bundle, args.out, REPORT_FILES[args.command])
    if bundle.errors or result.skipped:
        return EXIT_PARTIAL
    return EXIT_OK


def handle_sample(args: argparse.Namespace) -> int:
    """Sample user ids from an archive service."""
    from ..client import HttpSourceClient
    from ..modules.sampling import DEFAULT_BIO_STEMS, DEFAULT_MEDIA_HANDLES, Retrying, sample_journalists, sample_random_users

    config = get_config(args)
    client = HttpSourceClient(args.source_url, api_token=args.api_token)
    retry = Retrying(max_retries=args.max_retries, base_delay=args.backoff)
    if args.mode == "random":
        followers, friends = sample_random_users(
            client,
            thresholds=(args.min_followers, args.min_friends, args.min_statuses),
            target=args.target,
            seed=config.seed,
            query=args.query,
            retry=retry,
        )
        result: Dict[str, List[str]] = {"random_followers": followers, "random_friends": friends}
    else:
        media = args.media.split(",") if args.media else DEFAULT_MEDIA_HANDLES
        stems = args.keywords.split(",") if args.keywords else DEFAULT_BIO_STEMS
        result = {"journalists": sample_journalists(client, media, stems, retry=retry)}
    text = json.dumps(result, indent=2)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as stream:
            stream.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='activity-shift CLI')

    # Global arguments
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
    parser.add_argument('--config', '-c', help='Path to config file ([run] section)')
    parser.add_argument('--seed', type=int, help='Random seed')

    subparsers = parser.add_subparsers(dest='command', help='Command')

    check_parser = subparsers.add_parser('ingest-check', help='Validate an input file')
    check_parser.add_argument('input', help='Line-delimited records ("-" for stdin)')

    synth_parser = subparsers.add_parser('synth', help='Generate synthetic timelines')
    synth_parser.add_argument('--scenario', choices=sorted(validation_scenarios()), help='Validation scenario')
    synth_parser.add_argument('--schedule', help='Pieces as "YYYY-MM-DD:rate,..." over the configured window')
    synth_parser.add_argument('--users', type=int, default=1, help='Number of users')
    synth_parser.add_argument('--class', dest='user_class', default=UserClass.GENERIC.value,
                              choices=[c.value for c in UserClass], help='User class')
    synth_parser.add_argument('--rho-star', type=float, default=0.0, help='Retweet probability')
    synth_parser.add_argument('--rho-after', type=float, help='Retweet probability after --rho-switch')
    synth_parser.add_argument('--rho-switch', help='Date the retweet probability changes')
    synth_parser.add_argument('--window-start', help='Window start date')
    synth_parser.add_argument('--window-end', help='Window end date (exclusive)')
    synth_parser.add_argument('--out', '-o', help='Output file (default: stdout)')

    for name, help_text in (('metrics', 'Activity metrics and class divergences'),
                            ('ssr', 'Segmented-regression breakpoints and jumps'),
                            ('bayes', 'Bayesian switchpoints and jumps'),
                            ('report', 'Every analysis and every report file')):
        analysis_parser = subparsers.add_parser(name, help=help_text)
        analysis_parser.add_argument('input', help='Line-delimited records ("-" for stdin)')
        analysis_parser.add_argument('--out', '-o', required=True, help='Output directory')
        analysis_parser.add_argument('--workers', type=int, help='Parallel workers (-1: all cores)')
        analysis_parser.add_argument('--window-start', help='Window start date')
        analysis_parser.add_argument('--window-end', help='Window end date (exclusive)')
        analysis_parser.add_argument('--split-date', help='Before/after split date')
        if name in ('bayes', 'report'):
            analysis_parser.add_argument('--solver', choices=['exact', 'mcmc'], help='Switchpoint solver')

    sample_parser = subparsers.add_parser('sample', help='Sample users from an archive service')
    sample_parser.add_argument('mode', choices=['random', 'journalists'], help='Sampling procedure')
    sample_parser.add_argument('--source-url', required=True, help='Archive service base URL')
    sample_parser.add_argument('--api-token', help='Archive service token')
    sample_parser.add_argument('--target', type=int, default=100, help='Users per random set')
    sample_parser.add_argument('--query', default='', help='Location query')
    sample_parser.add_argument('--min-followers', type=int, default=55, help='Followers threshold (strict)')
    sample_parser.add_argument('--min-friends', type=int, default=95, help='Friends threshold (strict)')
    sample_parser.add_argument('--min-statuses', type=int, default=1000, help='Statuses threshold (strict)')
    sample_parser.add_argument('--media', help='Comma-separated media handles')
    sample_parser.add_argument('--keywords', help='Comma-separated bio keyword stems')
    sample_parser.add_argument('--max-retries', type=int, default=3, help='Retries per request')
    sample_parser.add_argument('--backoff', type=float, default=1.0, help='First retry delay in seconds')
    sample_parser.add_argument('--out', '-o', help='Output file (default: stdout)')
    return parser


HANDLERS = {
    'ingest-check': handle_ingest_check,
    'synth': handle_synth,
    'metrics': handle_analysis,
    'ssr': handle_analysis,
    'bayes': handle_analysis,
    'report': handle_analysis,
    'sample': handle_sample,
}


def main(argv: Optional[List[str]] = None) -> None:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Setup logging
    setup_logging(args.verbose)

    # If no command specified, print help and exit
    if not args.command:
        parser.print_help()
        sys.exit(EXIT_FATAL)

    try:
        code = HANDLERS[args.command](args)
    except ActivityShiftError as e:
        logging.error(f"{type(e).__name__}: {e}")
        sys.exit(EXIT_FATAL)
    except OSError as e:
        logging.error(f"I/O error: {e}")
        sys.exit(EXIT_FATAL)
    except Exception as e:
        logging.exception(f"Error: {e}")
        sys.exit(EXIT_FATAL)
    sys.exit(code)


if __name__ == '__main__':
    main()
