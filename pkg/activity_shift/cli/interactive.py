"""
Interactive shell for the activity-shift toolkit.

Load a file of timeline records once, then inspect single users: their
activity metrics, segmented-regression fit and switchpoint posterior.
"""

import logging
import shlex
import sys

import cmd2

from .. import __version__
from ..analyzer import ActivityAnalyzer
from ..config import resolve_config
from ..exceptions import ActivityShiftError
from ..modules.metrics import activity_point
from ..modules.records import ingest


class DetectorCommands(cmd2.CommandSet):
    """Command set running the change detectors on one loaded user."""

    def __init__(self, parent):
        """Initialize the command set."""
        super().__init__()
        self.parent = parent

    def do_ssr(self, args):
        """Show the BIC-selected segmented-regression fit of a user.

        Usage: ssr <user-id>
        """
        timeline = self.parent.require_user(args)
        if timeline is None:
            return
        try:
            series = self.parent.analyzer.series(timeline)
            fit, jumps = self.parent.analyzer.ssr.jumps(series, timeline.user_id)
            self.parent.poutput(f"\nBreakpoints (k={fit.k}, BIC={fit.bic:.3f}, RSS={fit.rss:.3f}):")
            for day, jump in zip(fit.breakpoint_days, jumps):
                self.parent.poutput(f"  {day.isoformat()}  J={jump.magnitude:+.4f}")
            self.parent.poutput(f"Segment rates: {', '.join(f'{r:.3f}' for r in fit.rates)}")
        except ActivityShiftError as e:
            self.parent.perror(f"Analysis error: {e}")

    def do_bayes(self, args):
        """Show the switchpoint posterior of a user.

        Usage: bayes <user-id>
        """
        timeline = self.parent.require_user(args)
        if timeline is None:
            return
        try:
            series = self.parent.analyzer.series(timeline)
            posterior, jumps = self.parent.analyzer.bayes.jumps(series, timeline.user_id)
            self.parent.poutput(f"\nSwitchpoint ({posterior.solver}):")
            self.parent.poutput(f"  MAP day: {posterior.map_day.isoformat()} "
                                f"(P={posterior.tau_pmf[posterior.map_index - 1]:.4f})")
            days = posterior.credible_days(0.95)
            self.parent.poutput(f"  95% credible days: {len(days)} from {days[0]} to {days[-1]}")
            self.parent.poutput(f"  lambda1={posterior.lambda1_mode:.3f}  lambda2={posterior.lambda2_mode:.3f}")
            if posterior.p_value is not None:
                self.parent.poutput(f"  p-value: {posterior.p_value:.3f}")
            self.parent.poutput(f"  Jump days above floor: {len(jumps)}")
        except ActivityShiftError as e:
            self.parent.perror(f"Analysis error: {e}")


class ActivityShell(cmd2.Cmd):
    """Interactive shell for the activity-shift toolkit."""

    def __init__(self, config_path=None):
        """Initialize the interactive shell."""
        super().__init__(
            allow_cli_args=False,
            allow_redirection=True,
            persistent_history_file='~/.activity_shift_history',
            shortcuts={'exit': 'quit', 'ls': 'users'},
            include_ipy=False
        )

        self.prompt = 'activity> '
        self.intro = f"""
activity-shift interactive shell v{__version__}
Type 'help' for commands, 'exit' to quit.

  load <file>   - Load line-delimited timeline records
  users         - List loaded users
  show <user>   - Activity metrics of a user
  ssr <user>    - Segmented-regression breakpoints
  bayes <user>  - Switchpoint posterior
  config        - Effective run configuration
        """

        self.logger = logging.getLogger(__name__)
        self.analyzer = ActivityAnalyzer(resolve_config(config_path))
        self.timelines = {}

        self.register_command_set(DetectorCommands(self))

    def do_load(self, args):
        """Load timeline records.

        Usage: load <file>
        """
        parts = shlex.split(args)
        if not parts:
            self.perror("File path is required")
            return
        try:
            result = ingest(parts[0])
        except ActivityShiftError as e:
            self.perror(f"Load failed: {e}")
            return
        self.timelines = {t.user_id: t for t in result.timelines}
        self.poutput(f"Loaded {len(result.timelines)} timelines, skipped {result.skipped} records")
        for error in result.errors:
            self.perror(f"  {error.message}")

    def do_users(self, _):
        """List loaded users."""
        if not self.timelines:
            self.poutput("No users loaded. Use 'load <file>' first.")
            return
        self.poutput(f"\n{'User ID':<30} | {'Class':<16} | {'Events':>8}")
        self.poutput("-" * 60)
        for user_id in sorted(self.timelines):
            timeline = self.timelines[user_id]
            self.poutput(f"{user_id:<30} | {timeline.user_class.value:<16} | {len(timeline):>8}")

    def do_show(self, args):
        """Show activity metrics of a user.

        Usage: show <user-id>
        """
        timeline = self.require_user(args)
        if timeline is None:
            return
        try:
            point = activity_point(timeline)
        except ActivityShiftError as e:
            self.perror(f"Error: {e}")
            return
        series = self.analyzer.series(timeline)
        self.poutput(f"\nUser: {point.user_id} ({point.user_class.value})")
        self.poutput(f"  Messages M: {point.total}")
        self.poutput(f"  Retweets R: {point.retweets}")
        self.poutput(f"  rho: {point.rho:.4f}")
        self.poutput(f"  h: {'undefined' if point.h is None else f'{point.h:.4f}'}")
        self.poutput(f"  Events in window: {int(series.counts.sum())} over {series.n} days")

    def do_config(self, _):
        """Show the effective run configuration."""
        for key, value in self.analyzer.config.to_dict().items():
            self.poutput(f"  {key}: {value}")

    # Helper methods

    def require_user(self, args):
        """Return the loaded timeline named in args, printing an error if missing."""
        parts = shlex.split(args)
        if not parts:
            self.perror("User ID is required")
            return None
        timeline = self.timelines.get(parts[0])
        if timeline is None:
            self.perror(f"Unknown user '{parts[0]}'")
        return timeline


def main():
    """Launch the interactive shell."""
    import argparse

    parser = argparse.ArgumentParser(description='activity-shift interactive shell')
    parser.add_argument('--config', '-c', help='Path to config file')
    parser.add_argument('input', nargs='?', help='Records to load on start')

    args = parser.parse_args(sys.argv[1:])

    shell = ActivityShell(args.config)
    if args.input:
        shell.do_load(shlex.quote(args.input))
    sys.exit(shell.cmdloop())


if __name__ == '__main__':
    main()
