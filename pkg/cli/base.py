"""Shared plumbing of the pipeline management commands.

Exit codes:
    1  configuration error (bad flags, config file or scenario)
    2  I/O error (missing or unreadable input, malformed files)
    3  generation error (anything else the pipeline raises)
"""

import json
import sys

from django.core.management.base import BaseCommand, CommandError

from dataset.exceptions import BoxOutOfBounds, MissingOcclusionData
from mapio.exceptions import DanglingNodeRef, LayoutError, MalformedXml
from paralleleye.exceptions import ConfigError, IoFailure, ParallelEyeError
from worldgen.forms import errors_as_text

from .config import load_config, merge_options

EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_GENERATION = 3

INPUT_ERRORS = (IoFailure, MalformedXml, DanglingNodeRef, LayoutError, BoxOutOfBounds, MissingOcclusionData, OSError)


def as_json(data):
    return json.dumps(data, indent=2, sort_keys=True)


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, INPUT_ERRORS):
        return EXIT_IO
    return EXIT_GENERATION


class PipelineCommand(BaseCommand):
    """A command whose options are merged with --config and validated by form_class."""

    form_class = None

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        # argparse exits with 2, which is reserved for I/O errors here
        def error(message):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_CONFIG, f"{parser.prog}: error: {message}\n")
            raise CommandError(f"Error: {message}", returncode=EXIT_CONFIG)

        parser.error = error
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help="JSON or YAML file of settings; flags override it")
        self.add_options(parser)

    def add_options(self, parser):
        pass

    def load_file_values(self, options):
        if not options.get('config'):
            return {}
        values = load_config(options['config'])
        unknown = sorted(set(values) - set(self.form_class.base_fields))
        if unknown:
            raise ConfigError(f"unknown settings in {options['config']}: {', '.join(unknown)}")
        return values

    def clean_options(self, options):
        data = merge_options(self.load_file_values(options), options, self.form_class.base_fields)
        form = self.form_class(data=data)
        if not form.is_valid():
            raise ConfigError(errors_as_text(form))
        return form.cleaned_data

    def handle(self, *args, **options):
        try:
            return self.run(self.clean_options(options))
        except (ParallelEyeError, OSError) as exc:
            raise CommandError(str(exc), returncode=exit_code(exc)) from exc

    def run(self, cleaned):
        raise NotImplementedError('subclasses of PipelineCommand must provide a run() method')
