"""
Command line interface for fovea.

    fovea <synth|pretrain|train|eval|viz|grid|baseline> [--config FILE] [--key=value ...]

This program is free software; you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation; either version 2 of the License, or
(at your option) any later version.
"""

import optparse
import sys
import traceback

from fovea import api as fovea_api
from fovea import settings
from fovea.cexceptions import FoveaException


def _add_parser_option_from_field(parser, field):
    (name, default, kind, description) = field
    if kind == "list":
        default = ",".join(default)
    elif kind == "bool":
        default = "1" if default else "0"
    description += " [%s, default %s]" % (kind, default if default != "" else "unset")
    parser.add_option("--%s" % name.replace("_", "-"), dest=name, help=description)


def add_options_from_fields(parser):
    parser.add_option("--config", dest="config_file", help="read key = value settings from this file first")
    for field in settings.fields():
        _add_parser_option_from_field(parser, field)


class FoveaCLI(object):

    def __init__(self, api=None):
        self.api = api or fovea_api.FoveaAPI()

    def make_parser(self, subcommand):
        parser = optparse.OptionParser(usage="fovea %s [options]" % subcommand)
        add_options_from_fields(parser)
        return parser

    def get_subcommand(self, args):
        if len(args) < 2 or args[1] in ("-h", "--help"):
            return None
        if args[1] == "--version":
            return "version"
        return args[1]

    def overrides(self, options):
        return dict((key, value) for (key, value) in vars(options).items()
                    if key in settings.DEFAULTS and value is not None)

    def run(self, args):
        """
        Process the command line and do what the user asks.

        :return: exit code
        """
        subcommand = self.get_subcommand(args)
        if subcommand is None:
            self.print_help()
            return 2
        if subcommand == "version":
            print("fovea %s" % self.api.version())
            return 0
        if subcommand not in settings.SUBCOMMANDS:
            print("unknown subcommand '%s'" % subcommand, file=sys.stderr)
            self.print_help()
            return 2

        (options, extra) = self.make_parser(subcommand).parse_args(args[2:])
        logger = None
        try:
            if extra:
                print("unexpected arguments: %s" % " ".join(extra), file=sys.stderr)
                return 2
            config = self.api.settings(options.config_file, self.overrides(options), subcommand)
            logger = self.api.run_logger(config)
            echo = config.echo(subcommand)
            logger.info("%s: resolved configuration in %s" % (subcommand, echo))
            self.api.run(subcommand, config, logger=logger)
            logger.info("%s: done" % subcommand)
            return 0
        except FoveaException as e:
            if logger is not None:
                logger.error("%s failed: %s" % (subcommand, e))
            print("fovea %s: %s" % (subcommand, e), file=sys.stderr)
            return 1
        except Exception:
            print("### ERROR ###", file=sys.stderr)
            traceback.print_exc()
            return 2
        finally:
            if logger is not None:
                logger.close()

    def print_help(self):
        print("usage\n=====")
        print("fovea <%s> [--config FILE] [options|--help]" % "|".join(settings.SUBCOMMANDS))
        print("fovea --version")


def main():
    """
    CLI entry point
    """
    return sys.exit(FoveaCLI().run(sys.argv))


if __name__ == "__main__":
    main()
