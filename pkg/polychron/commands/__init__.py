"""Subcommands of the ``polychron`` command line."""
