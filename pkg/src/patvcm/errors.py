"""Error taxonomy shared across the package.

Domain errors (bad arguments to a pure function) raise plain ValueError.
StructuralError marks malformed serialized data or stream/state mismatches;
ConfigError marks invalid pipeline or profile configuration.  The CLI maps
them to exit codes 2 and 3 respectively.
"""


class StructuralError(Exception):
    """Malformed bitstream, corrupt payload, or encoder/decoder state mismatch."""


class ConfigError(Exception):
    """Invalid configuration file, profile, or stream-dependency violation."""
