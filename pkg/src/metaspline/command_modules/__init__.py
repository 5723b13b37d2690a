"""metaspline CLI command modules subpackage."""
