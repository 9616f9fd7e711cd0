class ConfigError(ValueError):
    """Invalid configuration or unusable input assets; raised before any output is written."""
