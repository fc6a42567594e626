"""teleopsim: deterministic two-endpoint AV tele-assistance simulator."""

__version__ = "0.1.0"
