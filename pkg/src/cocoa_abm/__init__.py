"""Agent-based SEIR+D epidemic simulator with a contact-confirming app model."""

__version__ = "0.1.0"
