"""Empty __init__ file for unit tests."""
